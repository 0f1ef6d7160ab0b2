//! The data shipped with the crate, plus loading the same layout from disk.
//!
//! Layout of a data directory:
//!
//! ```text
//! catalog.toml
//! boards/<variant>.toml
//! software/<id>.toml
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::board::{load_board, validate_board, Board, Severity, ValidationReport, Variant};
use crate::catalog::Catalog;
use crate::content::{compatible_with, load_software_board, SoftwareBoard};

const CATALOG: &str = include_str!("../data/catalog.toml");

const BOARDS: [(Variant, &str); 7] = [
    (Variant::Lime, include_str!("../data/boards/lime.toml")),
    (Variant::Purple, include_str!("../data/boards/purple.toml")),
    (Variant::Orange, include_str!("../data/boards/orange.toml")),
    (Variant::Yellow, include_str!("../data/boards/yellow.toml")),
    (Variant::Emerald, include_str!("../data/boards/emerald.toml")),
    (Variant::Blue, include_str!("../data/boards/blue.toml")),
    (Variant::Multicolored, include_str!("../data/boards/multicolored.toml")),
];

const SOFTWARE: [&str; 3] = [
    include_str!("../data/software/toy-notes.toml"),
    include_str!("../data/software/city-library.toml"),
    include_str!("../data/software/bike-share.toml"),
];

pub fn catalog_source() -> &'static str {
    CATALOG
}

/// The bundled default catalog (79 concepts).
pub fn catalog() -> Catalog {
    Catalog::load(CATALOG).expect("bundled catalog is valid")
}

pub fn source(variant: Variant) -> &'static str {
    BOARDS
        .iter()
        .find(|(v, _)| *v == variant)
        .map(|(_, s)| *s)
        .expect("every variant is bundled")
}

pub fn board(catalog: &Catalog, variant: Variant) -> Board {
    load_board(source(variant), catalog).expect("bundled board is valid")
}

/// The seven bundled boards in course order, multicolored last.
pub fn boards(catalog: &Catalog) -> Vec<Board> {
    Variant::ALL.iter().map(|&v| board(catalog, v)).collect()
}

/// Alias kept for callers that think in terms of built-in boards.
pub fn builtin_boards(catalog: &Catalog) -> Vec<Board> {
    boards(catalog)
}

pub fn software_library() -> Vec<SoftwareBoard> {
    SOFTWARE
        .iter()
        .map(|s| load_software_board(s).expect("bundled software board is valid"))
        .collect()
}

/// A fully loaded data tree.
#[derive(Debug, Clone)]
pub struct DataSet {
    pub catalog: Catalog,
    pub boards: Vec<Board>,
    pub software: Vec<SoftwareBoard>,
}

impl DataSet {
    pub fn bundled() -> Self {
        let catalog = catalog();
        let boards = boards(&catalog);
        Self {
            catalog,
            boards,
            software: software_library(),
        }
    }

    /// Loads a data directory, failing on the first invalid file.
    pub fn load_dir(dir: &Path) -> Result<Self, String> {
        let catalog_src = read(&dir.join("catalog.toml"))?;
        let catalog = Catalog::load(&catalog_src).map_err(|e| format!("catalog.toml: {e}"))?;
        let mut boards = Vec::new();
        for path in toml_files(&dir.join("boards"))? {
            let src = read(&path)?;
            boards.push(load_board(&src, &catalog).map_err(|e| format!("{}: {e}", path.display()))?);
        }
        let mut software = Vec::new();
        for path in toml_files(&dir.join("software"))? {
            let src = read(&path)?;
            software.push(load_software_board(&src).map_err(|e| format!("{}: {e}", path.display()))?);
        }
        Ok(Self {
            catalog,
            boards,
            software,
        })
    }

    pub fn board(&self, id: &str) -> Option<&Board> {
        self.boards.iter().find(|b| b.id() == id)
    }

    pub fn software_board(&self, id: &str) -> Option<&SoftwareBoard> {
        self.software.iter().find(|b| b.id == id)
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn toml_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Checks a whole data directory: catalog, every board, every software board.
/// Invalid files become error findings rather than aborting the run.
///
/// Returns `Err` only when the directory layout itself cannot be read.
pub fn validate_dir(dir: &Path) -> Result<ValidationReport, String> {
    let mut report = ValidationReport::new();
    let catalog_src = read(&dir.join("catalog.toml"))?;
    let catalog = match Catalog::load(&catalog_src) {
        Ok(c) => c,
        Err(e) => {
            report.error("catalog", format!("catalog.toml: {e}"));
            return Ok(report);
        }
    };

    for path in toml_files(&dir.join("boards"))? {
        let src = read(&path)?;
        match Board::parse(&src) {
            Ok(board) => {
                let mut r = validate_board(&board, &catalog);
                for f in &mut r.findings {
                    f.message = format!("{}: {}", path.display(), f.message);
                }
                report.merge(r);
            }
            Err(e) => report.error("board-parse", format!("{}: {e}", path.display())),
        }
    }

    let mut software = Vec::new();
    for path in toml_files(&dir.join("software"))? {
        let src = read(&path)?;
        match load_software_board(&src) {
            Ok(b) => software.push(b),
            Err(e) => report.error("content", format!("{}: {e}", path.display())),
        }
    }
    for v in Variant::ALL {
        if compatible_with(&software, v).is_empty() {
            report.push(
                Severity::Warning,
                "content-coverage",
                format!("no software board is compatible with the {v} board"),
            );
        }
    }
    Ok(report)
}

/// Writes the bundled data tree to `dir` (used by `jade validate` tests and
/// as a starting point for custom content).
pub fn write_bundled(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir.join("boards"))?;
    fs::create_dir_all(dir.join("software"))?;
    fs::write(dir.join("catalog.toml"), CATALOG)?;
    for (v, src) in BOARDS {
        fs::write(dir.join("boards").join(format!("{v}.toml")), src)?;
    }
    for (b, src) in software_library().iter().zip(SOFTWARE) {
        fs::write(dir.join("software").join(format!("{}.toml", b.id)), src)?;
    }
    Ok(())
}
