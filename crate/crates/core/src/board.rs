//! The 42-box game board: box kinds, adjacency, movement and structural checks.
//!
//! Boards are undirected graphs. A move of `n` steps follows any walk of exactly
//! `n` edges that never immediately re-traverses the edge it just used; boxes
//! may be revisited. Junction boxes (degree 3 or 4) are what give a roll its
//! two to four candidate destinations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, Color, ConceptId, FamilyId, KeyPointKind};

pub const BOX_COUNT: usize = 42;
pub const MIN_DEGREE: usize = 2;
pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoxId(pub u16);

impl BoxId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BoxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The seven board versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Lime,
    Purple,
    Orange,
    Yellow,
    Emerald,
    Blue,
    Multicolored,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Lime,
        Variant::Purple,
        Variant::Orange,
        Variant::Yellow,
        Variant::Emerald,
        Variant::Blue,
        Variant::Multicolored,
    ];

    /// The single color of the variant, `None` for multicolored.
    pub fn color(self) -> Option<Color> {
        match self {
            Variant::Lime => Some(Color::Lime),
            Variant::Purple => Some(Color::Purple),
            Variant::Orange => Some(Color::Orange),
            Variant::Yellow => Some(Color::Yellow),
            Variant::Emerald => Some(Color::Emerald),
            Variant::Blue => Some(Color::Blue),
            Variant::Multicolored => None,
        }
    }

    pub fn from_color(color: Color) -> Self {
        match color {
            Color::Lime => Variant::Lime,
            Color::Purple => Variant::Purple,
            Color::Orange => Variant::Orange,
            Color::Yellow => Variant::Yellow,
            Color::Emerald => Variant::Emerald,
            Color::Blue => Variant::Blue,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self.color() {
            Some(c) => c.as_str(),
            None => "multicolored",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// Number of gamification boxes a board of this variant carries.
    pub fn expected_special_count(self) -> usize {
        self.expected_special_effects().len()
    }

    pub fn expected_special_effects(self) -> Vec<SpecialEffect> {
        let mut effects = match self {
            Variant::Lime => return Vec::new(),
            _ => vec![
                SpecialEffect::Joker,
                SpecialEffect::NoDice,
                SpecialEffect::ReverseDirection,
                SpecialEffect::Late,
            ],
        };
        if self != Variant::Purple {
            effects.extend(KeyPointKind::ALL.map(SpecialEffect::KeyPoint));
        }
        effects
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "effect", content = "key_point")]
pub enum SpecialEffect {
    Joker,
    NoDice,
    ReverseDirection,
    Late,
    KeyPoint(KeyPointKind),
}

impl SpecialEffect {
    pub fn name(self) -> &'static str {
        match self {
            SpecialEffect::Joker => "joker",
            SpecialEffect::NoDice => "no_dice",
            SpecialEffect::ReverseDirection => "reverse_direction",
            SpecialEffect::Late => "late",
            SpecialEffect::KeyPoint(KeyPointKind::RoleOfUser) => "key_point.role_of_user",
            SpecialEffect::KeyPoint(KeyPointKind::Assessment) => "key_point.assessment",
            SpecialEffect::KeyPoint(KeyPointKind::Accessibility) => "key_point.accessibility",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxKind {
    Start,
    Concept(ConceptId),
    Color(FamilyId),
    Special(SpecialEffect),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardBox {
    pub id: BoxId,
    pub kind: BoxKind,
}

#[derive(Debug, Error)]
pub enum BoardError {
    #[error("cannot parse board definition: {0}")]
    Parse(String),
    #[error("unresolved reference: {0}")]
    Reference(String),
    #[error("topology violation: {0}")]
    Topology(String),
    #[error("steps must be in 1..=6, got {0}")]
    StepsOutOfRange(u32),
    #[error("box {0} does not exist")]
    UnknownBox(BoxId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self {
            ok: true,
            findings: Vec::new(),
        }
    }

    pub fn push(&mut self, severity: Severity, code: &str, message: impl Into<String>) {
        if severity == Severity::Error {
            self.ok = false;
        }
        self.findings.push(Finding {
            severity,
            code: code.to_owned(),
            message: message.into(),
        });
    }

    pub fn error(&mut self, code: &str, message: impl Into<String>) {
        self.push(Severity::Error, code, message);
    }

    pub fn warn(&mut self, code: &str, message: impl Into<String>) {
        self.push(Severity::Warning, code, message);
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.ok &= other.ok;
        self.findings.extend(other.findings);
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }
}

// Codes reported for dangling or out-of-variant references. `load_board`
// surfaces these as `BoardError::Reference`, everything else as topology.
const REFERENCE_CODES: [&str; 3] = ["unknown-concept", "unknown-family", "variant-purity"];

// --- definition document -------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoardDoc {
    id: String,
    variant: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    edges: Vec<[u16; 2]>,
    #[serde(rename = "box", default)]
    boxes: Vec<BoxDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxDoc {
    id: u16,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    concept: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    effect: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    key_point: Option<KeyPointKind>,
}

impl BoxDoc {
    fn into_kind(self) -> Result<BoxKind, BoardError> {
        let missing = |field: &str| {
            BoardError::Parse(format!("box {} of kind `{}` needs `{field}`", self.id, self.kind))
        };
        Ok(match self.kind.as_str() {
            "start" => BoxKind::Start,
            "concept" => BoxKind::Concept(ConceptId(
                self.concept.clone().ok_or_else(|| missing("concept"))?,
            )),
            "color" => BoxKind::Color(FamilyId(self.family.clone().ok_or_else(|| missing("family"))?)),
            "special" => {
                let effect = match self.effect.as_deref().ok_or_else(|| missing("effect"))? {
                    "joker" => SpecialEffect::Joker,
                    "no_dice" => SpecialEffect::NoDice,
                    "reverse_direction" => SpecialEffect::ReverseDirection,
                    "late" => SpecialEffect::Late,
                    "key_point" => {
                        SpecialEffect::KeyPoint(self.key_point.ok_or_else(|| missing("key_point"))?)
                    }
                    other => {
                        return Err(BoardError::Parse(format!(
                            "box {}: unknown special effect `{other}`",
                            self.id
                        )))
                    }
                };
                BoxKind::Special(effect)
            }
            other => {
                return Err(BoardError::Parse(format!("box {}: unknown kind `{other}`", self.id)))
            }
        })
    }

    fn from_box(b: &BoardBox) -> Self {
        let mut doc = BoxDoc {
            id: b.id.0,
            kind: String::new(),
            concept: None,
            family: None,
            effect: None,
            key_point: None,
        };
        match &b.kind {
            BoxKind::Start => doc.kind = "start".into(),
            BoxKind::Concept(c) => {
                doc.kind = "concept".into();
                doc.concept = Some(c.0.clone());
            }
            BoxKind::Color(f) => {
                doc.kind = "color".into();
                doc.family = Some(f.0.clone());
            }
            BoxKind::Special(e) => {
                doc.kind = "special".into();
                match e {
                    SpecialEffect::KeyPoint(k) => {
                        doc.effect = Some("key_point".into());
                        doc.key_point = Some(*k);
                    }
                    other => doc.effect = Some(other.name().into()),
                }
            }
        }
        doc
    }
}

// --- board ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Board {
    id: String,
    title: Option<String>,
    variant: Variant,
    boxes: Vec<BoardBox>,
    edges: BTreeSet<(BoxId, BoxId)>,
    adjacency: Vec<Vec<BoxId>>,
}

impl Board {
    /// Builds a board from parts without any rules check beyond what is needed
    /// to index it (box ids `0..n`, edge endpoints in range).
    pub fn from_parts(
        id: impl Into<String>,
        variant: Variant,
        boxes: Vec<BoardBox>,
        edges: impl IntoIterator<Item = (BoxId, BoxId)>,
    ) -> Result<Self, BoardError> {
        let mut sorted = boxes;
        sorted.sort_by_key(|b| b.id);
        for (i, b) in sorted.iter().enumerate() {
            if b.id.index() != i {
                return Err(BoardError::Parse(format!(
                    "box ids must be 0..{} without gaps or duplicates (saw {} at position {i})",
                    sorted.len(),
                    b.id
                )));
            }
        }
        let n = sorted.len();
        let mut edge_set = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            if a.index() >= n || b.index() >= n {
                return Err(BoardError::Parse(format!("edge ({a}, {b}) references a missing box")));
            }
            if a == b {
                return Err(BoardError::Topology(format!("self-loop on box {a}")));
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if !edge_set.insert(key) {
                return Err(BoardError::Topology(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a.index()].push(b);
            adjacency[b.index()].push(a);
        }
        for list in &mut adjacency {
            list.sort();
        }
        Ok(Self {
            id: id.into(),
            title: None,
            variant,
            boxes: sorted,
            edges: edge_set,
            adjacency,
        })
    }

    /// Parses a board definition without checking it against the catalog.
    pub fn parse(source: &str) -> Result<Self, BoardError> {
        let doc: BoardDoc =
            toml::from_str(source).map_err(|e| BoardError::Parse(e.message().to_owned()))?;
        let variant = Variant::parse(&doc.variant)
            .ok_or_else(|| BoardError::Parse(format!("unknown variant `{}`", doc.variant)))?;
        let boxes = doc
            .boxes
            .into_iter()
            .map(|b| {
                let id = BoxId(b.id);
                b.into_kind().map(|kind| BoardBox { id, kind })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let edges = doc.edges.into_iter().map(|[a, b]| (BoxId(a), BoxId(b)));
        let mut board = Self::from_parts(doc.id, variant, boxes, edges)?;
        board.title = doc.title;
        Ok(board)
    }

    pub fn to_toml(&self) -> String {
        let doc = BoardDoc {
            id: self.id.clone(),
            variant: self.variant.as_str().to_owned(),
            title: self.title.clone(),
            boxes: self.boxes.iter().map(BoxDoc::from_box).collect(),
            edges: self.edges.iter().map(|(a, b)| [a.0, b.0]).collect(),
        };
        toml::to_string(&doc).expect("board is always serializable")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn title(&self) -> Option<&str> {
        self.title.as_deref()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn boxes(&self) -> &[BoardBox] {
        &self.boxes
    }

    pub fn edges(&self) -> impl Iterator<Item = (BoxId, BoxId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, id: BoxId) -> bool {
        id.index() < self.boxes.len()
    }

    pub fn kind(&self, id: BoxId) -> Option<&BoxKind> {
        self.boxes.get(id.index()).map(|b| &b.kind)
    }

    pub fn neighbors(&self, id: BoxId) -> &[BoxId] {
        &self.adjacency[id.index()]
    }

    pub fn degree(&self, id: BoxId) -> usize {
        self.adjacency[id.index()].len()
    }

    /// The first start box, if any.
    pub fn start(&self) -> Option<BoxId> {
        self.boxes
            .iter()
            .find(|b| b.kind == BoxKind::Start)
            .map(|b| b.id)
    }

    pub fn special_boxes(&self) -> impl Iterator<Item = (BoxId, SpecialEffect)> + '_ {
        self.boxes.iter().filter_map(|b| match b.kind {
            BoxKind::Special(e) => Some((b.id, e)),
            _ => None,
        })
    }

    /// How many concept boxes show each concept.
    pub fn concept_multiplicity(&self) -> BTreeMap<&ConceptId, usize> {
        let mut counts = BTreeMap::new();
        for b in &self.boxes {
            if let BoxKind::Concept(c) = &b.kind {
                *counts.entry(c).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Endpoints of every non-backtracking walk of exactly `steps` edges from
    /// `from`. Accepts any step count; see [`legal_destinations`] for the
    /// single-die contract.
    pub fn walk_endpoints(&self, from: BoxId, steps: u32) -> Result<BTreeSet<BoxId>, BoardError> {
        if !self.contains(from) {
            return Err(BoardError::UnknownBox(from));
        }
        // Frontier of (current box, box we arrived from). Bounded by 2 * |E|.
        let mut frontier: BTreeSet<(BoxId, Option<BoxId>)> = BTreeSet::from([(from, None)]);
        for _ in 0..steps {
            let mut next = BTreeSet::new();
            for &(at, came_from) in &frontier {
                for &n in self.neighbors(at) {
                    if Some(n) != came_from {
                        next.insert((n, Some(at)));
                    }
                }
            }
            frontier = next;
        }
        Ok(frontier.into_iter().map(|(at, _)| at).collect())
    }

    fn is_connected(&self) -> bool {
        if self.boxes.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.boxes.len()];
        let mut queue = VecDeque::from([BoxId(0)]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &n in self.neighbors(v) {
                if !seen[n.index()] {
                    seen[n.index()] = true;
                    queue.push_back(n);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Destinations offered for a single die roll of `steps`.
pub fn legal_destinations(board: &Board, from: BoxId, steps: u32) -> Result<BTreeSet<BoxId>, BoardError> {
    if !(1..=6).contains(&steps) {
        return Err(BoardError::StepsOutOfRange(steps));
    }
    board.walk_endpoints(from, steps)
}

/// Minimum number of concept boxes each family concept needs on a single-color
/// board. Two when the non-start, non-special boxes can hold two of each
/// concept, otherwise one.
pub fn required_concept_multiplicity(variant: Variant, family_size: usize) -> usize {
    let room = BOX_COUNT - 1 - variant.expected_special_count();
    if 2 * family_size <= room {
        2
    } else {
        1
    }
}

/// Structural and catalog checks. Never fails; problems become findings.
pub fn validate_board(board: &Board, catalog: &Catalog) -> ValidationReport {
    let mut report = ValidationReport::new();

    if board.len() != BOX_COUNT {
        report.error(
            "box-count",
            format!("board `{}` has {} boxes, expected {BOX_COUNT}", board.id, board.len()),
        );
    }
    let starts = board.boxes.iter().filter(|b| b.kind == BoxKind::Start).count();
    if starts != 1 {
        report.error("start-count", format!("expected exactly one start box, found {starts}"));
    }
    if !board.is_connected() {
        report.error("connectivity", "board graph is not connected");
    }
    for b in &board.boxes {
        let d = board.degree(b.id);
        if !(MIN_DEGREE..=MAX_DEGREE).contains(&d) {
            report.error(
                "degree",
                format!("box {} has degree {d}, expected {MIN_DEGREE}..={MAX_DEGREE}", b.id),
            );
        }
    }

    let variant_color = board.variant.color();
    let mut families_seen = BTreeSet::new();
    for b in &board.boxes {
        match &b.kind {
            BoxKind::Concept(c) => match catalog.color_of(c) {
                None => report.error("unknown-concept", format!("box {}: unknown concept `{c}`", b.id)),
                Some(color) => {
                    families_seen.insert(color);
                    if variant_color.is_some_and(|v| v != color) {
                        report.error(
                            "variant-purity",
                            format!("box {}: `{c}` is not a {} concept", b.id, board.variant),
                        );
                    }
                }
            },
            BoxKind::Color(f) => match catalog.family(f) {
                None => report.error("unknown-family", format!("box {}: unknown family `{f}`", b.id)),
                Some(fam) => {
                    families_seen.insert(fam.color);
                    if variant_color.is_some_and(|v| v != fam.color) {
                        report.error(
                            "variant-purity",
                            format!("box {}: family `{f}` does not belong on a {} board", b.id, board.variant),
                        );
                    }
                }
            },
            BoxKind::Start | BoxKind::Special(_) => {}
        }
    }

    // Gamification boxes: count and exact effect multiset per variant.
    let mut specials: Vec<SpecialEffect> = board.special_boxes().map(|(_, e)| e).collect();
    let expected = board.variant.expected_special_effects();
    if specials.len() != expected.len() {
        report.error(
            "special-count",
            format!(
                "{} board has {} special boxes, expected {}",
                board.variant,
                specials.len(),
                expected.len()
            ),
        );
    } else {
        specials.sort();
        let mut want = expected;
        want.sort();
        if specials != want {
            report.error(
                "special-effects",
                format!("special boxes {specials:?} do not match {want:?}"),
            );
        }
    }

    let multiplicity = board.concept_multiplicity();
    match variant_color {
        Some(color) => {
            let family = catalog.family_by_color(color);
            let members = catalog.concepts_of(&family.id).unwrap_or_default();
            let required = required_concept_multiplicity(board.variant, members.len());
            for c in members {
                let n = multiplicity.get(&c.id).copied().unwrap_or(0);
                if n < required {
                    report.error(
                        "concept-coverage",
                        format!("`{}` appears {n} times, needs at least {required}", c.id),
                    );
                } else if n > 3 {
                    report.warn("concept-multiplicity", format!("`{}` appears {n} times", c.id));
                }
            }
        }
        None => {
            for color in Color::ALL {
                if !families_seen.contains(&color) {
                    report.error(
                        "family-coverage",
                        format!("multicolored board has no {color} box"),
                    );
                }
            }
        }
    }

    report
}

/// Parses, resolves and validates a board definition.
pub fn load_board(source: &str, catalog: &Catalog) -> Result<Board, BoardError> {
    let board = Board::parse(source)?;
    let report = validate_board(&board, catalog);
    if report.ok {
        return Ok(board);
    }
    let (reference, topology): (Vec<&Finding>, Vec<&Finding>) = report
        .errors()
        .partition(|f| REFERENCE_CODES.contains(&f.code.as_str()));
    if let Some(f) = reference.first() {
        return Err(BoardError::Reference(f.message.clone()));
    }
    let messages: Vec<_> = topology.iter().map(|f| format!("[{}] {}", f.code, f.message)).collect();
    Err(BoardError::Topology(messages.join("; ")))
}
