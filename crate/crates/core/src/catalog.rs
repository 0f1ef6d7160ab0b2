//! Concept catalog: the six course families, their concepts in legend order,
//! and the three key points recalled by the key-point boxes.
//!
//! The catalog is the vocabulary every board, claim and score sheet refers to.
//! It is loaded from a TOML document (see `data/catalog.toml` for the bundled
//! instance) and is immutable afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable machine key of a concept, e.g. `lime.fitts`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub String);

/// Stable machine key of a concept family, e.g. `orange`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FamilyId(pub String);

macro_rules! string_key {
    ($ty:ident) => {
        impl $ty {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $ty {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_key!(ConceptId);
string_key!(FamilyId);

/// Course colors. Each family carries exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Lime,
    Purple,
    Orange,
    Yellow,
    Emerald,
    Blue,
}

impl Color {
    pub const ALL: [Color; 6] = [
        Color::Lime,
        Color::Purple,
        Color::Orange,
        Color::Yellow,
        Color::Emerald,
        Color::Blue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Lime => "lime",
            Color::Purple => "purple",
            Color::Orange => "orange",
            Color::Yellow => "yellow",
            Color::Emerald => "emerald",
            Color::Blue => "blue",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Color {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Color::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CatalogError::UnknownColor(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyPointKind {
    RoleOfUser,
    Assessment,
    Accessibility,
}

impl KeyPointKind {
    pub const ALL: [KeyPointKind; 3] = [
        KeyPointKind::RoleOfUser,
        KeyPointKind::Assessment,
        KeyPointKind::Accessibility,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptFamily {
    pub id: FamilyId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_fr: Option<String>,
    pub color: Color,
    pub course_index: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub family: FamilyId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_fr: Option<String>,
    /// Opaque asset reference; rendering is up to the client.
    pub pictogram: String,
    pub ordinal: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPoint {
    pub kind: KeyPointKind,
    pub explanation_prompt: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Malformed(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown color `{0}`")]
    UnknownColor(String),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("family `{family}` declares {expected} concepts but lists {actual}")]
    FamilySizeMismatch {
        family: String,
        expected: usize,
        actual: usize,
    },
    #[error("catalog invariant violated: {0}")]
    Invariant(String),
}

// On-disk shape. Colors stay strings here so an unknown color is reported as
// such rather than as a generic parse failure.
#[derive(Debug, Deserialize, Serialize)]
struct CatalogDoc {
    #[serde(default)]
    family: Vec<FamilyDoc>,
    #[serde(default)]
    concept: Vec<Concept>,
    #[serde(default)]
    key_point: Vec<KeyPoint>,
}

#[derive(Debug, Deserialize, Serialize)]
struct FamilyDoc {
    id: FamilyId,
    name: String,
    #[serde(default)]
    name_fr: Option<String>,
    color: String,
    course_index: u8,
    expected_size: usize,
}

/// The immutable concept vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    families: Vec<ConceptFamily>,
    concepts: Vec<Concept>,
    key_points: Vec<KeyPoint>,
    by_id: BTreeMap<ConceptId, usize>,
}

impl Catalog {
    /// Parses and checks a catalog definition document.
    pub fn load(source: &str) -> Result<Self, CatalogError> {
        if source.trim().is_empty() {
            return Err(CatalogError::Malformed("empty document".into()));
        }
        let doc: CatalogDoc =
            toml::from_str(source).map_err(|e| CatalogError::Malformed(e.message().to_owned()))?;
        if doc.family.is_empty() {
            return Err(CatalogError::Malformed("no [[family]] entries".into()));
        }

        let mut families = Vec::with_capacity(doc.family.len());
        let mut expected = BTreeMap::new();
        for f in doc.family {
            let color: Color = f.color.parse()?;
            if expected.insert(f.id.clone(), f.expected_size).is_some() {
                return Err(CatalogError::DuplicateId(f.id.0));
            }
            families.push(ConceptFamily {
                id: f.id,
                name: f.name,
                name_fr: f.name_fr,
                color,
                course_index: f.course_index,
            });
        }
        Self::from_parts(families, doc.concept, doc.key_point, Some(&expected))
    }

    fn from_parts(
        families: Vec<ConceptFamily>,
        mut concepts: Vec<Concept>,
        key_points: Vec<KeyPoint>,
        expected: Option<&BTreeMap<FamilyId, usize>>,
    ) -> Result<Self, CatalogError> {
        if families.len() != 6 {
            return Err(CatalogError::Invariant(format!(
                "expected 6 families, found {}",
                families.len()
            )));
        }
        let colors: BTreeSet<_> = families.iter().map(|f| f.color).collect();
        if colors.len() != 6 {
            return Err(CatalogError::Invariant("family colors must be unique".into()));
        }
        let indices: BTreeSet<_> = families.iter().map(|f| f.course_index).collect();
        if indices.len() != 6 || indices.iter().any(|i| !(1..=6).contains(i)) {
            return Err(CatalogError::Invariant(
                "course indices must be 1..6 and unique".into(),
            ));
        }

        let family_ids: BTreeSet<_> = families.iter().map(|f| &f.id).collect();
        let mut seen_ord = BTreeSet::new();
        let mut by_id = BTreeMap::new();
        for c in &concepts {
            if !family_ids.contains(&c.family) {
                return Err(CatalogError::UnknownFamily(c.family.0.clone()));
            }
            if c.ordinal == 0 {
                return Err(CatalogError::Invariant(format!("concept `{}` has ordinal 0", c.id)));
            }
            if !seen_ord.insert((c.family.clone(), c.ordinal)) {
                return Err(CatalogError::DuplicateId(format!("{}#{}", c.family, c.ordinal)));
            }
            if by_id.insert(c.id.clone(), 0).is_some() {
                return Err(CatalogError::DuplicateId(c.id.0.clone()));
            }
        }
        if let Some(expected) = expected {
            for f in &families {
                let actual = concepts.iter().filter(|c| c.family == f.id).count();
                let want = expected[&f.id];
                if actual != want {
                    return Err(CatalogError::FamilySizeMismatch {
                        family: f.id.0.clone(),
                        expected: want,
                        actual,
                    });
                }
            }
        }

        let kinds: BTreeSet<_> = key_points.iter().map(|k| k.kind).collect();
        if key_points.len() != 3 || kinds.len() != 3 {
            return Err(CatalogError::Invariant(
                "exactly three distinct key points are required".into(),
            ));
        }

        let mut families = families;
        families.sort_by_key(|f| f.course_index);
        let family_rank: BTreeMap<_, _> = families
            .iter()
            .enumerate()
            .map(|(i, f)| (f.id.clone(), i))
            .collect();
        concepts.sort_by_key(|c| (family_rank[&c.family], c.ordinal));
        for (i, c) in concepts.iter().enumerate() {
            by_id.insert(c.id.clone(), i);
        }

        Ok(Self {
            families,
            concepts,
            key_points,
            by_id,
        })
    }

    /// Serializes back to the definition format.
    pub fn to_toml(&self) -> String {
        let doc = CatalogDoc {
            family: self
                .families
                .iter()
                .map(|f| FamilyDoc {
                    id: f.id.clone(),
                    name: f.name.clone(),
                    name_fr: f.name_fr.clone(),
                    color: f.color.as_str().to_owned(),
                    course_index: f.course_index,
                    expected_size: self.family_size(&f.id),
                })
                .collect(),
            concept: self.concepts.clone(),
            key_point: self.key_points.clone(),
        };
        toml::to_string(&doc).expect("catalog is always serializable")
    }

    /// Families in course order.
    pub fn families(&self) -> &[ConceptFamily] {
        &self.families
    }

    /// All concepts, grouped by family in course order, then by ordinal.
    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn key_points(&self) -> &[KeyPoint] {
        &self.key_points
    }

    pub fn key_point(&self, kind: KeyPointKind) -> &KeyPoint {
        self.key_points
            .iter()
            .find(|k| k.kind == kind)
            .expect("catalog holds all three key points")
    }

    pub fn family(&self, id: &FamilyId) -> Option<&ConceptFamily> {
        self.families.iter().find(|f| &f.id == id)
    }

    pub fn family_by_color(&self, color: Color) -> &ConceptFamily {
        self.families
            .iter()
            .find(|f| f.color == color)
            .expect("catalog has one family per color")
    }

    pub fn concept(&self, id: &ConceptId) -> Option<&Concept> {
        self.by_id.get(id).map(|&i| &self.concepts[i])
    }

    pub fn contains(&self, id: &ConceptId) -> bool {
        self.by_id.contains_key(id)
    }

    /// Concepts of one family in ordinal order.
    pub fn concepts_of(&self, family: &FamilyId) -> Result<Vec<&Concept>, CatalogError> {
        if self.family(family).is_none() {
            return Err(CatalogError::UnknownFamily(family.0.clone()));
        }
        Ok(self.concepts.iter().filter(|c| &c.family == family).collect())
    }

    pub fn family_size(&self, family: &FamilyId) -> usize {
        self.concepts.iter().filter(|c| &c.family == family).count()
    }

    pub fn color_of(&self, concept: &ConceptId) -> Option<Color> {
        let c = self.concept(concept)?;
        self.family(&c.family).map(|f| f.color)
    }

    /// The concept after `id` in legend order, wrapping within its family.
    pub fn next_in_family(&self, id: &ConceptId) -> Option<&ConceptId> {
        let c = self.concept(id)?;
        let members = self.concepts_of(&c.family).ok()?;
        let pos = members.iter().position(|m| &m.id == id)?;
        Some(&members[(pos + 1) % members.len()].id)
    }
}
