//! Software boards: the digitized applications players evaluate.
//!
//! A descriptor lists the main screens, the annotated transitions between them,
//! the rectangles players may point at in a claim, the board variants it suits
//! and an optional QR-linked video or live application.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::board::Variant;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContentError {
    #[error("cannot parse software board: {0}")]
    Parse(String),
    #[error("{board}: transition {from} -> {to} references an unknown screen")]
    DanglingTransition { board: String, from: String, to: String },
    #[error("{0}: compatible_variants is empty")]
    NoCompatibleVariant(String),
    #[error("{board}: malformed media url `{url}`")]
    MalformedUrl { board: String, url: String },
    #[error("{board}: qr payload `{payload}` differs from url `{url}`")]
    QrMismatch { board: String, url: String, payload: String },
    #[error("{board}: duplicate screen id `{screen}`")]
    DuplicateScreen { board: String, screen: String },
    #[error("{board}: duplicate region `{region}` on screen `{screen}`")]
    DuplicateRegion { board: String, screen: String, region: String },
    #[error("{board}: region `{region}` lies outside screen `{screen}`")]
    RegionOutOfBounds { board: String, screen: String, region: String },
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Video,
    LiveApp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaLink {
    pub kind: MediaKind,
    pub url: String,
    pub qr_payload: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    #[serde(flatten)]
    pub rect: Rect,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    pub id: String,
    pub image: String,
    pub width: u32,
    pub height: u32,
    #[serde(rename = "region", default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<Region>,
}

impl Screen {
    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftwareBoard {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub compatible_variants: BTreeSet<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<MediaLink>,
    #[serde(rename = "screen", default)]
    pub screens: Vec<Screen>,
    #[serde(rename = "transition", default, skip_serializing_if = "Vec::is_empty")]
    pub transitions: Vec<Transition>,
}

impl SoftwareBoard {
    pub fn screen(&self, id: &str) -> Option<&Screen> {
        self.screens.iter().find(|s| s.id == id)
    }

    /// Whether a game on `variant` may use this board. A multicolored game
    /// accepts every board.
    pub fn is_compatible(&self, variant: Variant) -> bool {
        variant == Variant::Multicolored || self.compatible_variants.contains(&variant)
    }

    /// `true` when `(screen, region)` names something on this board; a
    /// missing region means the whole screen.
    pub fn resolves(&self, screen: &str, region: Option<&str>) -> bool {
        match (self.screen(screen), region) {
            (Some(_), None) => true,
            (Some(s), Some(r)) => s.region(r).is_some(),
            (None, _) => false,
        }
    }

    pub fn validate(&self) -> Result<(), ContentError> {
        let board = || self.id.clone();
        if self.compatible_variants.is_empty() {
            return Err(ContentError::NoCompatibleVariant(board()));
        }
        let mut screens = BTreeSet::new();
        for s in &self.screens {
            if !screens.insert(s.id.as_str()) {
                return Err(ContentError::DuplicateScreen { board: board(), screen: s.id.clone() });
            }
            let mut regions = BTreeSet::new();
            for r in &s.regions {
                if !regions.insert(r.id.as_str()) {
                    return Err(ContentError::DuplicateRegion {
                        board: board(),
                        screen: s.id.clone(),
                        region: r.id.clone(),
                    });
                }
                let inside = r.rect.width > 0
                    && r.rect.height > 0
                    && u64::from(r.rect.x) + u64::from(r.rect.width) <= u64::from(s.width)
                    && u64::from(r.rect.y) + u64::from(r.rect.height) <= u64::from(s.height);
                if !inside {
                    return Err(ContentError::RegionOutOfBounds {
                        board: board(),
                        screen: s.id.clone(),
                        region: r.id.clone(),
                    });
                }
            }
        }
        for t in &self.transitions {
            if !screens.contains(t.from.as_str()) || !screens.contains(t.to.as_str()) {
                return Err(ContentError::DanglingTransition {
                    board: board(),
                    from: t.from.clone(),
                    to: t.to.clone(),
                });
            }
        }
        if let Some(m) = &self.media {
            let valid = Url::parse(&m.url)
                .map(|u| u.has_host() && matches!(u.scheme(), "http" | "https"))
                .unwrap_or(false);
            if !valid {
                return Err(ContentError::MalformedUrl { board: board(), url: m.url.clone() });
            }
            if m.qr_payload != m.url {
                return Err(ContentError::QrMismatch {
                    board: board(),
                    url: m.url.clone(),
                    payload: m.qr_payload.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("software board is always serializable")
    }
}

/// Parses and validates a software-board descriptor.
pub fn load_software_board(source: &str) -> Result<SoftwareBoard, ContentError> {
    let board: SoftwareBoard = toml::from_str(source).map_err(|e| {
        let msg = e.message();
        if msg.contains("unknown variant") {
            ContentError::UnknownVariant(msg.to_owned())
        } else {
            ContentError::Parse(msg.to_owned())
        }
    })?;
    board.validate()?;
    Ok(board)
}

pub fn compatible_with(library: &[SoftwareBoard], variant: Variant) -> Vec<&SoftwareBoard> {
    library.iter().filter(|b| b.is_compatible(variant)).collect()
}

pub fn resolve_media(board: &SoftwareBoard) -> Option<&MediaLink> {
    board.media.as_ref()
}
