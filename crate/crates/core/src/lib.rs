//! Core of the JADE software-ergonomics board game: concept catalog, game
//! boards, software boards, the turn engine and a headless simulator.

pub mod board;
pub mod bundled;
pub mod catalog;
pub mod content;
pub mod engine;
pub mod sim;

pub use board::{legal_destinations, validate_board, Board, BoxId, BoxKind, SpecialEffect, Variant};
pub use bundled::DataSet;
pub use catalog::{Catalog, Color, Concept, ConceptId, FamilyId, KeyPointKind};
pub use content::SoftwareBoard;
pub use engine::{GameConfig, GameContext, GameEvent, GameState};
