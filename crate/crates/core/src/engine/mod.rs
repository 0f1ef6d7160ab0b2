//! The event-sourced turn state machine.
//!
//! Every accepted operation appends one or more [`GameEvent`]s to the state's
//! log; [`replay`] rebuilds an identical state from that log. Operations either
//! succeed or leave the state untouched.

mod first_team;
mod replay;
mod rng;
mod state;
mod types;

use std::sync::Arc;

use thiserror::Error;

use crate::board::{Board, BoxId};
use crate::bundled::DataSet;
use crate::catalog::{Catalog, ConceptId};
use crate::content::SoftwareBoard;

pub use first_team::{ResolutionInput, Throw};
pub use replay::{replay, ReplayError};
pub use rng::{derive_seed, DiceRng};
pub use state::{GameState, GameStatus, TurnState};
pub use types::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("operation not allowed in phase {actual} (expected {expected})")]
    WrongPhase { expected: &'static str, actual: Phase },
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error("board does not validate: {0}")]
    InvalidBoard(String),
    #[error("a game needs 2 to 4 teams, got {0}")]
    TeamCount(usize),
    #[error("unknown team `{0}`")]
    UnknownTeam(TeamId),
    #[error("die value {0} is outside 1..=6")]
    DiceOutOfRange(u8),
    #[error("missing player metadata: {0}")]
    MissingMetadata(String),
    #[error("missing tie-break input: {0}")]
    MissingResolutionInput(&'static str),
    #[error("invalid tie-break input: {0}")]
    InvalidResolutionInput(String),
    #[error("tie is not resolved: {0}")]
    UnresolvedTie(String),
    #[error("box {0} is not one of the offered destinations")]
    DestinationNotOffered(BoxId),
    #[error("concept `{0}` cannot be claimed here")]
    ConceptNotClaimable(ConceptId),
    #[error("claim rejected: {0}")]
    ClaimRejected(String),
    #[error("verdict rejected: {0}")]
    VerdictRejected(String),
    #[error("the gamification die is disabled for this game")]
    GamificationDisabled,
    #[error("the gamification die must be rolled before claiming")]
    GamificationPending,
    #[error("the gamification die was already rolled this turn")]
    GamificationAlreadyRolled,
}

/// Immutable inputs a game refers to: catalog, board and software boards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameContext {
    pub catalog: Arc<Catalog>,
    pub board: Arc<Board>,
    pub software: Arc<Vec<SoftwareBoard>>,
}

impl GameContext {
    pub fn new(catalog: Catalog, board: Board, software: Vec<SoftwareBoard>) -> Self {
        Self {
            catalog: Arc::new(catalog),
            board: Arc::new(board),
            software: Arc::new(software),
        }
    }

    /// Context for `board_id` drawn from a data set.
    pub fn from_data(data: &DataSet, board_id: &str) -> Option<Self> {
        let board = data.board(board_id)?.clone();
        Some(Self::new(data.catalog.clone(), board, data.software.clone()))
    }

    pub fn software_board(&self, id: &str) -> Option<&SoftwareBoard> {
        self.software.iter().find(|b| b.id == id)
    }
}
