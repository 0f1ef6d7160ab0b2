//! Wire protocol: JSON messages, one per WebSocket text frame (or one per
//! line when carried over a byte stream). Client messages and server messages
//! are both tagged by `type`; actions are tagged by `op`.

use std::collections::BTreeMap;

use jade_core::board::{BoxId, Variant};
use jade_core::catalog::{ConceptId, KeyPointKind};
use jade_core::engine::{
    Claim, Direction, GameConfig, GameEvent, PendingEffect, Phase, ResolutionInput, ScoreSheetDoc, TeamId,
    TeamSetup, TurnState, Verdict,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::feedback::{DebriefRecord, QuestionnaireResponse};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "role")]
pub enum Role {
    Player { team: TeamId, seat: usize },
    GameMaster,
}

impl Role {
    /// Connection identity used as the envelope actor.
    pub fn actor(&self) -> String {
        match self {
            Role::Player { seat, .. } => format!("seat-{seat}"),
            Role::GameMaster => "game-master".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum Action {
    /// Leaves the lobby; play actions are refused before it.
    Start,
    FirstTeam {
        dice: u8,
        #[serde(default)]
        input: ResolutionInput,
    },
    Roll,
    Move {
        destination: BoxId,
    },
    ChooseConcept {
        concept: ConceptId,
    },
    /// Without `roll` the server throws the gamification die.
    Gamification {
        #[serde(default)]
        roll: Option<u8>,
    },
    Claim {
        claim: Claim,
    },
    Verdict {
        verdict: Verdict,
    },
    Ruling {
        awarded_to: TeamId,
        #[serde(default)]
        note: String,
    },
    /// Dispute resolution when no game master has joined.
    Vote {
        team: TeamId,
    },
    KeyPoint {
        passed: bool,
    },
    /// Lets the server end a game whose deadline has passed.
    EndCheck,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Start => "start",
            Action::FirstTeam { .. } => "first_team",
            Action::Roll => "roll",
            Action::Move { .. } => "move",
            Action::ChooseConcept { .. } => "choose_concept",
            Action::Gamification { .. } => "gamification",
            Action::Claim { .. } => "claim",
            Action::Verdict { .. } => "verdict",
            Action::Ruling { .. } => "ruling",
            Action::Vote { .. } => "vote",
            Action::KeyPoint { .. } => "key_point",
            Action::EndCheck => "end_check",
        }
    }
}

pub const ACTION_OPS: [&str; 12] = [
    "start",
    "first_team",
    "roll",
    "move",
    "choose_concept",
    "gamification",
    "claim",
    "verdict",
    "ruling",
    "vote",
    "key_point",
    "end_check",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ClientMessage {
    Hello {
        protocol_version: u32,
        token: String,
        #[serde(default)]
        display_name: String,
        /// Re-attach to an already claimed seat (reconnect, server restart).
        #[serde(default)]
        resume: bool,
    },
    Action {
        #[serde(default)]
        id: Option<u64>,
        action: Action,
    },
    Questionnaire {
        #[serde(default)]
        id: Option<u64>,
        response: QuestionnaireResponse,
    },
    Debrief {
        #[serde(default)]
        id: Option<u64>,
        record: DebriefRecord,
    },
    Snapshot {
        #[serde(default)]
        id: Option<u64>,
    },
}

pub const CLIENT_TYPES: [&str; 5] = ["hello", "action", "questionnaire", "debrief", "snapshot"];

impl ClientMessage {
    /// Parses a client message, telling unknown kinds apart from malformed
    /// ones.
    pub fn parse(text: &str) -> Result<Self, Rejection> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Rejection::new(ErrorCode::Malformed, format!("not JSON: {e}")))?;
        let ty = value.get("type").and_then(Value::as_str).unwrap_or_default();
        if !CLIENT_TYPES.contains(&ty) {
            return Err(Rejection::new(ErrorCode::UnknownKind, format!("unknown message type `{ty}`")));
        }
        if ty == "action" {
            let op = value
                .get("action")
                .and_then(|a| a.get("op"))
                .and_then(Value::as_str)
                .unwrap_or_default();
            if !ACTION_OPS.contains(&op) {
                return Err(Rejection::new(ErrorCode::UnknownKind, format!("unknown action `{op}`")));
            }
        }
        serde_json::from_value(value).map_err(|e| Rejection::new(ErrorCode::Malformed, e.to_string()))
    }

    pub fn id(&self) -> Option<u64> {
        match self {
            ClientMessage::Hello { .. } => None,
            ClientMessage::Action { id, .. }
            | ClientMessage::Questionnaire { id, .. }
            | ClientMessage::Debrief { id, .. }
            | ClientMessage::Snapshot { id } => *id,
        }
    }
}

/// Envelope kinds: `joined`, `started`, `event` (payload: a game event),
/// `vote`, `questionnaire`, `debrief`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnvelope {
    pub session_id: String,
    pub seq: u64,
    pub actor: String,
    pub kind: String,
    pub payload: Value,
}

impl SessionEnvelope {
    pub fn event(&self) -> Option<GameEvent> {
        if self.kind == "event" {
            serde_json::from_value(self.payload.clone()).ok()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnknownKind,
    ProtocolVersion,
    NotFound,
    BadToken,
    TokenClaimed,
    NotJoined,
    SessionEnded,
    WrongActor,
    IllegalPhase,
    Invalid,
    Storage,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::Malformed | ErrorCode::UnknownKind | ErrorCode::Invalid | ErrorCode::ProtocolVersion => 400,
            ErrorCode::BadToken | ErrorCode::NotJoined => 401,
            ErrorCode::WrongActor => 403,
            ErrorCode::NotFound => 404,
            ErrorCode::TokenClaimed | ErrorCode::IllegalPhase | ErrorCode::SessionEnded => 409,
            ErrorCode::Storage => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code:?}: {message}")]
pub struct Rejection {
    pub code: ErrorCode,
    pub message: String,
}

impl Rejection {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ServerMessage {
    Welcome {
        protocol_version: u32,
        session_id: String,
        actor: String,
        role: Role,
        snapshot: Box<Snapshot>,
    },
    Envelope {
        envelope: SessionEnvelope,
    },
    /// The request was applied; its envelopes carry seqs `first..=last`
    /// (none when `first > last`).
    Ack {
        id: Option<u64>,
        first: u64,
        last: u64,
    },
    Rejected {
        id: Option<u64>,
        code: ErrorCode,
        message: String,
    },
    Snapshot {
        id: Option<u64>,
        snapshot: Box<Snapshot>,
    },
    /// Sent when a slow connection missed envelopes: start over from here.
    Resync {
        snapshot: Box<Snapshot>,
    },
}

impl ServerMessage {
    pub fn rejected(id: Option<u64>, r: Rejection) -> Self {
        ServerMessage::Rejected {
            id,
            code: r.code,
            message: r.message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Lobby,
    Playing,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatView {
    pub seat: usize,
    pub team: TeamId,
    pub player: String,
    pub claimed_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamView {
    pub id: TeamId,
    pub name: String,
    pub pawn: BoxId,
    pub sheet: ScoreSheetDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameView {
    pub board: String,
    pub variant: Variant,
    pub phase: Phase,
    pub direction: Direction,
    pub active_team: Option<TeamId>,
    pub round: u32,
    pub turns_completed: u32,
    pub teams: Vec<TeamView>,
    pub turn: TurnState,
    pub pending: Vec<PendingEffect>,
    pub claimable_concepts: Vec<ConceptId>,
    pub key_point: Option<KeyPointKind>,
    pub rng_state: u64,
    pub events: usize,
}

/// Everything a client needs to render the session from scratch. Contains no
/// tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    pub status: SessionStatus,
    pub read_only: bool,
    /// Seq the next envelope will carry.
    pub next_seq: u64,
    pub config: GameConfig,
    pub game: GameView,
    pub seats: Vec<SeatView>,
    pub game_master: Option<String>,
    pub votes: BTreeMap<TeamId, TeamId>,
    pub questionnaires: usize,
    pub debrief_recorded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub config: GameConfig,
    pub teams: Vec<TeamSetup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatToken {
    pub seat: usize,
    pub team: TeamId,
    pub player: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub seats: Vec<SeatToken>,
    pub game_master_token: String,
}
