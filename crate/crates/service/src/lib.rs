//! Authoritative session server for networked JADE games.
//!
//! The server owns the game state. Clients send intents ([`ClientMessage`])
//! and receive sequenced envelopes ([`SessionEnvelope`]); every session is
//! appended to an NDJSON file and restored from it after a restart.

pub mod feedback;
pub mod manager;
pub mod protocol;
pub mod server;
pub mod session;
pub mod store;

pub use feedback::{Answer, DebriefRecord, QuestionnaireResponse};
pub use manager::{SessionHandle, SessionManager};
pub use protocol::{
    Action, ClientMessage, CreateSession, ErrorCode, Rejection, Role, ServerMessage, SessionCreated,
    SessionEnvelope, SessionStatus, Snapshot, PROTOCOL_VERSION,
};
pub use server::{handle_message, router, serve, serve_on};
pub use session::Session;
