//! Rebuilding a game from its event log.
//!
//! Command events (rolls, choices, claims, verdicts...) are fed back through
//! the public operations; consequence events (`SpecialTriggered`,
//! `TurnSkipped`, `TurnEnded`, and usually `GameEnded`) must then reappear
//! exactly as logged.

use thiserror::Error;

use super::state::GameState;
use super::types::{EventBody, FirstTeamChoice, GameEvent, RefereeRuling};
use super::{EngineError, GameContext};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("the log is empty")]
    Empty,
    #[error("the log must start with GameCreated")]
    MissingGameCreated,
    #[error("sequence gap: expected seq {expected}, found {found}")]
    SeqGap { expected: u64, found: u64 },
    #[error("log was produced on board `{logged}` but `{supplied}` was supplied")]
    BoardMismatch { logged: String, supplied: String },
    #[error("event {seq} ({kind}) cannot be issued as a command")]
    Unexpected { seq: u64, kind: &'static str },
    #[error("event {seq} is illegal: {error}")]
    Illegal { seq: u64, error: EngineError },
    #[error("event {seq} differs from the replayed game")]
    Divergence { seq: u64 },
}

/// Replays `events` against `ctx`. A truncated log yields the state right
/// after the last logged command.
pub fn replay(events: &[GameEvent], ctx: GameContext) -> Result<GameState, ReplayError> {
    let first = events.first().ok_or(ReplayError::Empty)?;
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 {
            return Err(ReplayError::SeqGap {
                expected: i as u64,
                found: e.seq,
            });
        }
    }
    let EventBody::GameCreated { config, teams, .. } = &first.body else {
        return Err(ReplayError::MissingGameCreated);
    };
    if config.board != ctx.board.id() {
        return Err(ReplayError::BoardMismatch {
            logged: config.board.clone(),
            supplied: ctx.board.id().to_owned(),
        });
    }
    let mut state = GameState::new_at(config.clone(), teams.clone(), ctx, first.timestamp_ms)
        .map_err(|error| ReplayError::Illegal { seq: 0, error })?;
    check(&state, events, 0)?;

    while state.events().len() < events.len() {
        let at = state.events().len();
        let e = &events[at];
        state.set_clock(e.timestamp_ms);
        let illegal = |error| ReplayError::Illegal { seq: e.seq, error };
        match &e.body {
            EventBody::FirstTeamChosen {
                choice: FirstTeamChoice::Dice { dice, input },
                ..
            } => state.determine_first_team(*dice, input.clone()).map_err(illegal)?,
            EventBody::DiceRolled { .. } => {
                state.take_roll().map_err(illegal)?;
            }
            EventBody::DestinationChosen { destination, .. } => {
                state.move_pawn(*destination).map_err(illegal)?
            }
            EventBody::ConceptChosen { concept, .. } | EventBody::ConceptImposed { concept, .. } => {
                state.choose_concept(concept.clone()).map_err(illegal)?
            }
            EventBody::ClaimSubmitted { claim, .. } => state.submit_claim(claim.clone()).map_err(illegal)?,
            EventBody::VerdictGiven { verdict, .. } => state.submit_verdict(*verdict).map_err(illegal)?,
            EventBody::RefereeRuled { awarded_to, note, .. } => state
                .referee_ruling(RefereeRuling {
                    pair_awarded_to: awarded_to.clone(),
                    note: note.clone(),
                })
                .map_err(illegal)?,
            EventBody::KeyPointResolved { passed, .. } => state.resolve_key_point(*passed).map_err(illegal)?,
            EventBody::GamificationRolled { roll, from_rng, .. } => {
                if *from_rng {
                    state.roll_gamification().map_err(illegal)?;
                } else {
                    state.apply_gamification_roll(*roll).map_err(illegal)?;
                }
            }
            EventBody::GameEnded { .. } => {
                state.end_and_score();
            }
            other => {
                return Err(ReplayError::Unexpected {
                    seq: e.seq,
                    kind: other.kind(),
                })
            }
        }
        if state.events().len() == at {
            return Err(ReplayError::Divergence { seq: e.seq });
        }
        check(&state, events, at)?;
    }
    Ok(state)
}

fn check(state: &GameState, events: &[GameEvent], from: usize) -> Result<(), ReplayError> {
    let produced = state.events();
    let end = produced.len().min(events.len());
    for i in from..end {
        if produced[i] != events[i] {
            return Err(ReplayError::Divergence { seq: i as u64 });
        }
    }
    Ok(())
}
