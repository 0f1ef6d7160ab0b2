#![allow(dead_code)]

use jade_core::board::{BoxId, BoxKind};
use jade_core::bundled::DataSet;
use jade_core::engine::*;
use jade_core::sim::default_teams;

pub fn ctx(board: &str) -> GameContext {
    GameContext::from_data(&DataSet::bundled(), board).expect("bundled board")
}

/// Team A starts; the round limit is out of reach of short scripts.
pub fn config(board: &str) -> GameConfig {
    let mut c = GameConfig::new(board, vec!["toy-notes".into(), "city-library".into(), "bike-share".into()]);
    c.first_team_method = FirstTeamMethod::Fixed("A".into());
    c.end_condition = EndCondition::RoundLimit(500);
    c
}

pub fn new_game(cfg: GameConfig) -> GameState {
    let board = cfg.board.clone();
    GameState::new(cfg, default_teams(2), ctx(&board)).expect("valid game")
}

pub fn team(id: &str) -> TeamId {
    id.into()
}

pub fn total(state: &GameState, id: &str) -> i64 {
    state.team(&team(id)).unwrap().sheet.total()
}

/// A claim anchored on a compatible software board for the turn's concept.
pub fn claim(state: &GameState, kind: ClaimKind) -> Claim {
    let variant = state.context().board.variant();
    let sb = state
        .config()
        .software_boards
        .iter()
        .filter_map(|id| state.context().software_board(id))
        .find(|sb| sb.is_compatible(variant))
        .expect("a compatible software board");
    let screen = &sb.screens[0];
    Claim {
        concept: state.turn().concept.clone().expect("concept fixed"),
        software_board: sb.id.clone(),
        screen: screen.id.clone(),
        region: screen.regions.first().map(|r| r.id.clone()),
        kind,
        rationale: "the element breaks the rule".into(),
        solution: (kind == ClaimKind::Violation).then(|| "change it".into()),
        third_point: None,
    }
}

/// Plays the rest of the current turn with fixed, harmless choices: first
/// claimable concept, a correct-application claim, everything rejected.
pub fn finish_turn(state: &mut GameState) {
    let team = state.active_index();
    let turns = state.turns_completed();
    while !state.is_ended() && state.turns_completed() == turns && state.active_index() == team {
        match state.phase() {
            Phase::AwaitConcept => {
                let c = state.claimable_concepts().into_iter().next().unwrap();
                state.choose_concept(c).unwrap();
            }
            Phase::AwaitClaim if state.turn().gamification_due => {
                state.apply_gamification_roll(4).unwrap();
            }
            Phase::AwaitClaim => {
                let c = claim(state, ClaimKind::CorrectApplication);
                state.submit_claim(c).unwrap();
            }
            Phase::AwaitVerdict => state.submit_verdict(Verdict::default()).unwrap(),
            Phase::AwaitRuling => {
                let id = state.active_team().id.clone();
                state
                    .referee_ruling(RefereeRuling {
                        pair_awarded_to: id,
                        note: String::new(),
                    })
                    .unwrap();
            }
            Phase::AwaitKeyPoint => state.resolve_key_point(true).unwrap(),
            Phase::AwaitRoll => {
                state.take_roll().unwrap();
            }
            Phase::AwaitDestination => {
                let d = harmless(state);
                state.move_pawn(d).unwrap();
            }
            Phase::AwaitFirstTeam | Phase::Ended => break,
        }
    }
}

fn harmless(state: &GameState) -> BoxId {
    let board = &state.context().board;
    let offered = &state.turn().offered;
    offered
        .iter()
        .copied()
        .find(|b| !matches!(board.kind(*b), Some(BoxKind::Special(_))))
        .unwrap_or_else(|| *offered.iter().next().unwrap())
}

/// Plays turns until the active team is offered a box matching `want`, then
/// moves there. Returns the box.
pub fn drive_to(state: &mut GameState, want: impl Fn(&BoxKind) -> bool) -> BoxId {
    for _ in 0..500 {
        assert_eq!(state.phase(), Phase::AwaitRoll, "drive_to starts at a roll");
        state.take_roll().unwrap();
        let board = state.context().board.clone();
        let hit = state
            .turn()
            .offered
            .iter()
            .copied()
            .find(|b| board.kind(*b).is_some_and(&want));
        match hit {
            Some(b) => {
                state.move_pawn(b).unwrap();
                return b;
            }
            None => {
                let d = harmless(state);
                state.move_pawn(d).unwrap();
                finish_turn(state);
                while state.phase() == Phase::AwaitKeyPoint {
                    state.resolve_key_point(true).unwrap();
                }
            }
        }
    }
    panic!("no matching box offered in 500 turns");
}

pub fn is_special(effect: jade_core::board::SpecialEffect) -> impl Fn(&BoxKind) -> bool {
    move |k| matches!(k, BoxKind::Special(e) if *e == effect)
}

pub fn is_concept(k: &BoxKind) -> bool {
    matches!(k, BoxKind::Concept(_))
}

pub fn is_color(k: &BoxKind) -> bool {
    matches!(k, BoxKind::Color(_))
}

/// Searches seeds until team A's first roll offers a box matching `want`,
/// then moves there.
pub fn first_roll_to(cfg: &GameConfig, want: impl Fn(&BoxKind) -> bool) -> GameState {
    for seed in 0..10_000 {
        let mut c = cfg.clone();
        c.rng_seed = seed;
        let mut s = new_game(c);
        s.take_roll().unwrap();
        let board = s.context().board.clone();
        let hit = s.turn().offered.iter().copied().find(|b| board.kind(*b).is_some_and(&want));
        if let Some(b) = hit {
            s.move_pawn(b).unwrap();
            return s;
        }
    }
    panic!("no seed offers a matching box on the first roll");
}
