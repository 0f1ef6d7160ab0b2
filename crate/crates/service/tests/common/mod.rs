#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use jade_core::board::BoxKind;
use jade_core::bundled::DataSet;
use jade_core::engine::*;
use jade_core::sim::default_teams;
use jade_service::protocol::SessionCreated;
use jade_service::*;

pub const NOW: u64 = 1_700_000_000_000;

pub fn request(board: &str, seed: u64, teams: usize) -> CreateSession {
    let mut config = GameConfig::new(board, vec!["toy-notes".into(), "city-library".into(), "bike-share".into()]);
    config.first_team_method = FirstTeamMethod::Fixed("A".into());
    config.end_condition = EndCondition::RoundLimit(6);
    config.rng_seed = seed;
    CreateSession {
        config,
        teams: default_teams(teams),
    }
}

pub fn fixed_clock() -> Arc<AtomicU64> {
    Arc::new(AtomicU64::new(NOW))
}

pub fn manager_with(dir: Option<PathBuf>, clock: Arc<AtomicU64>) -> SessionManager {
    SessionManager::new(DataSet::bundled(), dir).with_clock(Arc::new(move || clock.load(Ordering::SeqCst)))
}

pub fn manager(dir: Option<PathBuf>) -> SessionManager {
    manager_with(dir, fixed_clock())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Who {
    Active,
    Opponent,
    Master,
}

/// Seat token for the first player of `team`.
pub fn seat_of<'a>(created: &'a SessionCreated, team: &TeamId) -> &'a str {
    &created.seats.iter().find(|s| s.team == *team).expect("team has a seat").token
}

pub fn token_for<'a>(created: &'a SessionCreated, game: &GameState, who: Who) -> &'a str {
    let active = game.active_team().id.clone();
    match who {
        Who::Active => seat_of(created, &active),
        Who::Opponent => {
            let other = game.teams().iter().find(|t| t.id != active).expect("two teams").id.clone();
            seat_of(created, &other)
        }
        Who::Master => &created.game_master_token,
    }
}

/// A claim anchored on a compatible software board for the turn's concept.
pub fn claim_for(game: &GameState, kind: ClaimKind) -> Claim {
    let variant = game.context().board.variant();
    let sb = game
        .config()
        .software_boards
        .iter()
        .filter_map(|id| game.context().software_board(id))
        .find(|sb| sb.is_compatible(variant))
        .expect("a compatible software board");
    let screen = &sb.screens[0];
    Claim {
        concept: game.turn().concept.clone().expect("concept fixed"),
        software_board: sb.id.clone(),
        screen: screen.id.clone(),
        region: screen.regions.first().map(|r| r.id.clone()),
        kind,
        rationale: "the layout hides the main action".into(),
        solution: (kind == ClaimKind::Violation).then(|| "move it up".into()),
        third_point: None,
    }
}

/// Deterministic script: the next action and who sends it, varied by the
/// step counter `n`. `None` once the game is over.
pub fn next_step(game: &GameState, n: usize) -> Option<(Who, Action)> {
    let turn = game.turn();
    let step = match game.phase() {
        Phase::Ended => return None,
        Phase::AwaitFirstTeam => (Who::Master, Action::FirstTeam {
            dice: 1,
            input: Default::default(),
        }),
        Phase::AwaitRoll => (Who::Active, Action::Roll),
        Phase::AwaitDestination => {
            let board = &game.context().board;
            let offered: Vec<_> = turn.offered.iter().copied().collect();
            let pick = offered
                .iter()
                .copied()
                .find(|b| n.is_multiple_of(3) && matches!(board.kind(*b), Some(BoxKind::Special(_))))
                .unwrap_or(offered[n % offered.len()]);
            (Who::Active, Action::Move { destination: pick })
        }
        Phase::AwaitConcept => {
            let options: Vec<_> = game.claimable_concepts().into_iter().collect();
            (Who::Active, Action::ChooseConcept {
                concept: options[n % options.len()].clone(),
            })
        }
        Phase::AwaitClaim => {
            let kind = if n.is_multiple_of(2) {
                ClaimKind::Violation
            } else {
                ClaimKind::CorrectApplication
            };
            (Who::Active, Action::Claim {
                claim: claim_for(game, kind),
            })
        }
        Phase::AwaitVerdict => {
            let violation = game
                .events()
                .iter()
                .rev()
                .find_map(|e| match &e.body {
                    EventBody::ClaimSubmitted { claim, .. } => Some(claim.kind == ClaimKind::Violation),
                    _ => None,
                })
                .unwrap_or(false);
            let verdict = match n % 5 {
                0 => Verdict::escalate(),
                1 | 2 if violation => Verdict::accept_all(),
                1 | 2 => Verdict {
                    point1_accepted: true,
                    ..Verdict::default()
                },
                _ => Verdict::default(),
            };
            (Who::Opponent, Action::Verdict { verdict })
        }
        Phase::AwaitRuling => {
            let awarded_to = game.teams()[n % game.teams().len()].id.clone();
            (Who::Master, Action::Ruling {
                awarded_to,
                note: "ruled".into(),
            })
        }
        Phase::AwaitKeyPoint => (Who::Master, Action::KeyPoint { passed: n.is_multiple_of(2) }),
    };
    Some(step)
}

/// Applies an action straight to the engine, bypassing the service.
pub fn apply_direct(game: &mut GameState, action: &Action) {
    match action.clone() {
        Action::FirstTeam { dice, input } => game.determine_first_team(dice, input).unwrap(),
        Action::Roll => {
            game.take_roll().unwrap();
        }
        Action::Move { destination } => game.move_pawn(destination).unwrap(),
        Action::ChooseConcept { concept } => game.choose_concept(concept).unwrap(),
        Action::Gamification { roll: Some(r) } => game.apply_gamification_roll(r).unwrap(),
        Action::Gamification { roll: None } => {
            game.roll_gamification().unwrap();
        }
        Action::Claim { claim } => game.submit_claim(claim).unwrap(),
        Action::Verdict { verdict } => game.submit_verdict(verdict).unwrap(),
        Action::Ruling { awarded_to, note } => game
            .referee_ruling(RefereeRuling {
                pair_awarded_to: awarded_to,
                note,
            })
            .unwrap(),
        Action::KeyPoint { passed } => game.resolve_key_point(passed).unwrap(),
        Action::EndCheck => {
            game.end_and_score();
        }
        Action::Start | Action::Vote { .. } => panic!("not an engine action"),
    }
}

pub fn join_all(m: &SessionManager, created: &SessionCreated) {
    for s in &created.seats {
        m.join(&created.session_id, &s.token, "", false).unwrap();
    }
    m.join(&created.session_id, &created.game_master_token, "", false).unwrap();
}

/// Creates, joins everyone and starts a session.
pub fn started(m: &SessionManager, req: CreateSession) -> SessionCreated {
    let created = m.create(req).unwrap();
    join_all(m, &created);
    m.act(&created.session_id, &created.seats[0].token, Action::Start).unwrap();
    created
}

/// Plays up to `limit` scripted steps through the manager. Returns the
/// number of steps taken.
pub fn play(m: &SessionManager, created: &SessionCreated, from: usize, limit: usize) -> usize {
    let id = &created.session_id;
    let h = m.get(id).unwrap();
    for n in from..from + limit {
        let step = {
            let s = h.lock();
            next_step(s.game(), n).map(|(who, a)| (token_for(created, s.game(), who).to_owned(), a))
        };
        let Some((token, action)) = step else {
            return n - from;
        };
        m.act(id, &token, action).unwrap();
    }
    limit
}

pub fn sheets(game: &GameState) -> Vec<ScoreSheetDoc> {
    game.teams()
        .iter()
        .map(|t| game.export_score_sheet(&t.id).unwrap())
        .collect()
}
