//! Acceptance suite: one PASS/FAIL line per criterion, each held to its time
//! limit. Runs as a plain binary (`harness = false`).

#[path = "../../service/tests/common/mod.rs"]
mod script;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures::{SinkExt, StreamExt};
use jade_core::board::{legal_destinations, validate_board, Board, BoxId, BoxKind, SpecialEffect};
use jade_core::bundled::DataSet;
use jade_core::catalog::{Color, ConceptId};
use jade_core::engine::*;
use jade_core::sim::{default_teams, play_game, simulate, AgentKind, AgentPolicy};
use jade_service::*;
use script::{apply_direct, next_step, token_for, NOW};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, u64, Check); 9] = [
        ("catalog counts", 1, catalog_counts),
        ("board structure", 1, board_structure),
        ("movement oracle", 5, movement_oracle),
        ("referee worked example", 1, referee_example),
        ("scoring matrix", 1, scoring_matrix),
        ("determinism and replay", 60, determinism_replay),
        ("special effects", 30, special_effects),
        ("protocol equivalence and restore", 10, protocol_equivalence),
        ("simulation coverage", 120, simulation_coverage),
    ];
    let mut failures = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(limit) => {
                Err(format!("{detail}; took {:.2}s, limit {limit}s", elapsed.as_secs_f64()))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({:.2}s < {limit}s): {detail}", elapsed.as_secs_f64()),
            Err(why) => {
                failures += 1;
                println!("FAIL {name} ({:.2}s, limit {limit}s): {why}", elapsed.as_secs_f64());
            }
        }
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const SOFTWARE: [&str; 3] = ["toy-notes", "city-library", "bike-share"];
const BOARDS: [&str; 7] = ["lime", "purple", "orange", "yellow", "emerald", "blue", "multicolored"];

fn ctx(board: &str) -> GameContext {
    GameContext::from_data(&DataSet::bundled(), board).expect("bundled board")
}

fn config(board: &str) -> GameConfig {
    let mut c = GameConfig::new(board, SOFTWARE.iter().map(|s| s.to_string()).collect());
    c.first_team_method = FirstTeamMethod::Fixed("A".into());
    c.end_condition = EndCondition::RoundLimit(500);
    c
}

fn catalog_counts() -> Result<String, String> {
    let catalog = DataSet::bundled().catalog;
    let expected = [
        (Color::Lime, 12),
        (Color::Purple, 12),
        (Color::Orange, 18),
        (Color::Yellow, 12),
        (Color::Emerald, 12),
        (Color::Blue, 13),
    ];
    for (color, n) in expected {
        let fam = catalog.family_by_color(color);
        let count = catalog.concepts().iter().filter(|c| c.family == fam.id).count();
        ensure!(count == n, "{color:?} has {count} concepts, expected {n}");
    }
    ensure!(catalog.concepts().len() == 79, "{} concepts in total", catalog.concepts().len());
    Ok("12/12/18/12/12/13, total 79".into())
}

fn board_structure() -> Result<String, String> {
    let data = DataSet::bundled();
    let expected_specials = [
        ("lime", 0),
        ("purple", 4),
        ("orange", 7),
        ("yellow", 7),
        ("emerald", 7),
        ("blue", 7),
        ("multicolored", 7),
    ];
    ensure!(data.boards.len() == 7, "{} boards", data.boards.len());
    for (id, specials) in expected_specials {
        let b = data.board(id).ok_or(format!("no board {id}"))?;
        let report = validate_board(b, &data.catalog);
        ensure!(report.ok, "{id}: {:?}", report.findings);
        ensure!(b.boxes().len() == 42, "{id}: {} boxes", b.boxes().len());
        let n = b.boxes().iter().filter(|x| matches!(x.kind, BoxKind::Special(_))).count();
        ensure!(n == specials, "{id}: {n} special boxes");
    }
    let lime = data.board("lime").unwrap();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for b in lime.boxes() {
        if let BoxKind::Concept(c) = &b.kind {
            *counts.entry(c.as_str().to_owned()).or_default() += 1;
        }
    }
    let family = data.catalog.family_by_color(Color::Lime).id.clone();
    for c in data.catalog.concepts().iter().filter(|c| c.family == family) {
        let n = counts.get(c.id.as_str()).copied().unwrap_or(0);
        ensure!((2..=3).contains(&n), "lime concept {} appears {n} times", c.id);
    }
    Ok("7 boards valid, 42 boxes each, specials 0/4/7, lime concepts 2-3x".into())
}

/// Endpoints of every walk of exactly `steps` moves that never steps straight
/// back to the box it just left, by plain recursion over paths.
fn brute_force_walks(board: &Board, from: BoxId, steps: u32) -> BTreeSet<BoxId> {
    fn go(board: &Board, at: BoxId, prev: Option<BoxId>, left: u32, out: &mut BTreeSet<BoxId>) {
        if left == 0 {
            out.insert(at);
            return;
        }
        for &n in board.neighbors(at) {
            if Some(n) != prev {
                go(board, n, Some(at), left - 1, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(board, from, None, steps, &mut out);
    out
}

fn movement_oracle() -> Result<String, String> {
    let data = DataSet::bundled();
    let mut cases = 0;
    for b in &data.boards {
        for x in b.boxes() {
            for steps in 1..=6 {
                let got = legal_destinations(b, x.id, steps).map_err(|e| e.to_string())?;
                let want = brute_force_walks(b, x.id, steps);
                ensure!(got == want, "{} box {} steps {steps}: {got:?} != {want:?}", b.id(), x.id.0);
                ensure!((1..=4).contains(&got.len()), "{} box {} steps {steps}: {} destinations", b.id(), x.id.0, got.len());
                cases += 1;
            }
        }
    }
    ensure!(cases == 1764, "{cases} cases");
    Ok(format!("{cases} cases equal, sizes in [1, 4]"))
}

/// A game where team A's first roll can reach a concept box, with A there.
fn first_roll_to_concept(cfg: &GameConfig) -> GameState {
    for seed in 0..10_000 {
        let mut c = cfg.clone();
        c.rng_seed = seed;
        let mut s = GameState::new(c, default_teams(2), ctx(&cfg.board)).unwrap();
        s.take_roll().unwrap();
        let board = s.context().board.clone();
        let hit = s
            .turn()
            .offered
            .iter()
            .copied()
            .find(|b| matches!(board.kind(*b), Some(BoxKind::Concept(_))));
        if let Some(b) = hit {
            s.move_pawn(b).unwrap();
            return s;
        }
    }
    panic!("no seed reaches a concept box");
}

fn total(s: &GameState, team: &str) -> i64 {
    s.team(&team.into()).unwrap().sheet.total()
}

fn referee_example() -> Result<String, String> {
    let mut s = first_roll_to_concept(&config("lime"));
    let claim = script::claim_for(&s, ClaimKind::Violation);
    s.submit_claim(claim).map_err(|e| e.to_string())?;
    s.submit_verdict(Verdict::escalate()).map_err(|e| e.to_string())?;
    ensure!(s.phase() == Phase::AwaitRuling, "phase {}", s.phase());
    s.referee_ruling(RefereeRuling {
        pair_awarded_to: "B".into(),
        note: "B read the rule correctly".into(),
    })
    .map_err(|e| e.to_string())?;
    let a = s.export_score_sheet(&"A".into()).unwrap();
    let b = s.export_score_sheet(&"B".into()).unwrap();
    ensure!((a.points, a.bonus, a.total) == (0, 0, 0), "A: {:?}", (a.points, a.bonus, a.total));
    ensure!((b.points, b.bonus, b.total) == (0, 4, 4), "B: {:?}", (b.points, b.bonus, b.total));
    Ok("B bonus +4, A +0".into())
}

fn gain(s: &GameState, before: i64) -> i64 {
    s.active_team().sheet.total() - before
}

fn scoring_matrix() -> Result<String, String> {
    // Accepted violation.
    let mut s = first_roll_to_concept(&config("lime"));
    s.submit_claim(script::claim_for(&s, ClaimKind::Violation)).unwrap();
    s.submit_verdict(Verdict::accept_all()).unwrap();
    ensure!(total(&s, "A") == 2, "violation scored {}", total(&s, "A"));

    // Accepted correct application; the second point cannot be granted.
    let mut s = first_roll_to_concept(&config("lime"));
    s.submit_claim(script::claim_for(&s, ClaimKind::CorrectApplication)).unwrap();
    ensure!(s.submit_verdict(Verdict::accept_all()).is_err(), "point 2 accepted on a correct application");
    s.submit_verdict(Verdict {
        point1_accepted: true,
        ..Verdict::default()
    })
    .unwrap();
    ensure!(total(&s, "A") == 1, "correct application scored {}", total(&s, "A"));

    // Third point on the multicolored board.
    let mut cfg = config("multicolored");
    cfg.third_point_mode = ThirdPointMode::RelatedConcept;
    let mut s = first_roll_to_concept(&cfg);
    let mut c = script::claim_for(&s, ClaimKind::Violation);
    let other = s
        .context()
        .catalog
        .concepts()
        .iter()
        .find(|x| x.id != c.concept)
        .unwrap()
        .id
        .clone();
    c.third_point = Some(ThirdPointClaim {
        concept: other,
        text: "it also slows the user down".into(),
    });
    s.submit_claim(c).unwrap();
    s.submit_verdict(Verdict {
        point3_accepted: Some(true),
        ..Verdict::accept_all()
    })
    .unwrap();
    ensure!(total(&s, "A") == 3, "third point game scored {}", total(&s, "A"));

    // Joker: point 2 granted on a violation even when the judges refuse it.
    let mut s = GameState::new(config("purple"), default_teams(2), ctx("purple")).unwrap();
    let mut n = 0;
    loop {
        ensure!(n < 5_000, "never offered a joker box");
        if s.phase() == Phase::AwaitDestination {
            let board = s.context().board.clone();
            if let Some(j) = s
                .turn()
                .offered
                .iter()
                .copied()
                .find(|b| board.kind(*b) == Some(&BoxKind::Special(SpecialEffect::Joker)))
            {
                s.move_pawn(j).unwrap();
                break;
            }
        }
        let (_, action) = next_step(&s, n).unwrap();
        apply_direct(&mut s, &action);
        n += 1;
    }
    let before = s.active_team().sheet.total();
    let c = s.claimable_concepts().into_iter().next().unwrap();
    s.choose_concept(c).unwrap();
    s.submit_claim(script::claim_for(&s, ClaimKind::Violation)).unwrap();
    let me = s.active_team().id.clone();
    s.submit_verdict(Verdict {
        point1_accepted: true,
        ..Verdict::default()
    })
    .unwrap();
    let joker_gain = s.team(&me).unwrap().sheet.total() - before;
    ensure!(joker_gain == 2, "joker violation scored {joker_gain}");

    // Gamification roll 6 doubles point 1.
    let mut cfg = config("lime");
    cfg.gamification_dice = true;
    let mut s = first_roll_to_concept(&cfg);
    s.apply_gamification_roll(6).unwrap();
    let before = s.active_team().sheet.total();
    s.submit_claim(script::claim_for(&s, ClaimKind::CorrectApplication)).unwrap();
    s.submit_verdict(Verdict {
        point1_accepted: true,
        ..Verdict::default()
    })
    .unwrap();
    ensure!(total(&s, "A") - before == 2, "roll 6 scored {}", gain(&s, before));
    Ok("violation 2, correct application 1, third point 3, joker 2, roll six 2".into())
}

fn fuzz_setup(i: u64) -> (String, GameConfig, Vec<AgentPolicy>, u64) {
    let r = |k: u64| derive_seed(0xACCE, i * 16 + k);
    let board = BOARDS[(r(0) % 7) as usize];
    let mut cfg = GameConfig::new(board, SOFTWARE.iter().map(|s| s.to_string()).collect());
    cfg.end_condition = EndCondition::RoundLimit(1 + (r(1) % 12) as u32);
    cfg.gamification_dice = r(2) % 2 == 0;
    if board == "multicolored" {
        cfg.third_point_mode = [ThirdPointMode::Off, ThirdPointMode::RelatedConcept, ThirdPointMode::InducedProblem]
            [(r(3) % 3) as usize];
    }
    let teams = 2 + (r(4) % 3) as usize;
    let agents = (0..teams)
        .map(|t| AgentPolicy {
            kind: if r(5 + t as u64) % 2 == 0 {
                AgentKind::Random
            } else {
                AgentKind::GreedyCoverage
            },
            accept_probability: (r(9) % 101) as f64 / 100.0,
            violation_share: (r(10) % 101) as f64 / 100.0,
            dispute_probability: (r(11) % 31) as f64 / 100.0,
        })
        .collect();
    (board.to_owned(), cfg, agents, r(12))
}

fn parallel<T: Send>(n: u64, f: impl Fn(u64) -> Result<T, String> + Sync) -> Result<Vec<T>, String> {
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()) as u64;
    let results: Vec<Result<Vec<T>, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || (w..n).step_by(workers as usize).map(f).collect::<Result<Vec<T>, String>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn determinism_replay() -> Result<String, String> {
    let contexts: BTreeMap<&str, GameContext> = BOARDS.iter().map(|b| (*b, ctx(b))).collect();
    let events = parallel(1000, |i| {
        let (board, cfg, agents, seed) = fuzz_setup(i);
        let c = &contexts[board.as_str()];
        let live = play_game(c, &cfg, &agents, seed).map_err(|e| format!("game {i}: {e}"))?;
        let text = events_to_ndjson(live.events());
        let parsed = events_from_ndjson(&text).map_err(|e| format!("game {i}: {e}"))?;
        let rebuilt = replay(&parsed, c.clone()).map_err(|e| format!("game {i}: {e}"))?;
        ensure!(rebuilt == live, "game {i} ({board}): replayed state differs");
        ensure!(events_to_ndjson(rebuilt.events()) == text, "game {i}: re-serialized log differs");
        let again = play_game(c, &cfg, &agents, seed).map_err(|e| e.to_string())?;
        ensure!(events_to_ndjson(again.events()) == text, "game {i}: equal seeds gave different logs");
        Ok(live.events().len())
    })?;
    Ok(format!("1000 games, {} events, zero mismatches", events.iter().sum::<usize>()))
}

#[derive(Debug, Default)]
struct EffectCounts {
    reverse: u64,
    late: u64,
    key_failed: u64,
    key_passed: u64,
    no_dice: u64,
}

/// What a team is owed at the start of its next turn.
#[derive(Debug, Clone, PartialEq)]
enum Owed {
    Skip(SkipReason),
    KeyPoint,
    Impose(ConceptId),
}

fn opener_team(e: &EventBody) -> Option<&TeamId> {
    match e {
        EventBody::DiceRolled { team, .. }
        | EventBody::TurnSkipped { team, .. }
        | EventBody::KeyPointResolved { team, .. }
        | EventBody::ClaimSubmitted { team, .. } => Some(team),
        _ => None,
    }
}

/// Checks the special-effect properties on one event log against a model of
/// the owed effects, queued per team in trigger order.
fn check_effects(events: &[GameEvent], counts: &mut EffectCounts) -> Result<(), String> {
    let mut owed: Vec<(TeamId, Owed)> = Vec::new();
    let mut direction = Direction::Forward;
    let mut replay_for: Option<TeamId> = None;
    let mut not_next: Option<TeamId> = None;
    for (i, e) in events.iter().enumerate() {
        let at = |what: &str| format!("event {}: {what}", e.seq);
        let opens = i > 0
            && matches!(
                events[i - 1].body,
                EventBody::FirstTeamChosen { .. } | EventBody::TurnEnded { .. } | EventBody::TurnSkipped { .. }
            )
            && !matches!(e.body, EventBody::GameEnded { .. });
        if opens {
            let team = opener_team(&e.body).ok_or_else(|| at(&format!("{} cannot open a turn", e.body.kind())))?;
            if let Some(t) = replay_for.take() {
                ensure!(*team == t, "{}", at("reversing team did not play again"));
                counts.reverse += 1;
            }
            if let Some(t) = not_next.take() {
                ensure!(*team != t, "{}", at("skipped team played straight away"));
            }
            let due = owed.iter().position(|(t, _)| t == team).map(|p| owed.remove(p).1);
            match (due, &e.body) {
                (None, EventBody::DiceRolled { .. }) => {}
                (Some(Owed::Skip(r)), EventBody::TurnSkipped { reason, .. }) if r == *reason => {
                    if r == SkipReason::Late {
                        counts.late += 1;
                    }
                }
                (Some(Owed::KeyPoint), EventBody::KeyPointResolved { .. }) => {}
                (Some(Owed::Impose(c)), EventBody::ClaimSubmitted { claim, .. }) if claim.concept == c => {
                    let end = (i..events.len())
                        .find(|&j| matches!(&events[j].body, EventBody::TurnEnded { team: t } if t == team))
                        .unwrap_or(events.len());
                    if let Some(ev) = events[i..end].iter().find(|ev| {
                        matches!(
                            ev.body,
                            EventBody::DiceRolled { .. }
                                | EventBody::DestinationChosen { .. }
                                | EventBody::ConceptChosen { .. }
                                | EventBody::GamificationRolled { .. }
                        )
                    }) {
                        return Err(at(&format!("imposed turn was not moveless: {}", ev.body.kind())));
                    }
                    counts.no_dice += 1;
                }
                (due, body) => return Err(at(&format!("{} owed {due:?} but opened with {}", team, body.kind()))),
            }
        }
        match &e.body {
            EventBody::SpecialTriggered {
                team,
                effect,
                target,
                direction: d,
            } => match effect {
                SpecialEffect::ReverseDirection => {
                    ensure!(*d == direction.flip(), "{}", at("direction did not flip"));
                    direction = *d;
                    replay_for = Some(team.clone());
                }
                SpecialEffect::Late => {
                    let target = target.clone().ok_or(at("late without target"))?;
                    owed.push((target, Owed::Skip(SkipReason::Late)));
                }
                SpecialEffect::KeyPoint(_) => {
                    let target = target.clone().ok_or(at("key point without target"))?;
                    owed.push((target, Owed::KeyPoint));
                }
                SpecialEffect::NoDice => {
                    let target = target.as_ref().ok_or(at("no-dice without target"))?;
                    match events.get(i + 1).map(|x| &x.body) {
                        Some(EventBody::ConceptImposed { by, target: t, concept }) if by == team && t == target => {
                            owed.push((t.clone(), Owed::Impose(concept.clone())));
                        }
                        None | Some(EventBody::GameEnded { .. }) => {}
                        other => return Err(at(&format!("no concept imposed, next was {other:?}"))),
                    }
                }
                SpecialEffect::Joker => ensure!(*d == direction, "{}", at("joker changed direction")),
            },
            EventBody::KeyPointResolved { team, passed, .. } => match (passed, events.get(i + 1).map(|x| &x.body)) {
                (_, None | Some(EventBody::GameEnded { .. })) => {}
                (false, Some(EventBody::TurnSkipped { team: t, reason: SkipReason::KeyPoint })) if t == team => {
                    counts.key_failed += 1;
                }
                (true, Some(EventBody::DiceRolled { team: t, .. })) if t == team => counts.key_passed += 1,
                (_, other) => return Err(at(&format!("key point outcome not applied, next was {other:?}"))),
            },
            EventBody::TurnSkipped { team, .. } => not_next = Some(team.clone()),
            _ => {}
        }
    }
    Ok(())
}

fn special_effects() -> Result<String, String> {
    let boards = ["purple", "orange", "yellow", "emerald", "blue", "multicolored"];
    let contexts: BTreeMap<&str, GameContext> = boards.iter().map(|b| (*b, ctx(b))).collect();
    let results = parallel(600, |i| {
        let board = boards[(i % 6) as usize];
        let mut cfg = GameConfig::new(board, SOFTWARE.iter().map(|s| s.to_string()).collect());
        cfg.end_condition = EndCondition::RoundLimit(15);
        cfg.gamification_dice = i % 4 == 0;
        let teams = 2 + (i % 3) as usize;
        let agents: Vec<AgentPolicy> = (0..teams)
            .map(|t| AgentPolicy {
                accept_probability: 0.5,
                dispute_probability: 0.1,
                ..if t % 2 == 0 { AgentPolicy::random() } else { AgentPolicy::greedy() }
            })
            .collect();
        let game = play_game(&contexts[board], &cfg, &agents, derive_seed(0x5EC, i)).map_err(|e| e.to_string())?;
        let mut counts = EffectCounts::default();
        check_effects(game.events(), &mut counts).map_err(|e| format!("game {i} ({board}): {e}"))?;
        Ok(counts)
    })?;
    let mut sum = EffectCounts::default();
    for c in results {
        sum.reverse += c.reverse;
        sum.late += c.late;
        sum.key_failed += c.key_failed;
        sum.key_passed += c.key_passed;
        sum.no_dice += c.no_dice;
    }
    ensure!(
        sum.reverse >= 50 && sum.late >= 50 && sum.key_failed >= 50 && sum.key_passed >= 50 && sum.no_dice >= 50,
        "too few effects exercised: {sum:?}"
    );
    Ok(format!("600 games, zero violations; {sum:?}"))
}

// --- protocol ---------------------------------------------------------------

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn ws_send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

async fn ws_recv(ws: &mut Ws) -> ServerMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("server replied in time")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn ws_join(addr: &str, session: &str, token: &str, resume: bool) -> Ws {
    let url = format!("ws://{addr}/sessions/{session}/ws");
    let (mut ws, _) = tokio_tungstenite::connect_async_with_config(url, None, true).await.unwrap();
    ws_send(
        &mut ws,
        json!({"type": "hello", "protocol_version": PROTOCOL_VERSION, "token": token, "resume": resume}),
    )
    .await;
    match ws_recv(&mut ws).await {
        ServerMessage::Welcome { .. } => ws,
        other => panic!("expected welcome, got {other:?}"),
    }
}

async fn ws_request(ws: &mut Ws, id: usize, action: &Action) -> Result<(), String> {
    ws_send(ws, json!({"type": "action", "id": id, "action": action})).await;
    loop {
        match ws_recv(ws).await {
            ServerMessage::Envelope { .. } => {}
            ServerMessage::Ack { id: got, .. } if got == Some(id as u64) => return Ok(()),
            other => return Err(format!("request {id}: {other:?}")),
        }
    }
}

async fn spawn(m: Arc<SessionManager>) -> (String, tokio::task::JoinHandle<std::io::Result<()>>) {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    (addr, tokio::spawn(serve_on(m, listener)))
}

fn protocol_equivalence() -> Result<String, String> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    rt.block_on(protocol_run())
}

async fn protocol_run() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let mut req = script::request("orange", 2024, 2);
    req.config.end_condition = EndCondition::RoundLimit(20);
    let first = Arc::new(script::manager(Some(dir.path().to_owned())));
    let created = first.create(req.clone()).map_err(|e| e.to_string())?;
    let id = created.session_id.clone();
    let tokens: Vec<String> = created
        .seats
        .iter()
        .map(|s| s.token.clone())
        .chain([created.game_master_token.clone()])
        .collect();
    let index = |t: &str| tokens.iter().position(|x| x == t).unwrap();

    let mut direct = GameState::new_at(req.config.clone(), req.teams.clone(), ctx("orange"), NOW).unwrap();

    let (addr, server) = spawn(first.clone()).await;
    let mut clients = Vec::new();
    for t in &tokens {
        clients.push(ws_join(&addr, &id, t, false).await);
    }
    ws_request(&mut clients[0], 0, &Action::Start).await?;
    let mut n = 1;
    let half = 60;
    while n < half {
        let Some((who, action)) = next_step(&direct, n) else { break };
        let c = index(token_for(&created, &direct, who));
        ws_request(&mut clients[c], n, &action).await?;
        direct.set_clock(NOW);
        apply_direct(&mut direct, &action);
        n += 1;
    }

    ensure!(!direct.is_ended(), "game ended before the restart point");
    // Kill: drop every connection, the server and the manager.
    let before = first.snapshot(&id).map_err(|e| e.to_string())?;
    for mut c in clients.drain(..) {
        let _ = c.close(None).await;
    }
    server.abort();
    drop(first);

    let second = Arc::new(script::manager(Some(dir.path().to_owned())));
    let report = second.restore_all();
    ensure!(report.is_empty(), "restore reported {report:?}");
    let after = second.snapshot(&id).map_err(|e| e.to_string())?;
    ensure!(after == before, "restored snapshot differs:\n{}\n{}", serde_json::to_string(&before).unwrap(), serde_json::to_string(&after).unwrap());

    let (addr, _server) = spawn(second.clone()).await;
    for t in &tokens {
        clients.push(ws_join(&addr, &id, t, true).await);
    }
    while let Some((who, action)) = next_step(&direct, n) {
        let c = index(token_for(&created, &direct, who));
        ws_request(&mut clients[c], n, &action).await?;
        direct.set_clock(NOW);
        apply_direct(&mut direct, &action);
        n += 1;
    }
    ensure!(direct.is_ended(), "script did not finish the game");
    let h = second.get(&id).map_err(|e| e.to_string())?;
    let s = h.lock();
    ensure!(s.status() == SessionStatus::Ended, "session status {:?}", s.status());
    let wire = script::sheets(s.game());
    ensure!(wire == script::sheets(&direct), "score sheets differ");
    ensure!(s.game().events() == direct.events(), "event logs differ");
    Ok(format!("{n} scripted requests, sheets identical, restore at step {half} identical"))
}

fn simulation_coverage() -> Result<String, String> {
    let lime = ctx("lime");
    let mut cfg = GameConfig::new("lime", SOFTWARE.iter().map(|s| s.to_string()).collect());
    cfg.end_condition = EndCondition::RoundLimit(20);
    let agents = [AgentPolicy::random(), AgentPolicy::random()];
    let seed = 20_240_101;
    let report = simulate(&lime, &cfg, &agents, 10_000, seed).map_err(|e| e.to_string())?;
    ensure!(report.games == 10_000, "{} games", report.games);
    let family = lime.catalog.family_by_color(Color::Lime).id.clone();
    let lime_concepts: Vec<_> = lime.catalog.concepts().iter().filter(|c| c.family == family).collect();
    ensure!(report.concept_frequency.len() == lime_concepts.len(), "report lists {} concepts", report.concept_frequency.len());
    let unstudied = report.unstudied();
    ensure!(unstudied.is_empty(), "never studied: {unstudied:?}");
    ensure!(
        report.concept_frequency.values().sum::<u64>() == report.claims,
        "concept counts do not add up to the claims"
    );

    // Independent recount of the first games straight from their event logs.
    let sample = 200;
    let small = simulate(&lime, &cfg, &agents, sample, seed).map_err(|e| e.to_string())?;
    let mut recount: BTreeMap<String, u64> = lime_concepts.iter().map(|c| (c.id.as_str().to_owned(), 0)).collect();
    for g in 0..sample {
        let game = play_game(&lime, &cfg, &agents, derive_seed(seed, g)).map_err(|e| e.to_string())?;
        ensure!(game.round() == 20, "game {g} ended after {} rounds", game.round());
        for e in game.events() {
            if let EventBody::ClaimSubmitted { claim, .. } = &e.body {
                *recount.entry(claim.concept.as_str().to_owned()).or_default() += 1;
            }
        }
    }
    ensure!(recount == small.concept_frequency, "report frequencies differ from a recount");

    let rerun = simulate(&lime, &cfg, &agents, 10_000, seed).map_err(|e| e.to_string())?;
    ensure!(rerun.to_json() == report.to_json(), "rerun produced a different report");
    let rarest = report.concept_frequency.values().min().copied().unwrap_or(0);
    Ok(format!("10000 games, all {} lime concepts studied (rarest {rarest}), rerun identical", lime_concepts.len()))
}
