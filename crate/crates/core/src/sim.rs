//! Headless Monte Carlo play with scripted agents.
//!
//! Each game draws its dice seed and its agents' seed from `(seed, game
//! index)`, so games run in parallel and the merged report does not depend on
//! scheduling.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::BoxId;
use crate::catalog::ConceptId;
use crate::engine::{
    derive_seed, Claim, ClaimKind, EndCondition, EngineError, EventBody, FirstTeamMethod, GameConfig,
    GameContext, GameState, Phase, Player, RefereeRuling, ResolutionInput, TeamId, TeamSetup,
    ThirdPointClaim, ThirdPointMode, Throw, Verdict,
};

/// Hard cap on operations per game; a correct engine never gets close.
const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Random,
    /// Prefers destinations and concepts that are still unticked on the
    /// team's sheet; ties go to the lowest box id (or concept id).
    GreedyCoverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPolicy {
    pub kind: AgentKind,
    /// Chance that this team, when judging, accepts each point of a claim.
    pub accept_probability: f64,
    /// Chance that a claim by this team is a violation (else a correct application).
    #[serde(default = "default_violation_share")]
    pub violation_share: f64,
    /// Chance that this team, when judging, escalates the claim instead.
    #[serde(default)]
    pub dispute_probability: f64,
}

fn default_violation_share() -> f64 {
    0.7
}

impl Default for AgentPolicy {
    fn default() -> Self {
        Self {
            kind: AgentKind::Random,
            accept_probability: 0.7,
            violation_share: default_violation_share(),
            dispute_probability: 0.0,
        }
    }
}

impl AgentPolicy {
    pub fn random() -> Self {
        Self::default()
    }

    pub fn greedy() -> Self {
        Self {
            kind: AgentKind::GreedyCoverage,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), SimError> {
        for (name, p) in [
            ("accept_probability", self.accept_probability),
            ("violation_share", self.violation_share),
            ("dispute_probability", self.dispute_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Probability(name, p));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("at least one game must be simulated")]
    NoGames,
    #[error("simulation needs a round limit; {0} may never end without a real clock")]
    NonTerminating(&'static str),
    #[error("{0} must lie in [0, 1], got {1}")]
    Probability(&'static str, f64),
    #[error("a game needs 2 to 4 agents, got {0}")]
    AgentCount(usize),
    #[error("no software board in the config is compatible with board `{0}`")]
    NoSoftwareBoard(String),
    #[error("engine rejected a simulated action: {0}")]
    Engine(#[from] EngineError),
    #[error("game {0} did not terminate")]
    Runaway(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatScore {
    pub seat: usize,
    pub mean: f64,
    pub stddev: f64,
    pub min: i64,
    pub max: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub board: String,
    pub seed: u64,
    pub games: u64,
    /// Turns played plus turns skipped, over all games.
    pub turns: u64,
    pub claims: u64,
    /// Claims per concept; every concept of the board's variant is listed.
    pub concept_frequency: BTreeMap<String, u64>,
    pub special_frequency: BTreeMap<String, u64>,
    /// Non-escalated verdicts by awarded ticks.
    pub award_histogram: BTreeMap<u32, u64>,
    pub seat_scores: Vec<SeatScore>,
    /// Completed rounds at game end.
    pub round_distribution: BTreeMap<u32, u64>,
}

impl BalanceReport {
    /// Concepts of the variant never claimed in any game.
    pub fn unstudied(&self) -> Vec<&str> {
        self.concept_frequency
            .iter()
            .filter(|(_, n)| **n == 0)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

// Integer accumulators so merging is exact and order-independent.
#[derive(Debug, Clone, Default)]
struct Tally {
    games: u64,
    turns: u64,
    claims: u64,
    concepts: BTreeMap<String, u64>,
    specials: BTreeMap<String, u64>,
    awards: BTreeMap<u32, u64>,
    seat_sum: Vec<i64>,
    seat_sq: Vec<i128>,
    seat_min: Vec<i64>,
    seat_max: Vec<i64>,
    rounds: BTreeMap<u32, u64>,
}

impl Tally {
    fn of_game(state: &GameState) -> Self {
        let mut t = Tally {
            games: 1,
            ..Tally::default()
        };
        for e in state.events() {
            match &e.body {
                EventBody::ClaimSubmitted { claim, .. } => {
                    t.claims += 1;
                    *t.concepts.entry(claim.concept.0.clone()).or_default() += 1;
                }
                EventBody::SpecialTriggered { effect, .. } => {
                    *t.specials.entry(effect.name().to_owned()).or_default() += 1;
                }
                EventBody::VerdictGiven { verdict, award, .. } if !verdict.escalate => {
                    *t.awards.entry(award.total()).or_default() += 1;
                }
                EventBody::TurnEnded { .. } | EventBody::TurnSkipped { .. } => t.turns += 1,
                _ => {}
            }
        }
        for team in state.teams() {
            let s = team.sheet.total();
            t.seat_sum.push(s);
            t.seat_sq.push(i128::from(s) * i128::from(s));
            t.seat_min.push(s);
            t.seat_max.push(s);
        }
        *t.rounds.entry(state.round()).or_default() += 1;
        t
    }

    fn merge(mut self, other: Tally) -> Tally {
        fn add<K: Ord>(a: &mut BTreeMap<K, u64>, b: BTreeMap<K, u64>) {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
        }
        self.games += other.games;
        self.turns += other.turns;
        self.claims += other.claims;
        add(&mut self.concepts, other.concepts);
        add(&mut self.specials, other.specials);
        add(&mut self.awards, other.awards);
        add(&mut self.rounds, other.rounds);
        if self.seat_sum.is_empty() {
            self.seat_sum = other.seat_sum;
            self.seat_sq = other.seat_sq;
            self.seat_min = other.seat_min;
            self.seat_max = other.seat_max;
        } else {
            for i in 0..self.seat_sum.len() {
                self.seat_sum[i] += other.seat_sum[i];
                self.seat_sq[i] += other.seat_sq[i];
                self.seat_min[i] = self.seat_min[i].min(other.seat_min[i]);
                self.seat_max[i] = self.seat_max[i].max(other.seat_max[i]);
            }
        }
        self
    }

    fn report(self, board: &str, seed: u64, variant_concepts: &BTreeSet<ConceptId>) -> BalanceReport {
        let mut concept_frequency: BTreeMap<String, u64> =
            variant_concepts.iter().map(|c| (c.0.clone(), 0)).collect();
        for (c, n) in self.concepts {
            *concept_frequency.entry(c).or_default() += n;
        }
        let n = self.games as f64;
        let seat_scores = (0..self.seat_sum.len())
            .map(|i| {
                let mean = self.seat_sum[i] as f64 / n;
                let var = (self.seat_sq[i] as f64 / n - mean * mean).max(0.0);
                SeatScore {
                    seat: i,
                    mean,
                    stddev: var.sqrt(),
                    min: self.seat_min[i],
                    max: self.seat_max[i],
                }
            })
            .collect();
        BalanceReport {
            board: board.to_owned(),
            seed,
            games: self.games,
            turns: self.turns,
            claims: self.claims,
            concept_frequency,
            special_frequency: self.specials,
            award_histogram: self.awards,
            seat_scores,
            round_distribution: self.rounds,
        }
    }
}

const NAMES: [(&str, u8, u8); 8] = [
    ("Alice", 12, 3),
    ("Bruno", 5, 11),
    ("Chloe", 23, 7),
    ("Dmitri", 1, 1),
    ("Emma", 30, 9),
    ("Farid", 17, 5),
    ("Gina", 8, 12),
    ("Hugo", 14, 2),
];

/// Teams of two with distinct first names and birthdays, so every
/// first-team rule resolves.
pub fn default_teams(n: usize) -> Vec<TeamSetup> {
    (0..n)
        .map(|i| {
            let players = NAMES[2 * i..2 * i + 2]
                .iter()
                .map(|(name, d, m)| Player::named(*name).born(*d, *m))
                .collect();
            TeamSetup::new(((b'A' + i as u8) as char).to_string(), players)
        })
        .collect()
}

fn check_setup(ctx: &GameContext, template: &GameConfig, agents: &[AgentPolicy]) -> Result<(), SimError> {
    match template.end_condition {
        EndCondition::RoundLimit(_) => {}
        EndCondition::Deadline(_) => return Err(SimError::NonTerminating("a deadline")),
        EndCondition::TargetScore(_) => return Err(SimError::NonTerminating("a target score")),
    }
    if !(2..=4).contains(&agents.len()) {
        return Err(SimError::AgentCount(agents.len()));
    }
    for a in agents {
        a.check()?;
    }
    let variant = ctx.board.variant();
    let usable = template
        .software_boards
        .iter()
        .filter_map(|id| ctx.software_board(id))
        .any(|sb| sb.is_compatible(variant));
    if !usable {
        return Err(SimError::NoSoftwareBoard(ctx.board.id().to_owned()));
    }
    Ok(())
}

/// Plays one game to the end. `seed` drives both the dice (as the config's
/// RNG seed) and the agents' decisions.
pub fn play_game(
    ctx: &GameContext,
    template: &GameConfig,
    agents: &[AgentPolicy],
    seed: u64,
) -> Result<GameState, SimError> {
    check_setup(ctx, template, agents)?;
    let mut config = template.clone();
    config.rng_seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut state = GameState::new(config, default_teams(agents.len()), ctx.clone())?;
    for _ in 0..MAX_STEPS {
        if state.is_ended() {
            return Ok(state);
        }
        step(&mut state, agents, &mut rng)?;
    }
    Err(SimError::Runaway(seed))
}

/// Runs `n_games` games and merges their statistics.
pub fn simulate(
    ctx: &GameContext,
    template: &GameConfig,
    agents: &[AgentPolicy],
    n_games: u64,
    seed: u64,
) -> Result<BalanceReport, SimError> {
    if n_games == 0 {
        return Err(SimError::NoGames);
    }
    check_setup(ctx, template, agents)?;
    let tallies: Vec<Tally> = (0..n_games)
        .into_par_iter()
        .map(|g| play_game(ctx, template, agents, derive_seed(seed, g)).map(|s| Tally::of_game(&s)))
        .collect::<Result<_, _>>()?;
    let total = tallies.into_iter().fold(Tally::default(), Tally::merge);
    let probe = GameState::new(
        GameConfig {
            first_team_method: FirstTeamMethod::Auto,
            ..template.clone()
        },
        default_teams(agents.len()),
        ctx.clone(),
    )?;
    Ok(total.report(ctx.board.id(), seed, &probe.variant_concepts()))
}

fn step(state: &mut GameState, agents: &[AgentPolicy], rng: &mut ChaCha8Rng) -> Result<(), SimError> {
    let me = state.active_index();
    let policy = agents[me];
    let judge = agents[(me + 1) % agents.len()];
    match state.phase() {
        Phase::AwaitFirstTeam => {
            let dice = rng.random_range(1..=6u8);
            let ids: Vec<TeamId> = state.teams().iter().map(|t| t.id.clone()).collect();
            let input = match dice {
                1 => ResolutionInput::RockPaperScissors(rps_rounds(&ids, rng)),
                6 => ResolutionInput::ContestRolls(contest_rounds(&ids, rng)),
                _ => ResolutionInput::None,
            };
            state.determine_first_team(dice, input)?;
        }
        Phase::AwaitRoll => {
            state.take_roll()?;
        }
        Phase::AwaitDestination => {
            let offered: Vec<BoxId> = state.turn().offered.iter().copied().collect();
            let dest = match policy.kind {
                AgentKind::Random => *offered.choose(rng).expect("offered set is never empty"),
                AgentKind::GreedyCoverage => {
                    let mut best = offered[0];
                    let mut best_gain = 0;
                    for &b in &offered {
                        let gain = state
                            .concepts_at(b)
                            .iter()
                            .filter(|c| unticked(state, c))
                            .count();
                        if gain > best_gain {
                            best = b;
                            best_gain = gain;
                        }
                    }
                    best
                }
            };
            state.move_pawn(dest)?;
        }
        Phase::AwaitConcept => {
            let options: Vec<ConceptId> = state.claimable_concepts().into_iter().collect();
            let pick = match policy.kind {
                AgentKind::GreedyCoverage if state.turn().imposing_for.is_none() => options
                    .iter()
                    .find(|c| unticked(state, c))
                    .or_else(|| options.first())
                    .cloned(),
                _ => options.choose(rng).cloned(),
            };
            state.choose_concept(pick.expect("claimable set is never empty"))?;
        }
        Phase::AwaitClaim => {
            if state.turn().gamification_due {
                state.roll_gamification()?;
            } else {
                let claim = make_claim(state, &policy, rng);
                state.submit_claim(claim)?;
            }
        }
        Phase::AwaitVerdict => {
            let claim = state.turn().claim.clone().expect("claim is pending");
            let verdict = if rng.random_bool(judge.dispute_probability) {
                Verdict {
                    point3_accepted: claim.third_point.as_ref().map(|_| rng.random_bool(judge.accept_probability)),
                    ..Verdict::escalate()
                }
            } else {
                Verdict {
                    point1_accepted: rng.random_bool(judge.accept_probability),
                    point2_accepted: claim.kind == ClaimKind::Violation
                        && rng.random_bool(judge.accept_probability),
                    point3_accepted: claim.third_point.as_ref().map(|_| rng.random_bool(judge.accept_probability)),
                    escalate: false,
                }
            };
            state.submit_verdict(verdict)?;
        }
        Phase::AwaitRuling => {
            let teams = state.teams();
            let to = teams[rng.random_range(0..teams.len())].id.clone();
            state.referee_ruling(RefereeRuling {
                pair_awarded_to: to,
                note: String::new(),
            })?;
        }
        Phase::AwaitKeyPoint => {
            let passed = rng.random_bool(judge.accept_probability);
            state.resolve_key_point(passed)?;
        }
        Phase::Ended => {}
    }
    Ok(())
}

fn unticked(state: &GameState, concept: &ConceptId) -> bool {
    let key = state.sheet_key(concept);
    state.active_team().sheet.ticks.get(&key).copied().unwrap_or(0) == 0
}

fn make_claim(state: &GameState, policy: &AgentPolicy, rng: &mut ChaCha8Rng) -> Claim {
    let ctx = state.context();
    let variant = ctx.board.variant();
    let boards: Vec<_> = state
        .config()
        .software_boards
        .iter()
        .filter_map(|id| ctx.software_board(id))
        .filter(|sb| sb.is_compatible(variant))
        .collect();
    let sb = boards.choose(rng).expect("setup checked for a compatible board");
    let screen = sb.screens.choose(rng).expect("software boards have screens");
    let region = if screen.regions.is_empty() || rng.random_bool(0.2) {
        None
    } else {
        screen.regions.choose(rng).map(|r| r.id.clone())
    };
    let concept = state.turn().concept.clone().expect("concept is fixed");
    let violation = rng.random_bool(policy.violation_share);
    let third_point = match state.config().third_point_mode {
        ThirdPointMode::Off => None,
        _ if rng.random_bool(0.5) => None,
        _ => {
            let others: Vec<_> = ctx.catalog.concepts().iter().filter(|c| c.id != concept).collect();
            others.choose(rng).map(|c| ThirdPointClaim {
                concept: c.id.clone(),
                text: format!("{} is also at stake here", c.name),
            })
        }
    };
    Claim {
        software_board: sb.id.clone(),
        screen: screen.id.clone(),
        region,
        kind: if violation {
            ClaimKind::Violation
        } else {
            ClaimKind::CorrectApplication
        },
        rationale: format!("{} on {}", concept, screen.id),
        solution: violation.then(|| "rework the element".to_owned()),
        third_point,
        concept,
    }
}

fn rps_rounds(ids: &[TeamId], rng: &mut ChaCha8Rng) -> Vec<BTreeMap<TeamId, Throw>> {
    const SHAPES: [Throw; 3] = [Throw::Rock, Throw::Paper, Throw::Scissors];
    let mut remaining = ids.to_vec();
    let mut rounds = Vec::new();
    while remaining.len() > 1 {
        let round: BTreeMap<TeamId, Throw> = remaining
            .iter()
            .map(|t| (t.clone(), SHAPES[rng.random_range(0..3)]))
            .collect();
        let shapes: BTreeSet<u8> = round.values().map(|s| *s as u8).collect();
        if shapes.len() == 2 {
            let v: Vec<u8> = shapes.into_iter().collect();
            // rock=0, paper=1, scissors=2: each shape beats the one before it, cyclically
            let winner = if (v[0] + 1) % 3 == v[1] { v[1] } else { v[0] };
            remaining.retain(|t| round[t] as u8 == winner);
        }
        rounds.push(round);
    }
    rounds
}

fn contest_rounds(ids: &[TeamId], rng: &mut ChaCha8Rng) -> Vec<BTreeMap<TeamId, u8>> {
    let mut remaining = ids.to_vec();
    let mut rounds = Vec::new();
    while remaining.len() > 1 {
        let round: BTreeMap<TeamId, u8> = remaining.iter().map(|t| (t.clone(), rng.random_range(1..=6))).collect();
        let best = *round.values().max().expect("round is nonempty");
        remaining.retain(|t| round[t] == best);
        rounds.push(round);
    }
    rounds
}
