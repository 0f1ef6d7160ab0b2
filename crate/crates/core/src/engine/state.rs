use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::board::{legal_destinations, validate_board, BoxId, BoxKind, SpecialEffect, Variant};
use crate::catalog::{ConceptId, KeyPointKind};

use super::first_team::{self, ResolutionInput};
use super::rng::DiceRng;
use super::types::*;
use super::{EngineError, GameContext};

/// Per-turn scratch state. Reset at the start of every turn.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TurnState {
    /// No action has been taken yet this turn.
    pub fresh: bool,
    pub start_box: BoxId,
    pub dice: Option<u8>,
    pub offered: BTreeSet<BoxId>,
    pub landed: Option<BoxId>,
    pub concept: Option<ConceptId>,
    pub imposed: bool,
    pub special: Option<SpecialEffect>,
    pub key_point: Option<KeyPointKind>,
    pub claim: Option<Claim>,
    pub gamification_due: bool,
    pub gamification_roll: Option<u8>,
    pub double_point1: bool,
    pub extra_turn: bool,
    pub play_again: bool,
    /// Set while the active team picks the concept it imposes on `target`.
    pub imposing_for: Option<TeamId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameStatus {
    Ongoing,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    pub(super) ctx: GameContext,
    pub(super) config: GameConfig,
    pub(super) teams: Vec<Team>,
    pub(super) direction: Direction,
    pub(super) active: usize,
    pub(super) phase: Phase,
    pub(super) pending: VecDeque<PendingEffect>,
    pub(super) turn: TurnState,
    pub(super) turns_completed: u32,
    pub(super) rng: DiceRng,
    pub(super) clock_ms: u64,
    pub(super) started_ms: u64,
    pub(super) log: Vec<GameEvent>,
}

fn setup_of(t: &Team) -> TeamSetup {
    TeamSetup {
        id: t.id.clone(),
        name: t.name.clone(),
        players: t.players.clone(),
    }
}

impl GameState {
    /// Starts a game at game-clock time zero.
    pub fn new(config: GameConfig, teams: Vec<TeamSetup>, ctx: GameContext) -> Result<Self, EngineError> {
        Self::new_at(config, teams, ctx, 0)
    }

    pub fn new_at(
        config: GameConfig,
        teams: Vec<TeamSetup>,
        ctx: GameContext,
        now_ms: u64,
    ) -> Result<Self, EngineError> {
        let board = &ctx.board;
        let report = validate_board(board, &ctx.catalog);
        if !report.ok {
            let codes: Vec<_> = report.errors().map(|f| f.code.clone()).collect();
            return Err(EngineError::InvalidBoard(codes.join(", ")));
        }
        if !(2..=4).contains(&teams.len()) {
            return Err(EngineError::TeamCount(teams.len()));
        }
        let mut ids = BTreeSet::new();
        for t in &teams {
            if !ids.insert(&t.id) {
                return Err(EngineError::InvalidConfig(format!("duplicate team id `{}`", t.id)));
            }
            if !(1..=3).contains(&t.players.len()) {
                return Err(EngineError::InvalidConfig(format!(
                    "team `{}` must have 1 to 3 players",
                    t.id
                )));
            }
        }
        if config.board != board.id() {
            return Err(EngineError::InvalidConfig(format!(
                "config names board `{}` but `{}` was supplied",
                config.board,
                board.id()
            )));
        }
        if config.software_boards.is_empty() {
            return Err(EngineError::InvalidConfig("at least one software board is required".into()));
        }
        for sb in &config.software_boards {
            if ctx.software_board(sb).is_none() {
                return Err(EngineError::InvalidConfig(format!("unknown software board `{sb}`")));
            }
        }
        match config.end_condition {
            EndCondition::RoundLimit(0) => {
                return Err(EngineError::InvalidConfig("round limit must be at least 1".into()))
            }
            EndCondition::Deadline(0) => {
                return Err(EngineError::InvalidConfig("deadline must be positive".into()))
            }
            EndCondition::TargetScore(s) if s < 1 => {
                return Err(EngineError::InvalidConfig("target score must be positive".into()))
            }
            _ => {}
        }
        if config.third_point_mode != ThirdPointMode::Off && board.variant() != Variant::Multicolored {
            return Err(EngineError::InvalidConfig(
                "a third point is only available on the multicolored board".into(),
            ));
        }
        let first = match &config.first_team_method {
            FirstTeamMethod::Fixed(id) => Some(
                teams
                    .iter()
                    .position(|t| &t.id == id)
                    .ok_or_else(|| EngineError::UnknownTeam(id.clone()))?,
            ),
            FirstTeamMethod::Auto => None,
        };

        let start = board
            .start()
            .ok_or_else(|| EngineError::InvalidBoard("no start box".into()))?;
        let sheet = ScoreSheet {
            ticks: sheet_keys(&ctx).into_iter().map(|k| (k, 0)).collect(),
            bonus: 0,
        };
        let variant = board.variant();
        let built: Vec<Team> = teams
            .into_iter()
            .map(|t| Team {
                id: t.id,
                name: t.name,
                players: t.players,
                pawn: start,
                sheet: sheet.clone(),
            })
            .collect();

        let mut state = Self {
            rng: DiceRng::new(config.rng_seed),
            ctx,
            teams: built,
            direction: Direction::Forward,
            active: 0,
            phase: Phase::AwaitFirstTeam,
            pending: VecDeque::new(),
            turn: TurnState {
                fresh: true,
                start_box: start,
                ..TurnState::default()
            },
            turns_completed: 0,
            clock_ms: now_ms,
            started_ms: now_ms,
            log: Vec::new(),
            config,
        };
        let setups = state.teams.iter().map(setup_of).collect();
        state.emit(EventBody::GameCreated {
            config: state.config.clone(),
            variant,
            teams: setups,
        });
        if let Some(idx) = first {
            let team = state.teams[idx].id.clone();
            state.emit(EventBody::FirstTeamChosen {
                choice: FirstTeamChoice::Fixed,
                team,
            });
            state.begin_turn(idx);
        }
        Ok(state)
    }

    // --- queries -----------------------------------------------------------

    pub fn context(&self) -> &GameContext {
        &self.ctx
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn teams(&self) -> &[Team] {
        &self.teams
    }

    pub fn team(&self, id: &TeamId) -> Option<&Team> {
        self.teams.iter().find(|t| &t.id == id)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// The team whose turn it is. Meaningless before the first team is chosen.
    pub fn active_team(&self) -> &Team {
        &self.teams[self.active]
    }

    pub fn active_index(&self) -> usize {
        self.active
    }

    pub fn turn(&self) -> &TurnState {
        &self.turn
    }

    pub fn pending_effects(&self) -> &VecDeque<PendingEffect> {
        &self.pending
    }

    pub fn turns_completed(&self) -> u32 {
        self.turns_completed
    }

    /// Completed rounds: one round is one turn per team.
    pub fn round(&self) -> u32 {
        self.turns_completed / self.teams.len() as u32
    }

    pub fn rng(&self) -> &DiceRng {
        &self.rng
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn events(&self) -> &[GameEvent] {
        &self.log
    }

    pub fn is_ended(&self) -> bool {
        self.phase == Phase::Ended
    }

    /// Advances the game clock. Event timestamps and deadlines use it; it never
    /// moves backwards.
    pub fn set_clock(&mut self, now_ms: u64) {
        self.clock_ms = self.clock_ms.max(now_ms);
    }

    fn variant(&self) -> Variant {
        self.ctx.board.variant()
    }

    /// Concepts in play on this board: the family of a single-color board,
    /// the whole catalog on the multicolored one.
    pub fn variant_concepts(&self) -> BTreeSet<ConceptId> {
        let cat = &self.ctx.catalog;
        match self.variant().color() {
            Some(color) => cat
                .concepts_of(&cat.family_by_color(color).id)
                .unwrap_or_default()
                .into_iter()
                .map(|c| c.id.clone())
                .collect(),
            None => cat.concepts().iter().map(|c| c.id.clone()).collect(),
        }
    }

    /// Concepts a team landing on `at` may study. The start box acts as a
    /// color box of the board's own color; special boxes are wildcards.
    pub fn concepts_at(&self, at: BoxId) -> BTreeSet<ConceptId> {
        match self.ctx.board.kind(at) {
            Some(BoxKind::Concept(c)) => BTreeSet::from([c.clone()]),
            Some(BoxKind::Color(f)) => self
                .ctx
                .catalog
                .concepts_of(f)
                .unwrap_or_default()
                .into_iter()
                .map(|c| c.id.clone())
                .collect(),
            Some(BoxKind::Start) | Some(BoxKind::Special(_)) => self.variant_concepts(),
            None => BTreeSet::new(),
        }
    }

    pub fn claimable_concepts(&self) -> BTreeSet<ConceptId> {
        match self.phase {
            Phase::AwaitConcept if self.turn.imposing_for.is_some() => self.variant_concepts(),
            Phase::AwaitConcept => self
                .turn
                .landed
                .map(|b| self.concepts_at(b))
                .unwrap_or_default(),
            Phase::AwaitClaim => self.turn.concept.iter().cloned().collect(),
            _ => BTreeSet::new(),
        }
    }

    /// Score-sheet row credited for a concept.
    pub fn sheet_key(&self, concept: &ConceptId) -> String {
        match self.variant() {
            Variant::Multicolored => self
                .ctx
                .catalog
                .concept(concept)
                .map(|c| c.family.0.clone())
                .unwrap_or_else(|| concept.0.clone()),
            _ => concept.0.clone(),
        }
    }

    pub fn standings(&self) -> Vec<Standing> {
        let mut rows: Vec<(usize, i64)> = self
            .teams
            .iter()
            .enumerate()
            .map(|(i, t)| (i, t.sheet.total()))
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        rows.iter()
            .map(|&(i, total)| Standing {
                team: self.teams[i].id.clone(),
                total,
                rank: 1 + rows.iter().filter(|(_, t)| *t > total).count() as u32,
            })
            .collect()
    }

    pub fn export_score_sheet(&self, team: &TeamId) -> Result<ScoreSheetDoc, EngineError> {
        let t = self.team(team).ok_or_else(|| EngineError::UnknownTeam(team.clone()))?;
        let cat = &self.ctx.catalog;
        let rows = sheet_keys(&self.ctx)
            .into_iter()
            .map(|key| {
                let label = match self.variant() {
                    Variant::Multicolored => cat.family(&key.as_str().into()).map(|f| f.name.clone()),
                    _ => cat.concept(&key.as_str().into()).map(|c| c.name.clone()),
                }
                .unwrap_or_else(|| key.clone());
                SheetRow {
                    ticks: t.sheet.ticks.get(&key).copied().unwrap_or(0),
                    key,
                    label,
                }
            })
            .collect();
        Ok(ScoreSheetDoc {
            team: t.id.clone(),
            team_name: t.name.clone(),
            board: self.ctx.board.id().to_owned(),
            variant: self.variant(),
            rows,
            points: t.sheet.points(),
            bonus: t.sheet.bonus,
            total: t.sheet.total(),
        })
    }

    // --- internals ---------------------------------------------------------

    pub(super) fn emit(&mut self, body: EventBody) {
        let seq = self.log.len() as u64;
        self.log.push(GameEvent {
            seq,
            timestamp_ms: self.clock_ms,
            body,
        });
    }

    fn expect_phase(&self, expected: Phase, name: &'static str) -> Result<(), EngineError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(EngineError::WrongPhase {
                expected: name,
                actual: self.phase,
            })
        }
    }

    fn active_id(&self) -> TeamId {
        self.teams[self.active].id.clone()
    }

    fn next_index(&self, from: usize) -> usize {
        let n = self.teams.len();
        match self.direction {
            Direction::Forward => (from + 1) % n,
            Direction::Backward => (from + n - 1) % n,
        }
    }

    fn index_of(&self, id: &TeamId) -> Option<usize> {
        self.teams.iter().position(|t| &t.id == id)
    }

    /// Starts `idx`'s turn, consuming deferred effects aimed at it. Skips hand
    /// the turn on, so this may start several turns in a row.
    fn begin_turn(&mut self, mut idx: usize) {
        loop {
            self.active = idx;
            let pawn = self.teams[idx].pawn;
            self.turn = TurnState {
                fresh: true,
                start_box: pawn,
                ..TurnState::default()
            };
            let team = self.teams[idx].id.clone();
            let Some(pos) = self.pending.iter().position(|p| p.target == team) else {
                self.phase = Phase::AwaitRoll;
                return;
            };
            let effect = self.pending.remove(pos).expect("position is in range").effect;
            match effect {
                DeferredEffect::Skip(reason) => {
                    self.emit(EventBody::TurnSkipped { team, reason });
                    self.turns_completed += 1;
                    if self.check_end() {
                        return;
                    }
                    idx = self.next_index(idx);
                }
                DeferredEffect::KeyPoint(kind) => {
                    self.turn.key_point = Some(kind);
                    self.phase = Phase::AwaitKeyPoint;
                    return;
                }
                DeferredEffect::Impose(concept) => {
                    self.turn.concept = Some(concept);
                    self.turn.imposed = true;
                    self.phase = Phase::AwaitClaim;
                    return;
                }
            }
        }
    }

    fn end_condition_met(&self) -> bool {
        match self.config.end_condition {
            EndCondition::RoundLimit(n) => self.turns_completed >= n * self.teams.len() as u32,
            EndCondition::Deadline(ms) => self.clock_ms.saturating_sub(self.started_ms) >= ms,
            EndCondition::TargetScore(s) => self.teams.iter().any(|t| t.sheet.total() >= s),
        }
    }

    fn check_end(&mut self) -> bool {
        if self.phase == Phase::Ended {
            return true;
        }
        if !self.end_condition_met() {
            return false;
        }
        let standings = self.standings();
        self.emit(EventBody::GameEnded { standings });
        self.phase = Phase::Ended;
        true
    }

    /// Resolves the landing box's effect (if any), then hands the turn on.
    /// Pauses in `AwaitConcept` when a no-dice box needs the imposed concept.
    fn close_turn(&mut self) {
        if let Some(effect) = self.turn.special.take() {
            if self.resolve_special(effect) {
                return;
            }
        }
        let team = self.active_id();
        self.emit(EventBody::TurnEnded { team });
        self.turns_completed += 1;
        if self.check_end() {
            return;
        }
        let next = if self.turn.play_again || self.turn.extra_turn {
            self.active
        } else {
            self.next_index(self.active)
        };
        self.begin_turn(next);
    }

    /// Applies a special box at the end of the landing team's turn. Returns
    /// `true` when the turn must wait for the imposed-concept choice.
    fn resolve_special(&mut self, effect: SpecialEffect) -> bool {
        let team = self.active_id();
        let target_idx = self.next_index(self.active);
        let target = self.teams[target_idx].id.clone();
        let (target, pause) = match effect {
            SpecialEffect::Joker => (None, false),
            SpecialEffect::ReverseDirection => {
                self.direction = self.direction.flip();
                self.turn.play_again = true;
                (None, false)
            }
            SpecialEffect::Late => {
                self.pending.push_back(PendingEffect {
                    target: target.clone(),
                    effect: DeferredEffect::Skip(SkipReason::Late),
                });
                (Some(target), false)
            }
            SpecialEffect::KeyPoint(kind) => {
                self.pending.push_back(PendingEffect {
                    target: target.clone(),
                    effect: DeferredEffect::KeyPoint(kind),
                });
                (Some(target), false)
            }
            SpecialEffect::NoDice => {
                self.turn.imposing_for = Some(target.clone());
                self.phase = Phase::AwaitConcept;
                (Some(target), true)
            }
        };
        self.emit(EventBody::SpecialTriggered {
            team,
            effect,
            target,
            direction: self.direction,
        });
        pause
    }

    fn land(&mut self, at: BoxId) {
        self.turn.landed = Some(at);
        match self.ctx.board.kind(at).cloned() {
            Some(BoxKind::Concept(c)) => {
                self.turn.concept = Some(c);
                self.enter_claim();
            }
            Some(BoxKind::Special(e)) => {
                self.turn.special = Some(e);
                self.phase = Phase::AwaitConcept;
            }
            _ => self.phase = Phase::AwaitConcept,
        }
    }

    fn enter_claim(&mut self) {
        self.turn.gamification_due =
            self.config.gamification_dice && self.turn.gamification_roll.is_none();
        self.phase = Phase::AwaitClaim;
    }

    // --- operations --------------------------------------------------------

    pub fn determine_first_team(&mut self, dice: u8, input: ResolutionInput) -> Result<(), EngineError> {
        self.expect_phase(Phase::AwaitFirstTeam, "await_first_team")?;
        if !(1..=6).contains(&dice) {
            return Err(EngineError::DiceOutOfRange(dice));
        }
        let team = first_team::resolve(dice, &self.teams, &input)?;
        let idx = self.index_of(&team).expect("resolver returns a seated team");
        self.emit(EventBody::FirstTeamChosen {
            choice: FirstTeamChoice::Dice { dice, input },
            team,
        });
        self.begin_turn(idx);
        Ok(())
    }

    /// Rolls the die for the active team and returns the value with the
    /// destinations it offers.
    pub fn take_roll(&mut self) -> Result<(u8, BTreeSet<BoxId>), EngineError> {
        self.expect_phase(Phase::AwaitRoll, "await_roll")?;
        let value = self.rng.die();
        let from = self.teams[self.active].pawn;
        let offered = legal_destinations(&self.ctx.board, from, u32::from(value))
            .expect("die values are in range and pawns are on the board");
        self.turn.fresh = false;
        self.turn.dice = Some(value);
        self.turn.offered = offered.clone();
        self.phase = Phase::AwaitDestination;
        let team = self.active_id();
        self.emit(EventBody::DiceRolled {
            team,
            value,
            destinations: offered.iter().copied().collect(),
        });
        Ok((value, offered))
    }

    pub fn move_pawn(&mut self, destination: BoxId) -> Result<(), EngineError> {
        self.expect_phase(Phase::AwaitDestination, "await_destination")?;
        if !self.turn.offered.contains(&destination) {
            return Err(EngineError::DestinationNotOffered(destination));
        }
        self.teams[self.active].pawn = destination;
        let team = self.active_id();
        self.emit(EventBody::DestinationChosen { team, destination });
        self.land(destination);
        Ok(())
    }

    /// Fixes the concept on a color, start or special box. While a no-dice
    /// effect is being resolved, fixes the concept imposed on the next team.
    pub fn choose_concept(&mut self, concept: ConceptId) -> Result<(), EngineError> {
        self.expect_phase(Phase::AwaitConcept, "await_concept")?;
        if !self.claimable_concepts().contains(&concept) {
            return Err(EngineError::ConceptNotClaimable(concept));
        }
        self.turn.fresh = false;
        let by = self.active_id();
        if let Some(target) = self.turn.imposing_for.take() {
            self.pending.push_back(PendingEffect {
                target: target.clone(),
                effect: DeferredEffect::Impose(concept.clone()),
            });
            self.emit(EventBody::ConceptImposed { by, target, concept });
            self.close_turn();
        } else {
            self.turn.concept = Some(concept.clone());
            self.emit(EventBody::ConceptChosen { team: by, concept });
            self.enter_claim();
        }
        Ok(())
    }

    /// Rolls the gamification die from the game's generator and applies it.
    pub fn roll_gamification(&mut self) -> Result<u8, EngineError> {
        self.check_gamification()?;
        let roll = self.rng.die();
        self.apply_gamification(roll, true);
        Ok(roll)
    }

    /// Applies a gamification die thrown outside the engine (a physical die).
    pub fn apply_gamification_roll(&mut self, roll: u8) -> Result<(), EngineError> {
        self.check_gamification()?;
        if !(1..=6).contains(&roll) {
            return Err(EngineError::DiceOutOfRange(roll));
        }
        self.apply_gamification(roll, false);
        Ok(())
    }

    fn check_gamification(&self) -> Result<(), EngineError> {
        if !self.config.gamification_dice {
            return Err(EngineError::GamificationDisabled);
        }
        self.expect_phase(Phase::AwaitClaim, "await_claim")?;
        if !self.turn.gamification_due {
            return Err(EngineError::GamificationAlreadyRolled);
        }
        Ok(())
    }

    fn apply_gamification(&mut self, roll: u8, from_rng: bool) {
        self.turn.fresh = false;
        self.turn.gamification_due = false;
        self.turn.gamification_roll = Some(roll);
        let team = self.active_id();
        let outcome = match roll {
            1 => {
                self.teams[self.active].sheet.bonus -= 1;
                GamificationOutcome::Penalty
            }
            2 => {
                self.turn.extra_turn = true;
                GamificationOutcome::ExtraTurn
            }
            3 => {
                let current = self.turn.concept.clone().expect("concept is fixed in await_claim");
                let next = self
                    .ctx
                    .catalog
                    .next_in_family(&current)
                    .cloned()
                    .unwrap_or(current);
                self.turn.concept = Some(next.clone());
                GamificationOutcome::NextConcept { concept: next }
            }
            4 => GamificationOutcome::Forfeit,
            5 => {
                let dice = [self.rng.die(), self.rng.die()];
                let steps = u32::from(dice[0] + dice[1]);
                let from = self.turn.start_box;
                let offered = self
                    .ctx
                    .board
                    .walk_endpoints(from, steps)
                    .expect("turn start box is on the board");
                self.teams[self.active].pawn = from;
                self.turn.landed = None;
                self.turn.concept = None;
                self.turn.imposed = false;
                self.turn.special = None;
                self.turn.offered = offered.clone();
                self.phase = Phase::AwaitDestination;
                GamificationOutcome::Remove {
                    dice,
                    destinations: offered.into_iter().collect(),
                }
            }
            _ => {
                self.turn.double_point1 = true;
                GamificationOutcome::DoublePoint1
            }
        };
        let forfeit = outcome == GamificationOutcome::Forfeit;
        self.emit(EventBody::GamificationRolled {
            team,
            roll,
            from_rng,
            outcome,
        });
        if forfeit {
            self.close_turn();
        }
    }

    pub fn submit_claim(&mut self, claim: Claim) -> Result<(), EngineError> {
        self.expect_phase(Phase::AwaitClaim, "await_claim")?;
        if self.turn.gamification_due {
            return Err(EngineError::GamificationPending);
        }
        let reject = |msg: String| Err(EngineError::ClaimRejected(msg));
        if Some(&claim.concept) != self.turn.concept.as_ref() {
            return reject(format!("concept `{}` is not the concept of this turn", claim.concept));
        }
        if !self.config.software_boards.contains(&claim.software_board) {
            return reject(format!(
                "software board `{}` is not part of this game",
                claim.software_board
            ));
        }
        let Some(sb) = self.ctx.software_board(&claim.software_board) else {
            return reject(format!("unknown software board `{}`", claim.software_board));
        };
        if !sb.is_compatible(self.variant()) {
            return reject(format!(
                "software board `{}` is not compatible with the {} board",
                sb.id,
                self.variant()
            ));
        }
        if !sb.resolves(&claim.screen, claim.region.as_deref()) {
            return reject(format!(
                "unknown screen/region `{}`/{}",
                claim.screen,
                claim.region.as_deref().unwrap_or("*")
            ));
        }
        if claim.rationale.trim().is_empty() {
            return reject("a rationale is required".into());
        }
        let has_solution = claim.solution.as_deref().is_some_and(|s| !s.trim().is_empty());
        match claim.kind {
            ClaimKind::Violation if !has_solution => {
                return reject("a violation claim needs a proposed solution".into())
            }
            ClaimKind::CorrectApplication if claim.solution.is_some() => {
                return reject("a correct-application claim carries no solution".into())
            }
            _ => {}
        }
        if let Some(third) = &claim.third_point {
            if self.config.third_point_mode == ThirdPointMode::Off {
                return reject("third points are off in this game".into());
            }
            if !self.ctx.catalog.contains(&third.concept) {
                return reject(format!("unknown third-point concept `{}`", third.concept));
            }
            if self.config.third_point_mode == ThirdPointMode::RelatedConcept && third.concept == claim.concept {
                return reject("the related concept must differ from the studied one".into());
            }
            if third.text.trim().is_empty() {
                return reject("the third point needs an explanation".into());
            }
        }
        self.turn.fresh = false;
        self.turn.claim = Some(claim.clone());
        self.phase = Phase::AwaitVerdict;
        let team = self.active_id();
        self.emit(EventBody::ClaimSubmitted { team, claim });
        Ok(())
    }

    /// The opposing teams' answer on each point of the pending claim.
    pub fn submit_verdict(&mut self, verdict: Verdict) -> Result<(), EngineError> {
        self.expect_phase(Phase::AwaitVerdict, "await_verdict")?;
        let claim = self.turn.claim.clone().expect("claim is set in await_verdict");
        let reject = |msg: &str| Err(EngineError::VerdictRejected(msg.to_owned()));
        if claim.kind == ClaimKind::CorrectApplication && verdict.point2_accepted {
            return reject("a correct-application claim cannot earn the second point");
        }
        let point3 = verdict.point3_accepted.unwrap_or(false);
        if point3 && self.config.third_point_mode == ThirdPointMode::Off {
            return reject("third points are off in this game");
        }
        if point3 && claim.third_point.is_none() {
            return reject("the claim has no third-point argument");
        }
        if verdict.escalate && (verdict.point1_accepted || verdict.point2_accepted) {
            return reject("an escalated verdict leaves points 1 and 2 to the referee");
        }

        let violation = claim.kind == ClaimKind::Violation;
        let joker = violation && self.turn.special == Some(SpecialEffect::Joker);
        let mut award = Award::default();
        if point3 {
            award.point3 = 1;
        }
        let mut joker_applied = false;
        if !verdict.escalate {
            if verdict.point1_accepted {
                award.point1 = if self.turn.double_point1 { 2 } else { 1 };
            }
            if violation && (verdict.point2_accepted || joker) {
                award.point2 = 1;
                joker_applied = !verdict.point2_accepted;
            }
        }

        let key = self.sheet_key(&claim.concept);
        let sheet = &mut self.teams[self.active].sheet;
        sheet.tick(&key, award.point1 + award.point2);
        if let Some(third) = &claim.third_point {
            let third_key = match self.ctx.board.variant() {
                Variant::Multicolored => self
                    .ctx
                    .catalog
                    .concept(&third.concept)
                    .map(|c| c.family.0.clone())
                    .unwrap_or_default(),
                _ => third.concept.0.clone(),
            };
            self.teams[self.active].sheet.tick(&third_key, award.point3);
        }

        let team = self.active_id();
        self.emit(EventBody::VerdictGiven {
            team,
            verdict,
            award,
            joker_applied,
        });
        if verdict.escalate {
            self.phase = Phase::AwaitRuling;
        } else {
            self.close_turn();
        }
        Ok(())
    }

    /// The game master's arbitration: the disputed pair is doubled and goes
    /// to one team as bonus.
    pub fn referee_ruling(&mut self, ruling: RefereeRuling) -> Result<(), EngineError> {
        self.expect_phase(Phase::AwaitRuling, "await_ruling")?;
        let idx = self
            .index_of(&ruling.pair_awarded_to)
            .ok_or_else(|| EngineError::UnknownTeam(ruling.pair_awarded_to.clone()))?;
        let claim = self.turn.claim.as_ref().expect("claim is set in await_ruling");
        let bonus = match claim.kind {
            ClaimKind::Violation => 4,
            ClaimKind::CorrectApplication => 2,
        };
        self.teams[idx].sheet.bonus += bonus;
        self.emit(EventBody::RefereeRuled {
            awarded_to: ruling.pair_awarded_to,
            bonus,
            note: ruling.note,
        });
        self.close_turn();
        Ok(())
    }

    /// Outcome of a key-point challenge, as judged by the challenged team's
    /// opponents or the game master.
    pub fn resolve_key_point(&mut self, passed: bool) -> Result<(), EngineError> {
        self.expect_phase(Phase::AwaitKeyPoint, "await_key_point")?;
        let team = self.active_id();
        let key_point = self.turn.key_point.expect("key point is set in await_key_point");
        self.emit(EventBody::KeyPointResolved {
            team: team.clone(),
            key_point,
            passed,
        });
        if passed {
            self.turn.key_point = None;
            self.phase = Phase::AwaitRoll;
        } else {
            self.emit(EventBody::TurnSkipped {
                team,
                reason: SkipReason::KeyPoint,
            });
            self.turns_completed += 1;
            if !self.check_end() {
                let next = self.next_index(self.active);
                self.begin_turn(next);
            }
        }
        Ok(())
    }

    /// Checks the end condition between turns and reports standings. Ends the
    /// game (logging `GameEnded` once) when the condition holds at a turn
    /// boundary, e.g. a deadline that passed while a team was about to roll.
    pub fn end_and_score(&mut self) -> (GameStatus, Vec<Standing>) {
        if self.phase != Phase::Ended && self.turn.fresh && self.phase != Phase::AwaitFirstTeam {
            self.check_end();
        }
        let status = if self.phase == Phase::Ended {
            GameStatus::Ended
        } else {
            GameStatus::Ongoing
        };
        (status, self.standings())
    }
}

fn sheet_keys(ctx: &GameContext) -> Vec<String> {
    let cat = &ctx.catalog;
    match ctx.board.variant().color() {
        Some(color) => cat
            .concepts_of(&cat.family_by_color(color).id)
            .unwrap_or_default()
            .into_iter()
            .map(|c| c.id.0.clone())
            .collect(),
        None => cat.families().iter().map(|f| f.id.0.clone()).collect(),
    }
}
