//! One game session: seats and roles, the engine state, the envelope log and
//! end-of-game feedback. Every method runs under the session's lock, so the
//! engine sees one writer at a time.

use std::collections::BTreeMap;
use std::path::Path;

use jade_core::bundled::DataSet;
use jade_core::engine::{
    replay, EndCondition, EngineError, EventBody, GameContext, GameEvent, GameState, Phase, RefereeRuling, TeamId,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::feedback::{DebriefRecord, QuestionnaireResponse};
use crate::protocol::*;
use crate::store::{self, Record, SessionHeader, SessionStore, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredQuestionnaire {
    pub actor: String,
    pub response: QuestionnaireResponse,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    header: SessionHeader,
    game: GameState,
    status: SessionStatus,
    read_only: bool,
    claimed: Vec<Option<String>>,
    game_master: Option<String>,
    envelopes: Vec<SessionEnvelope>,
    votes: BTreeMap<TeamId, TeamId>,
    questionnaires: Vec<StoredQuestionnaire>,
    debrief: Option<DebriefRecord>,
    store: Option<SessionStore>,
}

fn invalid(msg: impl Into<String>) -> Rejection {
    Rejection::new(ErrorCode::Invalid, msg)
}

fn engine_rejection(e: EngineError) -> Rejection {
    match e {
        EngineError::WrongPhase { .. } => Rejection::new(ErrorCode::IllegalPhase, e.to_string()),
        EngineError::GamificationPending | EngineError::GamificationAlreadyRolled => {
            Rejection::new(ErrorCode::IllegalPhase, e.to_string())
        }
        other => invalid(other.to_string()),
    }
}

fn storage(e: StoreError) -> Rejection {
    Rejection::new(ErrorCode::Storage, e.to_string())
}

impl Session {
    /// Builds a new session in the lobby. `ids` supplies the session id and
    /// then one token per seat plus the game-master token.
    pub fn create(
        data: &DataSet,
        request: CreateSession,
        now_ms: u64,
        mut ids: impl FnMut() -> String,
        dir: Option<&Path>,
    ) -> Result<Self, Rejection> {
        let ctx = GameContext::from_data(data, &request.config.board)
            .ok_or_else(|| invalid(format!("unknown board `{}`", request.config.board)))?;
        let game = GameState::new_at(request.config.clone(), request.teams.clone(), ctx, now_ms)
            .map_err(|e| invalid(e.to_string()))?;
        let session_id = ids();
        let mut seats = Vec::new();
        for t in &request.teams {
            for p in &t.players {
                seats.push(SeatToken {
                    seat: seats.len(),
                    team: t.id.clone(),
                    player: p.display_name.clone(),
                    token: ids(),
                });
            }
        }
        let header = SessionHeader {
            session_id: session_id.clone(),
            created_ms: now_ms,
            request,
            seats,
            game_master_token: ids(),
        };
        let store = dir
            .map(|d| SessionStore::create(d, &header))
            .transpose()
            .map_err(storage)?;
        let mut s = Self::empty(header, game, store);
        let created: Vec<GameEvent> = s.game.events().to_vec();
        s.push_events("server", &created)?;
        Ok(s)
    }

    fn empty(header: SessionHeader, game: GameState, store: Option<SessionStore>) -> Self {
        Self {
            id: header.session_id.clone(),
            claimed: vec![None; header.seats.len()],
            header,
            game,
            status: SessionStatus::Lobby,
            read_only: false,
            game_master: None,
            envelopes: Vec::new(),
            votes: BTreeMap::new(),
            questionnaires: Vec::new(),
            debrief: None,
            store,
        }
    }

    /// Rebuilds a session from its file. Returns the session and any
    /// warnings about dropped records.
    pub fn restore(data: &DataSet, path: &Path) -> Result<(Self, Vec<String>), String> {
        let (loaded, valid_len) = store::load(path).map_err(|e| e.to_string())?;
        let header = loaded.header;
        let ctx = GameContext::from_data(data, &header.request.config.board)
            .ok_or_else(|| format!("unknown board `{}`", header.request.config.board))?;
        let events: Vec<GameEvent> = loaded.envelopes.iter().filter_map(SessionEnvelope::event).collect();
        let game = replay(&events, ctx).map_err(|e| format!("{}: {e}", path.display()))?;

        let mut s = Self::empty(header, game, None);
        for env in &loaded.envelopes {
            s.absorb(env)?;
        }
        s.envelopes = loaded.envelopes;
        let mut warnings = loaded.warnings;
        if s.game.is_ended() {
            s.status = SessionStatus::Ended;
            s.read_only = true;
        } else {
            s.store = Some(SessionStore::reopen(path, valid_len).map_err(|e| e.to_string())?);
            // A crash may have cut an action's consequences short; the replay
            // recomputed them, so log them now.
            let missing: Vec<GameEvent> = s.game.events()[events.len()..].to_vec();
            if !missing.is_empty() {
                warnings.push(format!("re-logged {} event(s) lost in the crash", missing.len()));
                let actor = s.envelopes.last().map_or("server".to_owned(), |e| e.actor.clone());
                s.push_events(&actor, &missing).map_err(|r| r.message)?;
            }
        }
        Ok((s, warnings))
    }

    // Applies the role-table side of a logged envelope.
    fn absorb(&mut self, env: &SessionEnvelope) -> Result<(), String> {
        let bad = |what: &str| format!("envelope {}: bad {what} payload", env.seq);
        match env.kind.as_str() {
            "joined" => {
                let name = env.payload["display_name"].as_str().unwrap_or_default().to_owned();
                match env.payload["role"].as_str() {
                    Some("game_master") => self.game_master = Some(name),
                    Some("player") => {
                        let seat = env.payload["seat"].as_u64().ok_or_else(|| bad("joined"))? as usize;
                        *self.claimed.get_mut(seat).ok_or_else(|| bad("joined"))? = Some(name);
                    }
                    _ => return Err(bad("joined")),
                }
            }
            "started" => self.status = SessionStatus::Playing,
            "vote" => {
                let voter: TeamId = serde_json::from_value(env.payload["voter"].clone()).map_err(|_| bad("vote"))?;
                let team: TeamId = serde_json::from_value(env.payload["team"].clone()).map_err(|_| bad("vote"))?;
                self.votes.insert(voter, team);
            }
            "event" => {
                if let Some(e) = env.event() {
                    if matches!(e.body, EventBody::RefereeRuled { .. }) {
                        self.votes.clear();
                    }
                }
            }
            "questionnaire" => {
                let response = serde_json::from_value(env.payload.clone()).map_err(|_| bad("questionnaire"))?;
                self.questionnaires.push(StoredQuestionnaire {
                    actor: env.actor.clone(),
                    response,
                });
            }
            "debrief" => {
                self.debrief = Some(serde_json::from_value(env.payload.clone()).map_err(|_| bad("debrief"))?)
            }
            other => return Err(format!("envelope {}: unknown kind `{other}`", env.seq)),
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn created(&self) -> SessionCreated {
        SessionCreated {
            session_id: self.id.clone(),
            seats: self.header.seats.clone(),
            game_master_token: self.header.game_master_token.clone(),
        }
    }

    pub fn game(&self) -> &GameState {
        &self.game
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn is_read_only(&self) -> bool {
        self.read_only
    }

    pub fn envelopes(&self) -> &[SessionEnvelope] {
        &self.envelopes
    }

    pub fn envelopes_after(&self, after: Option<u64>) -> &[SessionEnvelope] {
        let from = after.map_or(0, |a| (a + 1) as usize).min(self.envelopes.len());
        &self.envelopes[from..]
    }

    pub fn questionnaires(&self) -> &[StoredQuestionnaire] {
        &self.questionnaires
    }

    pub fn debrief(&self) -> Option<&DebriefRecord> {
        self.debrief.as_ref()
    }

    fn push(&mut self, actor: &str, kind: &str, payload: Value) -> Result<SessionEnvelope, Rejection> {
        let env = SessionEnvelope {
            session_id: self.id.clone(),
            seq: self.envelopes.len() as u64,
            actor: actor.to_owned(),
            kind: kind.to_owned(),
            payload,
        };
        if let Some(store) = &mut self.store {
            store.append(&Record::Envelope(env.clone())).map_err(storage)?;
        }
        self.envelopes.push(env.clone());
        Ok(env)
    }

    fn push_events(&mut self, actor: &str, events: &[GameEvent]) -> Result<Vec<SessionEnvelope>, Rejection> {
        events
            .iter()
            .map(|e| self.push(actor, "event", serde_json::to_value(e).expect("events serialize")))
            .collect()
    }

    /// The role bound to `token`, whether or not it has been claimed yet.
    fn role_of(&self, token: &str) -> Option<Role> {
        if token == self.header.game_master_token {
            return Some(Role::GameMaster);
        }
        self.header
            .seats
            .iter()
            .find(|s| s.token == token)
            .map(|s| Role::Player {
                team: s.team.clone(),
                seat: s.seat,
            })
    }

    fn is_claimed(&self, role: &Role) -> bool {
        match role {
            Role::GameMaster => self.game_master.is_some(),
            Role::Player { seat, .. } => self.claimed[*seat].is_some(),
        }
    }

    /// Claims the seat behind `token`. With `resume`, an already claimed
    /// seat is re-attached instead of refused.
    pub fn join(
        &mut self,
        token: &str,
        display_name: &str,
        resume: bool,
    ) -> Result<(Role, Vec<SessionEnvelope>), Rejection> {
        let role = self
            .role_of(token)
            .ok_or_else(|| Rejection::new(ErrorCode::BadToken, "unknown join token"))?;
        if self.is_claimed(&role) {
            return if resume {
                Ok((role, Vec::new()))
            } else {
                Err(Rejection::new(ErrorCode::TokenClaimed, "this token was already used"))
            };
        }
        if self.read_only || self.status == SessionStatus::Ended {
            return Err(Rejection::new(ErrorCode::SessionEnded, "the session has ended"));
        }
        let name = if display_name.trim().is_empty() {
            match &role {
                Role::GameMaster => "Game master".to_owned(),
                Role::Player { seat, .. } => self.header.seats[*seat].player.clone(),
            }
        } else {
            display_name.trim().to_owned()
        };
        let payload = match &role {
            Role::GameMaster => json!({"role": "game_master", "display_name": name}),
            Role::Player { team, seat } => json!({"role": "player", "seat": seat, "team": team, "display_name": name}),
        };
        let env = self.push(&role.actor(), "joined", payload)?;
        match &role {
            Role::GameMaster => self.game_master = Some(name),
            Role::Player { seat, .. } => self.claimed[*seat] = Some(name),
        }
        Ok((role, vec![env]))
    }

    /// Resolves a token that must already have joined.
    pub fn member(&self, token: &str) -> Result<Role, Rejection> {
        let role = self
            .role_of(token)
            .ok_or_else(|| Rejection::new(ErrorCode::BadToken, "unknown token"))?;
        if !self.is_claimed(&role) {
            return Err(Rejection::new(ErrorCode::NotJoined, "join the session first"));
        }
        Ok(role)
    }

    fn team_of(role: &Role) -> Option<&TeamId> {
        match role {
            Role::Player { team, .. } => Some(team),
            Role::GameMaster => None,
        }
    }

    fn check_actor(&self, role: &Role, action: &Action) -> Result<(), Rejection> {
        let active = self.game.active_team().id.clone();
        let mine = Self::team_of(role);
        let wrong = |msg: &str| Err(Rejection::new(ErrorCode::WrongActor, msg));
        match action {
            Action::Start | Action::FirstTeam { .. } | Action::EndCheck => Ok(()),
            Action::Roll
            | Action::Move { .. }
            | Action::ChooseConcept { .. }
            | Action::Gamification { .. }
            | Action::Claim { .. } => {
                if mine == Some(&active) && self.game.phase() != Phase::AwaitFirstTeam {
                    Ok(())
                } else {
                    wrong("only the playing team may do this")
                }
            }
            Action::Verdict { .. } => match mine {
                Some(t) if *t != active => Ok(()),
                _ => wrong("only an opposing team may judge a claim"),
            },
            Action::Ruling { .. } => match role {
                Role::GameMaster => Ok(()),
                _ => wrong("only the game master may rule"),
            },
            Action::Vote { .. } => {
                if self.game_master.is_some() {
                    return wrong("the game master rules on disputes in this session");
                }
                match mine {
                    Some(t) if *t != active => Ok(()),
                    _ => wrong("only non-playing teams vote"),
                }
            }
            Action::KeyPoint { .. } => match mine {
                Some(t) if *t == active => wrong("the challenged team cannot judge its own answer"),
                _ => Ok(()),
            },
        }
    }

    /// Validates and applies an action. On rejection nothing changes.
    pub fn act(&mut self, token: &str, action: Action, now_ms: u64) -> Result<Vec<SessionEnvelope>, Rejection> {
        let role = self.member(token)?;
        if self.read_only || self.status == SessionStatus::Ended {
            return Err(Rejection::new(ErrorCode::SessionEnded, "the session has ended"));
        }
        let actor = role.actor();
        if let Action::Start = action {
            if self.status != SessionStatus::Lobby {
                return Err(Rejection::new(ErrorCode::IllegalPhase, "the session already started"));
            }
            let env = self.push(&actor, "started", json!({}))?;
            self.status = SessionStatus::Playing;
            return Ok(vec![env]);
        }
        if self.status == SessionStatus::Lobby {
            return Err(Rejection::new(ErrorCode::IllegalPhase, "the session has not started"));
        }
        self.check_actor(&role, &action)?;

        let mut next = self.game.clone();
        next.set_clock(now_ms);
        let mut pre = Vec::new();
        match action {
            Action::Start => unreachable!("handled above"),
            Action::FirstTeam { dice, input } => next.determine_first_team(dice, input).map_err(engine_rejection)?,
            Action::Roll => {
                next.take_roll().map_err(engine_rejection)?;
            }
            Action::Move { destination } => next.move_pawn(destination).map_err(engine_rejection)?,
            Action::ChooseConcept { concept } => next.choose_concept(concept).map_err(engine_rejection)?,
            Action::Gamification { roll: Some(r) } => next.apply_gamification_roll(r).map_err(engine_rejection)?,
            Action::Gamification { roll: None } => {
                next.roll_gamification().map_err(engine_rejection)?;
            }
            Action::Claim { claim } => next.submit_claim(claim).map_err(engine_rejection)?,
            Action::Verdict { verdict } => next.submit_verdict(verdict).map_err(engine_rejection)?,
            Action::Ruling { awarded_to, note } => next
                .referee_ruling(RefereeRuling {
                    pair_awarded_to: awarded_to,
                    note,
                })
                .map_err(engine_rejection)?,
            Action::KeyPoint { passed } => next.resolve_key_point(passed).map_err(engine_rejection)?,
            Action::EndCheck => {
                next.end_and_score();
            }
            Action::Vote { team } => {
                if next.phase() != Phase::AwaitRuling {
                    return Err(Rejection::new(ErrorCode::IllegalPhase, "no dispute is waiting for a vote"));
                }
                if next.team(&team).is_none() {
                    return Err(invalid(format!("unknown team `{team}`")));
                }
                let voter = Self::team_of(&role).expect("voters are players").clone();
                if self.votes.contains_key(&voter) {
                    return Err(invalid(format!("team `{voter}` already voted")));
                }
                let mut votes = self.votes.clone();
                votes.insert(voter.clone(), team.clone());
                pre.push(("vote", json!({"voter": voter, "team": team})));
                if let Some(winner) = self.majority(&votes) {
                    next.referee_ruling(RefereeRuling {
                        pair_awarded_to: winner,
                        note: "majority vote".into(),
                    })
                    .map_err(engine_rejection)?;
                }
            }
        }
        if matches!(next.config().end_condition, EndCondition::Deadline(_)) {
            next.end_and_score();
        }

        let mut out = Vec::new();
        for (kind, payload) in pre {
            let env = self.push(&actor, kind, payload.clone())?;
            if kind == "vote" {
                let voter: TeamId = serde_json::from_value(payload["voter"].clone()).expect("just built");
                let team: TeamId = serde_json::from_value(payload["team"].clone()).expect("just built");
                self.votes.insert(voter, team);
            }
            out.push(env);
        }
        let fresh: Vec<GameEvent> = next.events()[self.game.events().len()..].to_vec();
        self.game = next;
        if fresh.iter().any(|e| matches!(e.body, EventBody::RefereeRuled { .. })) {
            self.votes.clear();
        }
        out.extend(self.push_events(&actor, &fresh)?);
        if self.game.is_ended() {
            self.status = SessionStatus::Ended;
        }
        Ok(out)
    }

    /// Winner once every non-playing team has voted: most votes, ties to the
    /// earliest seat.
    fn majority(&self, votes: &BTreeMap<TeamId, TeamId>) -> Option<TeamId> {
        let active = &self.game.active_team().id;
        let voters = self.game.teams().iter().filter(|t| t.id != *active).count();
        if votes.len() < voters {
            return None;
        }
        let mut best: Option<(usize, TeamId)> = None;
        for t in self.game.teams() {
            let n = votes.values().filter(|v| **v == t.id).count();
            if best.as_ref().is_none_or(|(m, _)| n > *m) {
                best = Some((n, t.id.clone()));
            }
        }
        best.map(|(_, t)| t)
    }

    pub fn submit_questionnaire(
        &mut self,
        token: &str,
        response: QuestionnaireResponse,
    ) -> Result<Vec<SessionEnvelope>, Rejection> {
        let role = self.member(token)?;
        if self.read_only {
            return Err(Rejection::new(ErrorCode::SessionEnded, "this session is read-only"));
        }
        if self.status != SessionStatus::Ended {
            return Err(Rejection::new(ErrorCode::IllegalPhase, "questionnaires open when the game ends"));
        }
        let actor = role.actor();
        if !matches!(role, Role::Player { .. }) {
            return Err(Rejection::new(ErrorCode::WrongActor, "questionnaires are for players"));
        }
        let missing = response.missing();
        if !missing.is_empty() {
            return Err(invalid(format!("unanswered: {}", missing.join(", "))));
        }
        if self.questionnaires.iter().any(|q| q.actor == actor) {
            return Err(invalid("this seat already answered"));
        }
        let env = self.push(&actor, "questionnaire", serde_json::to_value(&response).expect("serializes"))?;
        self.questionnaires.push(StoredQuestionnaire { actor, response });
        Ok(vec![env])
    }

    pub fn record_debrief(&mut self, token: &str, record: DebriefRecord) -> Result<Vec<SessionEnvelope>, Rejection> {
        let role = self.member(token)?;
        if self.read_only {
            return Err(Rejection::new(ErrorCode::SessionEnded, "this session is read-only"));
        }
        if role != Role::GameMaster {
            return Err(Rejection::new(ErrorCode::WrongActor, "only the game master records the debrief"));
        }
        let missing = record.missing();
        if !missing.is_empty() {
            return Err(invalid(format!("missing dimensions: {}", missing.join(", "))));
        }
        if self.debrief.is_some() {
            return Err(invalid("the debrief was already recorded"));
        }
        let env = self.push(&role.actor(), "debrief", serde_json::to_value(&record).expect("serializes"))?;
        self.debrief = Some(record);
        Ok(vec![env])
    }

    pub fn snapshot(&self) -> Snapshot {
        let g = &self.game;
        let teams = g
            .teams()
            .iter()
            .map(|t| TeamView {
                id: t.id.clone(),
                name: t.name.clone(),
                pawn: t.pawn,
                sheet: g.export_score_sheet(&t.id).expect("team exists"),
            })
            .collect();
        let active_team = match g.phase() {
            Phase::AwaitFirstTeam | Phase::Ended => None,
            _ => Some(g.active_team().id.clone()),
        };
        Snapshot {
            session_id: self.id.clone(),
            status: self.status,
            read_only: self.read_only,
            next_seq: self.envelopes.len() as u64,
            config: g.config().clone(),
            game: GameView {
                board: g.context().board.id().to_owned(),
                variant: g.context().board.variant(),
                phase: g.phase(),
                direction: g.direction(),
                active_team,
                round: g.round(),
                turns_completed: g.turns_completed(),
                teams,
                turn: g.turn().clone(),
                pending: g.pending_effects().iter().cloned().collect(),
                claimable_concepts: g.claimable_concepts().into_iter().collect(),
                key_point: g.turn().key_point,
                rng_state: g.rng().state(),
                events: g.events().len(),
            },
            seats: self
                .header
                .seats
                .iter()
                .map(|s| SeatView {
                    seat: s.seat,
                    team: s.team.clone(),
                    player: s.player.clone(),
                    claimed_by: self.claimed[s.seat].clone(),
                })
                .collect(),
            game_master: self.game_master.clone(),
            votes: self.votes.clone(),
            questionnaires: self.questionnaires.len(),
            debrief_recorded: self.debrief.is_some(),
        }
    }
}
