use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::board::{BoxId, SpecialEffect, Variant};
use crate::catalog::{ConceptId, KeyPointKind};

use super::first_team::ResolutionInput;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeamId(pub String);

impl TeamId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TeamId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BirthDate {
    pub day: u8,
    pub month: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Player {
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth: Option<BirthDate>,
}

impl Player {
    pub fn named(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            first_name: Some(name.clone()),
            display_name: name,
            birth: None,
        }
    }

    pub fn born(mut self, day: u8, month: u8) -> Self {
        self.birth = Some(BirthDate { day, month });
        self
    }
}

/// Who plays: the part of a team fixed before the game starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamSetup {
    pub id: TeamId,
    pub name: String,
    pub players: Vec<Player>,
}

impl TeamSetup {
    pub fn new(id: impl Into<String>, players: Vec<Player>) -> Self {
        let id = id.into();
        Self {
            name: format!("Team {id}"),
            id: TeamId(id),
            players,
        }
    }
}

/// Tick counts per concept (per family on the multicolored board) plus bonus.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoreSheet {
    pub ticks: BTreeMap<String, u32>,
    pub bonus: i32,
}

impl ScoreSheet {
    pub fn points(&self) -> u32 {
        self.ticks.values().sum()
    }

    pub fn total(&self) -> i64 {
        i64::from(self.points()) + i64::from(self.bonus)
    }

    pub(crate) fn tick(&mut self, key: &str, n: u32) {
        if n > 0 {
            *self.ticks.entry(key.to_owned()).or_insert(0) += n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Team {
    pub id: TeamId,
    pub name: String,
    pub players: Vec<Player>,
    pub pawn: BoxId,
    pub sheet: ScoreSheet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndCondition {
    RoundLimit(u32),
    /// Wall-clock budget in milliseconds, measured on the game clock.
    Deadline(u64),
    TargetScore(i64),
}

impl Default for EndCondition {
    fn default() -> Self {
        EndCondition::RoundLimit(10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdPointMode {
    #[default]
    Off,
    RelatedConcept,
    InducedProblem,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstTeamMethod {
    /// Roll the die and apply the matching playful rule.
    #[default]
    Auto,
    Fixed(TeamId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub board: String,
    pub software_boards: Vec<String>,
    #[serde(default)]
    pub end_condition: EndCondition,
    #[serde(default)]
    pub third_point_mode: ThirdPointMode,
    #[serde(default)]
    pub first_team_method: FirstTeamMethod,
    #[serde(default)]
    pub gamification_dice: bool,
    #[serde(default)]
    pub rng_seed: u64,
}

impl GameConfig {
    pub fn new(board: impl Into<String>, software_boards: Vec<String>) -> Self {
        Self {
            board: board.into(),
            software_boards,
            end_condition: EndCondition::default(),
            third_point_mode: ThirdPointMode::Off,
            first_team_method: FirstTeamMethod::Auto,
            gamification_dice: false,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Violation,
    CorrectApplication,
}

/// Payload for the third point: a related concept, or a concept the proposed
/// solution would now break, depending on the game's third-point mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThirdPointClaim {
    pub concept: ConceptId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub concept: ConceptId,
    pub software_board: String,
    pub screen: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    pub kind: ClaimKind,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub third_point: Option<ThirdPointClaim>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Verdict {
    pub point1_accepted: bool,
    pub point2_accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point3_accepted: Option<bool>,
    #[serde(default)]
    pub escalate: bool,
}

impl Verdict {
    pub fn accept_all() -> Self {
        Self {
            point1_accepted: true,
            point2_accepted: true,
            point3_accepted: None,
            escalate: false,
        }
    }

    pub fn escalate() -> Self {
        Self {
            escalate: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefereeRuling {
    pub pair_awarded_to: TeamId,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitFirstTeam,
    AwaitRoll,
    AwaitDestination,
    AwaitConcept,
    AwaitClaim,
    AwaitVerdict,
    AwaitRuling,
    AwaitKeyPoint,
    Ended,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("phase serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Late,
    KeyPoint,
}

/// An effect waiting for the start of `target`'s next turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingEffect {
    pub target: TeamId,
    pub effect: DeferredEffect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeferredEffect {
    Skip(SkipReason),
    KeyPoint(KeyPointKind),
    Impose(ConceptId),
}

/// Points credited by a non-escalated verdict, in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Award {
    pub point1: u32,
    pub point2: u32,
    pub point3: u32,
}

impl Award {
    pub fn total(&self) -> u32 {
        self.point1 + self.point2 + self.point3
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum FirstTeamChoice {
    Fixed,
    Dice { dice: u8, input: ResolutionInput },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum GamificationOutcome {
    Penalty,
    ExtraTurn,
    NextConcept { concept: ConceptId },
    Forfeit,
    Remove { dice: [u8; 2], destinations: Vec<BoxId> },
    DoublePoint1,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Standing {
    pub team: TeamId,
    pub total: i64,
    /// Competition rank: tied teams share a rank.
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    GameCreated {
        config: GameConfig,
        variant: Variant,
        teams: Vec<TeamSetup>,
    },
    FirstTeamChosen {
        choice: FirstTeamChoice,
        team: TeamId,
    },
    DiceRolled {
        team: TeamId,
        value: u8,
        destinations: Vec<BoxId>,
    },
    DestinationChosen {
        team: TeamId,
        destination: BoxId,
    },
    ConceptChosen {
        team: TeamId,
        concept: ConceptId,
    },
    ConceptImposed {
        by: TeamId,
        target: TeamId,
        concept: ConceptId,
    },
    ClaimSubmitted {
        team: TeamId,
        claim: Claim,
    },
    VerdictGiven {
        team: TeamId,
        verdict: Verdict,
        award: Award,
        joker_applied: bool,
    },
    RefereeRuled {
        awarded_to: TeamId,
        bonus: i32,
        note: String,
    },
    SpecialTriggered {
        team: TeamId,
        effect: SpecialEffect,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<TeamId>,
        direction: Direction,
    },
    KeyPointResolved {
        team: TeamId,
        key_point: KeyPointKind,
        passed: bool,
    },
    GamificationRolled {
        team: TeamId,
        roll: u8,
        from_rng: bool,
        outcome: GamificationOutcome,
    },
    TurnSkipped {
        team: TeamId,
        reason: SkipReason,
    },
    TurnEnded {
        team: TeamId,
    },
    GameEnded {
        standings: Vec<Standing>,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::GameCreated { .. } => "GameCreated",
            EventBody::FirstTeamChosen { .. } => "FirstTeamChosen",
            EventBody::DiceRolled { .. } => "DiceRolled",
            EventBody::DestinationChosen { .. } => "DestinationChosen",
            EventBody::ConceptChosen { .. } => "ConceptChosen",
            EventBody::ConceptImposed { .. } => "ConceptImposed",
            EventBody::ClaimSubmitted { .. } => "ClaimSubmitted",
            EventBody::VerdictGiven { .. } => "VerdictGiven",
            EventBody::RefereeRuled { .. } => "RefereeRuled",
            EventBody::SpecialTriggered { .. } => "SpecialTriggered",
            EventBody::KeyPointResolved { .. } => "KeyPointResolved",
            EventBody::GamificationRolled { .. } => "GamificationRolled",
            EventBody::TurnSkipped { .. } => "TurnSkipped",
            EventBody::TurnEnded { .. } => "TurnEnded",
            EventBody::GameEnded { .. } => "GameEnded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameEvent {
    pub seq: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

impl GameEvent {
    /// One line of the canonical event-log format (no trailing newline).
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Canonical newline-delimited serialization of an event log.
pub fn events_to_ndjson(events: &[GameEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

pub fn events_from_ndjson(text: &str) -> Result<Vec<GameEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(GameEvent::from_line)
        .collect()
}

/// Score sheet export: one row per concept (per family on the multicolored
/// board), then points, bonus and total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSheetDoc {
    pub team: TeamId,
    pub team_name: String,
    pub board: String,
    pub variant: Variant,
    pub rows: Vec<SheetRow>,
    pub points: u32,
    pub bonus: i32,
    pub total: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetRow {
    pub key: String,
    pub label: String,
    pub ticks: u32,
}
