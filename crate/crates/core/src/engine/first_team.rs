//! Choosing the team that plays first.
//!
//! A die picks the rule: 1 rock-paper-scissors, 2 first first-name
//! alphabetically, 3 last first-name alphabetically, 4 earliest birth day
//! (month breaks ties), 5 latest birth month (day breaks ties), 6 highest
//! contest roll. Rules 1 and 6 need the throws or rolls as input, replayed
//! round by round among the still-tied teams.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::types::{Team, TeamId};
use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Throw {
    Rock,
    Paper,
    Scissors,
}

impl Throw {
    fn beats(self, other: Throw) -> bool {
        matches!(
            (self, other),
            (Throw::Rock, Throw::Scissors) | (Throw::Paper, Throw::Rock) | (Throw::Scissors, Throw::Paper)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "rounds")]
pub enum ResolutionInput {
    #[default]
    None,
    RockPaperScissors(Vec<BTreeMap<TeamId, Throw>>),
    ContestRolls(Vec<BTreeMap<TeamId, u8>>),
}

pub(crate) fn resolve(dice: u8, teams: &[Team], input: &ResolutionInput) -> Result<TeamId, EngineError> {
    match dice {
        1 => match input {
            ResolutionInput::RockPaperScissors(rounds) => rock_paper_scissors(teams, rounds),
            _ => Err(EngineError::MissingResolutionInput("rock-paper-scissors throws")),
        },
        2 | 3 => {
            let mut keyed = Vec::with_capacity(teams.len());
            for t in teams {
                let mut names = Vec::new();
                for p in &t.players {
                    let name = p.first_name.as_deref().ok_or_else(|| {
                        EngineError::MissingMetadata(format!("first name of `{}`", p.display_name))
                    })?;
                    names.push(name.to_lowercase());
                }
                let key = if dice == 2 {
                    names.into_iter().min()
                } else {
                    names.into_iter().max()
                };
                keyed.push((t.id.clone(), key.unwrap_or_default()));
            }
            extreme(keyed, dice == 2)
        }
        4 | 5 => {
            let mut keyed = Vec::with_capacity(teams.len());
            for t in teams {
                let mut keys = Vec::new();
                for p in &t.players {
                    let b = p.birth.ok_or_else(|| {
                        EngineError::MissingMetadata(format!("birth date of `{}`", p.display_name))
                    })?;
                    keys.push(if dice == 4 { (b.day, b.month) } else { (b.month, b.day) });
                }
                let key = if dice == 4 {
                    keys.into_iter().min()
                } else {
                    keys.into_iter().max()
                };
                keyed.push((t.id.clone(), key.unwrap_or_default()));
            }
            extreme(keyed, dice == 4)
        }
        6 => match input {
            ResolutionInput::ContestRolls(rounds) => contest(teams, rounds),
            _ => Err(EngineError::MissingResolutionInput("contest rolls")),
        },
        other => Err(EngineError::DiceOutOfRange(other)),
    }
}

// Picks the unique team whose key is smallest (or largest).
fn extreme<K: Ord + Clone>(keyed: Vec<(TeamId, K)>, smallest: bool) -> Result<TeamId, EngineError> {
    let best = keyed
        .iter()
        .map(|(_, k)| k)
        .max_by(|a, b| if smallest { b.cmp(a) } else { a.cmp(b) })
        .cloned()
        .ok_or_else(|| EngineError::UnresolvedTie("no teams".into()))?;
    let winners: Vec<_> = keyed.into_iter().filter(|(_, k)| *k == best).collect();
    match winners.as_slice() {
        [(id, _)] => Ok(id.clone()),
        _ => Err(EngineError::UnresolvedTie(format!(
            "teams {} are tied",
            winners.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn check_round<V>(remaining: &[TeamId], round: &BTreeMap<TeamId, V>) -> Result<(), EngineError> {
    if round.len() != remaining.len() || remaining.iter().any(|t| !round.contains_key(t)) {
        return Err(EngineError::InvalidResolutionInput(format!(
            "each round needs exactly one entry for each of {}",
            remaining.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(())
}

fn rock_paper_scissors(teams: &[Team], rounds: &[BTreeMap<TeamId, Throw>]) -> Result<TeamId, EngineError> {
    let mut remaining: Vec<TeamId> = teams.iter().map(|t| t.id.clone()).collect();
    for round in rounds {
        check_round(&remaining, round)?;
        let mut shapes: Vec<Throw> = round.values().copied().collect();
        shapes.sort_by_key(|t| *t as u8);
        shapes.dedup();
        // One shape or all three: nobody is eliminated.
        if shapes.len() == 2 {
            let winner = if shapes[0].beats(shapes[1]) { shapes[0] } else { shapes[1] };
            remaining.retain(|t| round[t] == winner);
        }
        if let [only] = remaining.as_slice() {
            return Ok(only.clone());
        }
    }
    Err(EngineError::UnresolvedTie("rock-paper-scissors still tied".into()))
}

fn contest(teams: &[Team], rounds: &[BTreeMap<TeamId, u8>]) -> Result<TeamId, EngineError> {
    let mut remaining: Vec<TeamId> = teams.iter().map(|t| t.id.clone()).collect();
    for round in rounds {
        check_round(&remaining, round)?;
        if let Some(bad) = round.values().find(|v| !(1..=6).contains(*v)) {
            return Err(EngineError::DiceOutOfRange(*bad));
        }
        let best = round.values().copied().max().unwrap_or(0);
        remaining.retain(|t| round[t] == best);
        if let [only] = remaining.as_slice() {
            return Ok(only.clone());
        }
    }
    Err(EngineError::UnresolvedTie("contest rolls still tied".into()))
}
