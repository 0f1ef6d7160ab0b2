//! End-of-session satisfaction questionnaire and the game master's debrief.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    NoNotAtAll,
    NotReally,
    YesQuite,
    YesTotally,
}

/// Keys and prompts of the five closed questions, in form order.
pub const QUESTIONS: [(&str, &str); 5] = [
    ("easy_to_use", "Was the game easy to use?"),
    ("rules_clear", "Were the rules easy to understand?"),
    ("practiced_ergonomics", "Did the game let you practise ergonomics?"),
    ("worked_on_argumentation", "Did the game make you work on argumentation?"),
    ("applied_course", "Did the game let you apply the course?"),
];

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    #[serde(default)]
    pub easy_to_use: Option<Answer>,
    #[serde(default)]
    pub rules_clear: Option<Answer>,
    #[serde(default)]
    pub practiced_ergonomics: Option<Answer>,
    #[serde(default)]
    pub worked_on_argumentation: Option<Answer>,
    #[serde(default)]
    pub applied_course: Option<Answer>,
    #[serde(default)]
    pub comments: String,
    #[serde(default)]
    pub suggestions: String,
}

impl QuestionnaireResponse {
    pub fn all(answer: Answer) -> Self {
        Self {
            easy_to_use: Some(answer),
            rules_clear: Some(answer),
            practiced_ergonomics: Some(answer),
            worked_on_argumentation: Some(answer),
            applied_course: Some(answer),
            ..Self::default()
        }
    }

    fn answers(&self) -> [Option<Answer>; 5] {
        [
            self.easy_to_use,
            self.rules_clear,
            self.practiced_ergonomics,
            self.worked_on_argumentation,
            self.applied_course,
        ]
    }

    /// Keys of closed questions left unanswered.
    pub fn missing(&self) -> Vec<&'static str> {
        QUESTIONS
            .iter()
            .zip(self.answers())
            .filter(|(_, a)| a.is_none())
            .map(|((k, _), _)| *k)
            .collect()
    }
}

/// Debrief dimensions, in the order the game master walks through them.
pub const DEBRIEF_DIMENSIONS: [&str; 5] = [
    "affective",
    "knowledge_awareness",
    "decontextualization",
    "legitimization",
    "generalization",
];

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DebriefRecord {
    #[serde(default)]
    pub affective: Option<String>,
    #[serde(default)]
    pub knowledge_awareness: Option<String>,
    #[serde(default)]
    pub decontextualization: Option<String>,
    #[serde(default)]
    pub legitimization: Option<String>,
    #[serde(default)]
    pub generalization: Option<String>,
}

impl DebriefRecord {
    pub fn missing(&self) -> Vec<&'static str> {
        let notes = [
            &self.affective,
            &self.knowledge_awareness,
            &self.decontextualization,
            &self.legitimization,
            &self.generalization,
        ];
        DEBRIEF_DIMENSIONS
            .iter()
            .zip(notes)
            .filter(|(_, n)| n.is_none())
            .map(|(k, _)| *k)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_answers_are_reported() {
        let mut r = QuestionnaireResponse::all(Answer::YesQuite);
        assert!(r.missing().is_empty());
        r.applied_course = None;
        assert_eq!(r.missing(), vec!["applied_course"]);
        let parsed: QuestionnaireResponse = serde_json::from_str(r#"{"easy_to_use":"not_really"}"#).unwrap();
        assert_eq!(parsed.missing().len(), 4);
    }

    #[test]
    fn debrief_needs_five_notes() {
        let d = DebriefRecord {
            affective: Some("fun".into()),
            ..DebriefRecord::default()
        };
        assert_eq!(d.missing().len(), 4);
    }
}
