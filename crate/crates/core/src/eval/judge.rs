//! Likert scoring of a response against the ground truth by a model judge.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BenchmarkItem, EvalError};
use crate::gateway::{Gateway, Prompt};
use crate::prompts;

const JUDGE_REASK: &str = "Your previous reply did not give a score from 1 to 5. Reply again with Score: a whole number from 1 to 5, then Rationale: one sentence.";

pub const RUBRIC: [(u8, &str); 5] = [(5, "Very Good"), (4, "Good"), (3, "Fair"), (2, "Poor"), (1, "Very Poor")];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub score: u8,
    pub rationale: String,
    pub raw: String,
}

impl JudgeVerdict {
    pub fn label(&self) -> &'static str {
        RUBRIC.iter().find(|(s, _)| *s == self.score).map(|(_, l)| *l).unwrap_or("Unscored")
    }
}

/// A hand-scored example shown to the judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeReference {
    pub question: String,
    pub ground_truth: String,
    pub response: String,
    pub score: u8,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeConfig {
    pub references: Vec<JudgeReference>,
    pub timeout: Duration,
    pub enabled: bool,
}

impl JudgeConfig {
    /// Checks that every reference question comes from the validation split.
    pub fn new(references: Vec<JudgeReference>, validation: &[BenchmarkItem]) -> Result<JudgeConfig, EvalError> {
        if let Some(r) = references.iter().find(|r| !validation.iter().any(|v| v.question == r.question)) {
            return Err(EvalError::ReferenceNotInValidation(r.question.clone()));
        }
        Ok(JudgeConfig {
            references,
            timeout: Duration::from_secs(60),
            enabled: true,
        })
    }

    /// Uses the first `n` answerable validation items, each scored against
    /// its own ground truth.
    pub fn from_validation(validation: &[BenchmarkItem], n: usize) -> JudgeConfig {
        let references = validation
            .iter()
            .filter(|i| i.answerable && !i.ground_truth.is_empty())
            .take(n)
            .map(|i| JudgeReference {
                question: i.question.clone(),
                ground_truth: i.ground_truth.clone(),
                response: i.ground_truth.clone(),
                score: 5,
                rationale: "Response B states the same information as Response A.".into(),
            })
            .collect();
        JudgeConfig {
            references,
            timeout: Duration::from_secs(60),
            enabled: true,
        }
    }

    pub fn disabled() -> JudgeConfig {
        JudgeConfig {
            references: Vec::new(),
            timeout: Duration::from_secs(60),
            enabled: false,
        }
    }
}

pub fn judge_prompt(question: &str, response: &str, ground_truth: &str, refs: &[JudgeReference]) -> Prompt {
    let mut prompt = prompts::render(
        "judge",
        &[("question", question), ("response_a", ground_truth), ("response_b", response)],
    );
    prompt.few_shot = refs
        .iter()
        .map(|r| {
            let shown = prompts::render(
                "judge",
                &[("question", &r.question), ("response_a", &r.ground_truth), ("response_b", &r.response)],
            );
            (shown.user, format!("Score: {}\nRationale: {}", r.score, r.rationale))
        })
        .collect();
    prompt
}

fn after_field<'t>(text: &'t str, name: &str) -> Option<&'t str> {
    let lower = text.to_ascii_lowercase();
    let at = lower.find(&format!("{name}:"))?;
    Some(text[at + name.len() + 1..].trim_start())
}

/// Reads `Score:` and `Rationale:`. The score must be an integer in 1..=5,
/// or a rubric label.
pub fn parse_verdict(text: &str) -> Option<(u8, String)> {
    let score_text = after_field(text, "score")?;
    let line = score_text.lines().next().unwrap_or("").trim().trim_start_matches('*').trim();
    let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
    let score = if digits.is_empty() {
        let l = line.to_ascii_lowercase();
        RUBRIC.iter().find(|(_, label)| l.starts_with(&label.to_ascii_lowercase())).map(|(s, _)| *s)?
    } else {
        digits.parse::<u8>().ok()?
    };
    if !(1..=5).contains(&score) {
        return None;
    }
    let rationale = after_field(text, "rationale").map(|r| r.lines().next().unwrap_or("").trim().to_string()).unwrap_or_default();
    Some((score, rationale))
}

/// Scores `response` against `ground_truth`. An unusable reply gets one
/// re-ask.
pub fn judge(
    gateway: &Gateway,
    question: &str,
    response: &str,
    ground_truth: &str,
    refs: &[JudgeReference],
    timeout: Duration,
) -> Result<JudgeVerdict, EvalError> {
    let mut prompt = judge_prompt(question, response, ground_truth, refs);
    let mut raw = String::new();
    for attempt in 0..2 {
        if attempt == 1 {
            prompt.user = format!("{}\n\n{JUDGE_REASK}", prompt.user);
        }
        raw = gateway.complete(&prompt, timeout)?.text;
        if let Some((score, rationale)) = parse_verdict(&raw) {
            return Ok(JudgeVerdict { score, rationale, raw });
        }
    }
    Err(EvalError::Unparseable(raw))
}
