//! Follow-up questions after a failed answer, and opening questions for a
//! freshly loaded chart.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::QueryType;
use crate::gateway::Gateway;
use crate::prompts;

const SUGGEST_REASK: &str = "Your previous reply did not contain exactly two distinct questions. Reply with exactly two numbered lines, one question per line.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub kind: QueryType,
    pub text: String,
}

/// Used when the model cannot produce opening questions.
pub fn fallback_suggestions() -> Vec<Suggestion> {
    [
        (QueryType::Analytical, "What is the highest value shown in this chart?"),
        (QueryType::Visual, "What colors are used in this chart?"),
        (QueryType::Contextual, "Where does the data in this chart come from?"),
        (QueryType::Navigation, "Where am I in the tree view?"),
    ]
    .into_iter()
    .map(|(kind, text)| Suggestion {
        kind,
        text: text.to_string(),
    })
    .collect()
}

/// Strips list markers and wrapping quotes from one line.
fn clean_line(line: &str) -> &str {
    let l = line.trim();
    let digits = l.trim_start_matches(|c: char| c.is_ascii_digit());
    let l = match digits.strip_prefix(['.', ')']) {
        Some(rest) if digits.len() < l.len() => rest,
        _ => l,
    };
    let l = l.trim_start().trim_start_matches(['-', '*', '•']).trim();
    l.trim_matches(|c| matches!(c, '"' | '\'' | '“' | '”')).trim()
}

/// Exactly two distinct, non-empty questions, or `None`.
pub fn parse_two(text: &str) -> Option<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let l = clean_line(line);
        if l.is_empty() {
            continue;
        }
        if out.iter().any(|o| o.eq_ignore_ascii_case(l)) {
            return None;
        }
        out.push(l.to_string());
    }
    (out.len() == 2).then_some(out)
}

/// Two rephrasings that keep the question's intent. Empty when the model
/// fails twice or the gateway errors.
pub fn suggest_alternatives(gateway: &Gateway, query: &str, error_text: &str, tree_text: &str, timeout: Duration) -> Vec<String> {
    let mut prompt = prompts::render("suggest", &[("tree", tree_text), ("query", query), ("error", error_text)]);
    for attempt in 0..2 {
        if attempt == 1 {
            prompt.user = format!("{}\n\n{SUGGEST_REASK}", prompt.user);
        }
        match gateway.complete(&prompt, timeout) {
            Ok(c) => {
                if let Some(two) = parse_two(&c.text) {
                    return two;
                }
            }
            Err(e) => {
                tracing::warn!("suggestion call failed: {e}");
                return Vec::new();
            }
        }
    }
    Vec::new()
}

/// Lines of the form `Kind: question`, one per classifiable type.
pub fn parse_cold_start(text: &str) -> Option<Vec<Suggestion>> {
    let mut out: Vec<Suggestion> = Vec::new();
    for line in text.lines() {
        let l = clean_line(line);
        let Some((head, rest)) = l.split_once(':') else { continue };
        let head = head.trim().trim_matches('*').trim().to_ascii_lowercase();
        let kind = QueryType::CLASSES.into_iter().find(|k| head == k.as_str() || head == k.label().to_ascii_lowercase());
        let text = rest.trim().trim_matches(|c| matches!(c, '"' | '\'' | '“' | '”')).trim();
        if let (Some(kind), false) = (kind, text.is_empty()) {
            if !out.iter().any(|s| s.kind == kind) {
                out.push(Suggestion {
                    kind,
                    text: text.to_string(),
                });
            }
        }
    }
    if out.len() != 4 {
        return None;
    }
    out.sort_by_key(|s| QueryType::CLASSES.iter().position(|k| *k == s.kind));
    Some(out)
}

/// Four opening questions, one per type, in analytical, visual, contextual,
/// navigation order.
pub fn cold_start_suggestions(gateway: &Gateway, tree_text: &str, timeout: Duration) -> Vec<Suggestion> {
    let prompt = prompts::render("cold_start", &[("tree", tree_text)]);
    match gateway.complete(&prompt, timeout) {
        Ok(c) => parse_cold_start(&c.text).unwrap_or_else(fallback_suggestions),
        Err(e) => {
            tracing::warn!("cold-start call failed: {e}");
            fallback_suggestions()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Reply, Rule, ScriptedProvider};
    use std::sync::Arc;

    fn gateway(rules: Vec<Rule>) -> Gateway {
        Gateway::live(Arc::new(rules.into_iter().fold(ScriptedProvider::new(), |p, r| p.rule(r))))
    }

    #[test]
    fn two_questions_parse() {
        assert_eq!(parse_two("1. What is A?\n2. \"What is B?\"\n").unwrap(), ["What is A?", "What is B?"]);
        assert!(parse_two("1. Same?\n2. same?").is_none());
        assert!(parse_two("1. Only one?").is_none());
        assert!(parse_two("a\nb\nc").is_none());
    }

    #[test]
    fn suggestions_reask_once_then_give_up() {
        let g = gateway(vec![
            Rule::complete(&["exactly two numbered"], Reply::Text("1. A?\n2. B?".into())),
            Rule::complete(&["Original question"], Reply::Text("just one".into())),
        ]);
        assert_eq!(suggest_alternatives(&g, "q", "err", "tree", Duration::from_secs(1)), ["A?", "B?"]);
        let g = gateway(vec![Rule::complete(&["Original question"], Reply::Text("just one".into()))]);
        assert!(suggest_alternatives(&g, "q", "err", "tree", Duration::from_secs(1)).is_empty());
        let g = gateway(vec![Rule::complete(&["Original question"], Reply::Timeout)]);
        assert!(suggest_alternatives(&g, "q", "err", "tree", Duration::from_secs(1)).is_empty());
    }

    #[test]
    fn cold_start_needs_all_four() {
        let text = "Visual: What colors?\nAnalytical: What is the max?\nContextual: What is this?\nNavigation: How do I reach the x-axis?";
        let s = parse_cold_start(text).unwrap();
        let kinds: Vec<QueryType> = s.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, QueryType::CLASSES);
        assert!(parse_cold_start("Visual: x\nAnalytical: y").is_none());
    }

    #[test]
    fn cold_start_falls_back_on_timeout() {
        let g = gateway(vec![Rule::complete(&["Chart description"], Reply::Timeout)]);
        let s = cold_start_suggestions(&g, "1 A bar chart.", Duration::from_secs(1));
        assert_eq!(s, fallback_suggestions());
        assert_eq!(s.len(), 4);
    }
}
