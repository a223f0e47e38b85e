//! Synthetic navigation questions for a chart's tree.

use std::time::Duration;

use super::{BenchmarkItem, EvalError};
use crate::gateway::Gateway;
use crate::pipeline::{NavigationKind, QueryType};
use crate::prompts;
use crate::tree::{render_tree_text, AccessTree};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedQuestion {
    pub kind: NavigationKind,
    pub cursor: String,
    pub target: Option<String>,
    pub question: String,
}

/// Parses `Kind | cursor | [target |] question` lines, dropping lines whose
/// addresses are not in the tree.
pub fn parse_generated(text: &str, tree: &AccessTree) -> Vec<GeneratedQuestion> {
    let mut out = Vec::new();
    for line in text.lines() {
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        let kind = match parts.first().map(|p| p.trim_start_matches(|c: char| !c.is_alphabetic()).to_ascii_lowercase()) {
            Some(k) if k.starts_with("wayfinding") => NavigationKind::Wayfinding,
            Some(k) if k.starts_with("orientation") => NavigationKind::Orientation,
            _ => continue,
        };
        let (cursor, target, question) = match (kind, parts.as_slice()) {
            (NavigationKind::Wayfinding, [_, c, t, q]) => (*c, Some(*t), *q),
            (NavigationKind::Orientation, [_, c, q]) => (*c, None, *q),
            _ => continue,
        };
        if tree.get(cursor).is_none() || target.is_some_and(|t| tree.get(t).is_none()) || question.is_empty() {
            continue;
        }
        out.push(GeneratedQuestion {
            kind,
            cursor: cursor.to_string(),
            target: target.map(str::to_string),
            question: question.to_string(),
        });
    }
    out
}

/// `n` navigation items, `n / 2` wayfinding and the rest orientation. The
/// ground truth is the start and end address pair.
pub fn generate_navigation_queries(
    gateway: &Gateway,
    chart_id: &str,
    tree: &AccessTree,
    n: usize,
    timeout: Duration,
) -> Result<Vec<BenchmarkItem>, EvalError> {
    let wayfinding = n / 2;
    let orientation = n - wayfinding;
    let tree_text = render_tree_text(tree, usize::MAX);
    let prompt = prompts::render(
        "navgen",
        &[
            ("n", &n.to_string()),
            ("wayfinding", &wayfinding.to_string()),
            ("orientation", &orientation.to_string()),
            ("tree", tree_text.trim_end()),
        ],
    );
    let text = gateway.complete(&prompt, timeout)?.text;
    let parsed = parse_generated(&text, tree);
    let pick = |kind: NavigationKind, want: usize| -> Result<Vec<GeneratedQuestion>, EvalError> {
        let got: Vec<GeneratedQuestion> = parsed.iter().filter(|g| g.kind == kind).take(want).cloned().collect();
        if got.len() < want {
            return Err(EvalError::Generation(format!("wanted {want} {kind:?} questions, got {}", got.len())));
        }
        Ok(got)
    };
    let chosen = pick(NavigationKind::Wayfinding, wayfinding)?.into_iter().chain(pick(NavigationKind::Orientation, orientation)?);
    Ok(chosen
        .enumerate()
        .map(|(i, g)| {
            let end = g.target.as_deref().unwrap_or(&g.cursor);
            BenchmarkItem {
                id: format!("{chart_id}-nav-{}", i + 1),
                chart_id: chart_id.to_string(),
                question: g.question,
                type_label: QueryType::Navigation,
                ground_truth: format!("Starting Address: {}; Ending Address: {end}", g.cursor),
                answerable: true,
                open_ended: false,
                cursor_context: Some(g.cursor),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Reply, Rule, ScriptedProvider};
    use std::sync::Arc;

    fn tree() -> AccessTree {
        AccessTree::from_parents(&[0, 0, 2, 2, 2])
    }

    #[test]
    fn parse_drops_invalid_addresses() {
        let g = parse_generated(
            "Wayfinding | 1 | 1.2.3 | How do I reach the third point?\nOrientation | 9.9 | Where am I?\n1. Orientation | 1.2 | Where am I?\nnoise",
            &tree(),
        );
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].target.as_deref(), Some("1.2.3"));
        assert_eq!(g[1].cursor, "1.2");
    }

    #[test]
    fn generates_balanced_items() {
        let reply = "Wayfinding | 1 | 1.2.3 | Take me to the last point.\n\
                     Wayfinding | 1.1 | 1.2 | How do I get to the second group?\n\
                     Wayfinding | 1.2.1 | 1 | How do I go back to the top?\n\
                     Orientation | 1.2.2 | Where am I?\n\
                     Orientation | 1.1 | Which node is this?";
        let g = Gateway::live(Arc::new(ScriptedProvider::new().rule(Rule::complete(&["Tree:"], Reply::Text(reply.into())))));
        let items = generate_navigation_queries(&g, "bar", &tree(), 4, Duration::from_secs(1)).unwrap();
        assert_eq!(items.len(), 4);
        assert_eq!(items[0].ground_truth, "Starting Address: 1; Ending Address: 1.2.3");
        assert_eq!(items[3].ground_truth, "Starting Address: 1.1; Ending Address: 1.1");
        assert!(items.iter().all(|i| tree().get(i.cursor_context.as_deref().unwrap()).is_some()));
        assert!(matches!(generate_navigation_queries(&g, "bar", &tree(), 8, Duration::from_secs(1)), Err(EvalError::Generation(_))));
    }
}
