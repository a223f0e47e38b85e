//! Navigation questions: endpoint extraction, then key paths over the tree.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{NAV_DISABLED, NAV_FAILURE};
use crate::gateway::{Gateway, GatewayError};
use crate::nav::{auto_traverse, coalesce, orient, shortest_path, Cursor, InstructionScript};
use crate::prompts;
use crate::tree::{render_tree_text, AccessTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NavigationKind {
    Wayfinding,
    Orientation,
}

/// What the model said about a navigation question, before resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NavRequest {
    pub kind: Option<NavigationKind>,
    pub start_point: Option<String>,
    pub start_address: Option<String>,
    pub end_point: Option<String>,
    pub end_address: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigationOutcome {
    pub kind: NavigationKind,
    pub start_address: String,
    pub end_address: String,
    pub script: Option<InstructionScript>,
    /// Where the cursor ends up after an automatic traversal.
    pub moved_to: Option<Cursor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavigationAnswer {
    pub body: String,
    pub outcome: Option<NavigationOutcome>,
    pub failed: bool,
    pub error: Option<GatewayError>,
}

impl NavigationAnswer {
    fn failure(body: &str, error: Option<GatewayError>) -> NavigationAnswer {
        NavigationAnswer {
            body: body.to_string(),
            outcome: None,
            failed: true,
            error,
        }
    }
}

fn field<'t>(text: &'t str, name: &str) -> Option<&'t str> {
    let lower = text.to_ascii_lowercase();
    let at = lower.find(&format!("{}:", name.to_ascii_lowercase()))?;
    let rest = &text[at + name.len() + 1..];
    let end = rest.find(['\n', ';']).unwrap_or(rest.len());
    let v = rest[..end].trim().trim_matches(|c| matches!(c, '\'' | '"' | '`' | '“' | '”' | '‘' | '’')).trim();
    let none = v.is_empty() || ["none", "n/a", "na", "null", "current", "current position"].contains(&v.to_ascii_lowercase().trim_end_matches('.'));
    (!none).then_some(v)
}

fn address_token(v: &str) -> Option<String> {
    let start = v.find(|c: char| c.is_ascii_digit())?;
    let token: String = v[start..].chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect();
    let token = token.trim_end_matches('.').to_string();
    (!token.is_empty()).then_some(token)
}

/// Reads the `Navigation Type`, `Starting Point/Address`, and
/// `Ending Point/Address` fields, on separate lines or `;`-separated.
pub fn parse_navigation(text: &str) -> NavRequest {
    let kind = field(text, "Navigation Type").and_then(|v| {
        let v = v.to_ascii_lowercase();
        if v.contains("orientation") {
            Some(NavigationKind::Orientation)
        } else if v.contains("wayfinding") {
            Some(NavigationKind::Wayfinding)
        } else {
            None
        }
    });
    NavRequest {
        kind,
        start_point: field(text, "Starting Point").map(str::to_string),
        start_address: field(text, "Starting Address").and_then(address_token),
        end_point: field(text, "Ending Point").map(str::to_string),
        end_address: field(text, "Ending Address").and_then(address_token),
    }
}

/// An address that exists in the tree, else the node whose label matches
/// the point text.
fn resolve(tree: &AccessTree, address: Option<&str>, point: Option<&str>) -> Option<String> {
    if let Some(n) = address.and_then(|a| tree.get(a)) {
        return Some(n.address.clone());
    }
    let point = point?.trim().trim_end_matches('.').to_lowercase();
    tree.nodes()
        .iter()
        .find(|n| n.label.trim_end_matches('.').to_lowercase() == point)
        .map(|n| n.address.clone())
}

/// Resolves a parsed request against the tree. Returns `None` when no
/// usable endpoint is present.
pub fn resolve_request(
    tree: &AccessTree,
    cursor: &Cursor,
    req: &NavRequest,
    auto: bool,
) -> Option<(String, NavigationOutcome)> {
    let start_given = req.start_address.is_some() || req.start_point.is_some();
    let end_given = req.end_address.is_some() || req.end_point.is_some();
    let kind = req.kind.unwrap_or(if end_given { NavigationKind::Wayfinding } else { NavigationKind::Orientation });
    if kind == NavigationKind::Orientation {
        req.kind?;
        let body = orient(tree, cursor).ok()?;
        return Some((
            body,
            NavigationOutcome {
                kind,
                start_address: cursor.address.clone(),
                end_address: cursor.address.clone(),
                script: None,
                moved_to: None,
            },
        ));
    }
    let start = if start_given {
        resolve(tree, req.start_address.as_deref(), req.start_point.as_deref())?
    } else {
        tree.get(&cursor.address)?.address.clone()
    };
    let end = resolve(tree, req.end_address.as_deref(), req.end_point.as_deref())?;
    let start_label = &tree.get(&start)?.label;
    let end_label = &tree.get(&end)?.label;
    if auto {
        let from = Cursor {
            session: cursor.session.clone(),
            address: start.clone(),
            table_open: false,
        };
        let t = auto_traverse(tree, &from, &end).ok()?;
        let body = if t.script.steps.is_empty() {
            t.script.spoken.clone()
        } else {
            format!("Moved to {end_label} (address {end}). Keys pressed: {}", t.script.spoken)
        };
        return Some((
            body,
            NavigationOutcome {
                kind,
                start_address: start,
                end_address: end,
                script: Some(t.script),
                moved_to: Some(t.cursor),
            },
        ));
    }
    let script = coalesce(&shortest_path(tree, &start, &end).ok()?);
    let body = if script.steps.is_empty() {
        script.spoken.clone()
    } else {
        format!(
            "Starting Point: {start_label} (address {start}). Ending Point: {end_label} (address {end}). {}",
            script.spoken
        )
    };
    Some((
        body,
        NavigationOutcome {
            kind,
            start_address: start,
            end_address: end,
            script: Some(script),
            moved_to: None,
        },
    ))
}

pub fn answer_navigation(
    gateway: &Gateway,
    query: &str,
    tree: &AccessTree,
    cursor: &Cursor,
    auto: bool,
    table_mode: bool,
    timeout: Duration,
) -> NavigationAnswer {
    if table_mode {
        return NavigationAnswer::failure(NAV_DISABLED, None);
    }
    let Some(current) = tree.get(&cursor.address) else {
        return NavigationAnswer::failure(NAV_FAILURE, None);
    };
    let tree_text = render_tree_text(tree, usize::MAX);
    let prompt = prompts::render(
        "navigation",
        &[
            ("tree", tree_text.trim_end()),
            ("cursor_label", &current.label),
            ("cursor_address", &cursor.address),
            ("query", query),
        ],
    );
    let completion = match gateway.complete(&prompt, timeout) {
        Ok(c) => c,
        Err(e) => return NavigationAnswer::failure(NAV_FAILURE, Some(e)),
    };
    let req = parse_navigation(&completion.text);
    match resolve_request(tree, cursor, &req, auto) {
        Some((body, outcome)) => NavigationAnswer {
            body,
            outcome: Some(outcome),
            failed: false,
            error: None,
        },
        None => NavigationAnswer::failure(NAV_FAILURE, None),
    }
}
