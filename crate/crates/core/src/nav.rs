//! Cursor movement, shortest key paths, and spoken instructions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{AccessTree, NodeKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NavError {
    #[error("no node at address `{0}`")]
    UnknownAddress(String),
    #[error("unknown key `{0}`")]
    InvalidKey(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Key {
    Up,
    Down,
    Left,
    Right,
    T,
}

impl Key {
    pub const ARROWS: [Key; 4] = [Key::Up, Key::Down, Key::Left, Key::Right];

    pub fn parse(s: &str) -> Result<Key, NavError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" | "arrowup" => Ok(Key::Up),
            "down" | "arrowdown" => Ok(Key::Down),
            "left" | "arrowleft" => Ok(Key::Left),
            "right" | "arrowright" => Ok(Key::Right),
            "t" => Ok(Key::T),
            _ => Err(NavError::InvalidKey(s.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Key::Up => "up",
            Key::Down => "down",
            Key::Left => "left",
            Key::Right => "right",
            Key::T => "t",
        }
    }

    fn spoken(self) -> &'static str {
        match self {
            Key::Up => "the up arrow key",
            Key::Down => "the down arrow key",
            Key::Left => "the left arrow key",
            Key::Right => "the right arrow key",
            Key::T => "the t key",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cursor {
    pub session: String,
    pub address: String,
    pub table_open: bool,
}

impl Cursor {
    pub fn at_root(session: impl Into<String>) -> Cursor {
        Cursor {
            session: session.into(),
            address: "1".into(),
            table_open: false,
        }
    }
}

/// Why a key press did not move the cursor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Top,
    Bottom,
    FirstSibling,
    LastSibling,
    NoTable,
}

impl Boundary {
    pub fn announcement(self) -> &'static str {
        match self {
            Boundary::Top => "Top of the tree.",
            Boundary::Bottom => "No further detail below this node.",
            Boundary::FirstSibling => "First item at this level.",
            Boundary::LastSibling => "Last item at this level.",
            Boundary::NoTable => "A table is only available on category and range nodes.",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyOutcome {
    pub cursor: Cursor,
    pub boundary: Option<Boundary>,
}

fn neighbor(tree: &AccessTree, id: usize, key: Key) -> Result<usize, Boundary> {
    let node = tree.node(id);
    match key {
        Key::Up => node.parent.ok_or(Boundary::Top),
        Key::Down => node.children.first().copied().ok_or(Boundary::Bottom),
        Key::Left | Key::Right => {
            let Some(p) = node.parent else {
                return Err(if key == Key::Left { Boundary::FirstSibling } else { Boundary::LastSibling });
            };
            let sibs = &tree.node(p).children;
            let pos = sibs.iter().position(|&c| c == id).expect("child listed under its parent");
            if key == Key::Left {
                pos.checked_sub(1).map(|i| sibs[i]).ok_or(Boundary::FirstSibling)
            } else {
                sibs.get(pos + 1).copied().ok_or(Boundary::LastSibling)
            }
        }
        Key::T => Err(Boundary::NoTable),
    }
}

/// Applies one key press. Moves that would leave the tree keep the cursor in
/// place and report a boundary; moving closes any open table.
pub fn apply_key(tree: &AccessTree, cursor: &Cursor, key: Key) -> Result<KeyOutcome, NavError> {
    let id = tree
        .id_of(&cursor.address)
        .ok_or_else(|| NavError::UnknownAddress(cursor.address.clone()))?;
    if key == Key::T {
        if tree.node(id).kind == NodeKind::Group {
            let mut next = cursor.clone();
            next.table_open = !cursor.table_open;
            return Ok(KeyOutcome {
                cursor: next,
                boundary: None,
            });
        }
        return Ok(KeyOutcome {
            cursor: cursor.clone(),
            boundary: Some(Boundary::NoTable),
        });
    }
    Ok(match neighbor(tree, id, key) {
        Ok(to) => KeyOutcome {
            cursor: Cursor {
                session: cursor.session.clone(),
                address: tree.node(to).address.clone(),
                table_open: false,
            },
            boundary: None,
        },
        Err(b) => KeyOutcome {
            cursor: cursor.clone(),
            boundary: Some(b),
        },
    })
}

/// Fewest arrow presses from one node to another, by breadth-first search
/// over the move graph. Ties resolve in up, down, left, right order.
pub fn shortest_path(tree: &AccessTree, from: &str, to: &str) -> Result<Vec<Key>, NavError> {
    let start = tree.id_of(from).ok_or_else(|| NavError::UnknownAddress(from.to_string()))?;
    let goal = tree.id_of(to).ok_or_else(|| NavError::UnknownAddress(to.to_string()))?;
    if start == goal {
        return Ok(Vec::new());
    }
    let mut prev: Vec<Option<(usize, Key)>> = vec![None; tree.len()];
    let mut seen = vec![false; tree.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(id) = queue.pop_front() {
        for key in Key::ARROWS {
            let Ok(next) = neighbor(tree, id, key) else { continue };
            if seen[next] {
                continue;
            }
            seen[next] = true;
            prev[next] = Some((id, key));
            if next == goal {
                let mut path = Vec::new();
                let mut cur = goal;
                while let Some((p, k)) = prev[cur] {
                    path.push(k);
                    cur = p;
                }
                path.reverse();
                return Ok(path);
            }
            queue.push_back(next);
        }
    }
    unreachable!("every node of a tree is reachable from every other")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionScript {
    pub steps: Vec<(Key, usize)>,
    pub spoken: String,
}

impl InstructionScript {
    /// The move list this script stands for.
    pub fn expand(&self) -> Vec<Key> {
        self.steps.iter().flat_map(|&(k, n)| std::iter::repeat_n(k, n)).collect()
    }
}

pub const ALREADY_THERE: &str = "You are already there.";

/// Merges runs of the same key and renders the spoken form.
pub fn coalesce(moves: &[Key]) -> InstructionScript {
    let mut steps: Vec<(Key, usize)> = Vec::new();
    for &k in moves {
        match steps.last_mut() {
            Some((last, n)) if *last == k => *n += 1,
            _ => steps.push((k, 1)),
        }
    }
    let spoken = if steps.is_empty() {
        ALREADY_THERE.to_string()
    } else {
        steps
            .iter()
            .map(|&(k, n)| {
                if n == 1 {
                    format!("Press {}.", k.spoken())
                } else {
                    format!("Press {} {n} times.", k.spoken())
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    InstructionScript { steps, spoken }
}

/// The current node's label followed by the chain of labels from the root.
pub fn orient(tree: &AccessTree, cursor: &Cursor) -> Result<String, NavError> {
    let id = tree
        .id_of(&cursor.address)
        .ok_or_else(|| NavError::UnknownAddress(cursor.address.clone()))?;
    let chain = tree.ancestry(id);
    if chain.len() == 1 {
        return Ok(tree.root().label.clone());
    }
    let path: Vec<String> = chain
        .iter()
        .map(|&i| format!("{} ({})", tree.node(i).label, tree.node(i).address))
        .collect();
    Ok(format!(
        "You are at: {}\nPath from the top of the tree: {}",
        tree.node(id).label,
        path.join(" > ")
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traversal {
    pub cursor: Cursor,
    pub script: InstructionScript,
}

/// Moves the cursor straight to `to`, reporting the equivalent key script.
pub fn auto_traverse(tree: &AccessTree, cursor: &Cursor, to: &str) -> Result<Traversal, NavError> {
    let moves = shortest_path(tree, &cursor.address, to)?;
    let target = tree.get(to).expect("resolved by shortest_path");
    Ok(Traversal {
        cursor: Cursor {
            session: cursor.session.clone(),
            address: target.address.clone(),
            table_open: if moves.is_empty() { cursor.table_open } else { false },
        },
        script: coalesce(&moves),
    })
}
