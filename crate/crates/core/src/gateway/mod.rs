//! The single boundary for model completions, web lookups, and embeddings.
//!
//! Every call goes through a [`Gateway`] running in one of three modes:
//! `Live` calls a provider, `Record` calls a provider and appends each
//! exchange to a JSONL transcript, and `Replay` serves the transcript back in
//! order, failing loudly when a prompt drifts from what was recorded.

mod embed;
mod progress;
mod provider;

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use embed::{cosine_similarity, hashed_embedding, EmbeddingVector, HASHED_DIM};
pub use progress::{run_with_progress, ProgressConfig, ProgressEvent, ProgressPhase, LOADING_CUE, STILL_LOADING_CUE};
pub use provider::{HttpConfig, HttpProvider, Provider, Reply, Rule, ScriptedProvider};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("call timed out after {after_ms} ms")]
    Timeout { after_ms: u64 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("replay mismatch: expected recorded digest {expected}, got {actual}")]
    ReplayMismatch { expected: String, actual: String },
    #[error("replay transcript exhausted at digest {0}")]
    ReplayExhausted(String),
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("no provider configured for live calls")]
    NoProvider,
    #[error("transcript error: {0}")]
    Transcript(String),
}

pub type Result<T> = std::result::Result<T, GatewayError>;

/// A tool the model may name in an agent turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    /// Versioned template id, e.g. `classify@v1`.
    pub template: String,
    pub system: String,
    pub user: String,
    pub few_shot: Vec<(String, String)>,
    pub tools: Vec<ToolSpec>,
}

impl Prompt {
    pub fn new(template: impl Into<String>, system: impl Into<String>, user: impl Into<String>) -> Prompt {
        Prompt {
            template: template.into(),
            system: system.into(),
            user: user.into(),
            few_shot: Vec::new(),
            tools: Vec::new(),
        }
    }

    /// Canonical text form. Stable byte for byte for equal prompts.
    pub fn render(&self) -> String {
        let mut out = format!("[template] {}\n[system]\n{}\n", self.template, self.system);
        for (input, output) in &self.few_shot {
            out.push_str(&format!("[example input]\n{input}\n[example output]\n{output}\n"));
        }
        if !self.tools.is_empty() {
            out.push_str("[tools]\n");
            for t in &self.tools {
                out.push_str(&format!("{}: {}\n", t.name, t.description));
            }
        }
        out.push_str(&format!("[user]\n{}\n", self.user));
        out
    }

    pub fn digest(&self) -> String {
        digest_text(&self.render())
    }
}

pub fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn web_key(query: &str) -> String {
    format!("web:{query}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub elapsed_ms: u64,
}

impl Completion {
    /// The `Action` / `Action Input` pair in an agent turn, unless the turn
    /// gives a final `Answer:`.
    pub fn tool_call(&self) -> Option<ToolCall> {
        let mut name = None;
        let mut args = None;
        for line in self.text.lines() {
            let l = line.trim();
            if l.starts_with("Answer:") {
                return None;
            }
            if let Some(rest) = l.strip_prefix("Action Input:") {
                args = Some(rest.trim().to_string());
            } else if let Some(rest) = l.strip_prefix("Action:") {
                name = Some(rest.trim().to_string());
            }
        }
        Some(ToolCall {
            name: name?,
            arguments: args.unwrap_or_default(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallKind {
    Complete,
    Web,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Timeout,
    Error,
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub kind: CallKind,
    pub prompt: String,
    pub completion: String,
    pub outcome: Outcome,
    pub elapsed_ms: u64,
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>> {
    let file = File::open(path).map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GatewayError::Transcript(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: TranscriptEntry = serde_json::from_str(&line)
            .map_err(|e| GatewayError::Transcript(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

struct ReplayState {
    entries: Vec<TranscriptEntry>,
    next: usize,
}

struct Recorder {
    entries: Vec<TranscriptEntry>,
    file: Option<File>,
}

/// Which embedding function the gateway uses. Recording and replay must use
/// the same one, since example selection feeds the prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embedder {
    Hashed,
    Provider,
}

pub struct Gateway {
    mode: Mode,
    provider: Option<Arc<dyn Provider>>,
    replay: Mutex<ReplayState>,
    recorder: Mutex<Recorder>,
    embedder: Embedder,
    transcript_path: Option<PathBuf>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("mode", &self.mode).field("embedder", &self.embedder).finish()
    }
}

impl Gateway {
    fn build(mode: Mode, provider: Option<Arc<dyn Provider>>, entries: Vec<TranscriptEntry>, file: Option<File>) -> Gateway {
        Gateway {
            mode,
            provider,
            replay: Mutex::new(ReplayState { entries, next: 0 }),
            recorder: Mutex::new(Recorder {
                entries: Vec::new(),
                file,
            }),
            embedder: Embedder::Hashed,
            transcript_path: None,
        }
    }

    pub fn live(provider: Arc<dyn Provider>) -> Gateway {
        Gateway::build(Mode::Live, Some(provider), Vec::new(), None)
    }

    /// Calls `provider` and appends every exchange to `path` (truncated first).
    pub fn record(provider: Arc<dyn Provider>, path: &Path) -> Result<Gateway> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
        let mut g = Gateway::build(Mode::Record, Some(provider), Vec::new(), Some(file));
        g.transcript_path = Some(path.to_path_buf());
        Ok(g)
    }

    /// Records into memory only; see [`Gateway::recorded`].
    pub fn record_in_memory(provider: Arc<dyn Provider>) -> Gateway {
        Gateway::build(Mode::Record, Some(provider), Vec::new(), None)
    }

    pub fn replay(path: &Path) -> Result<Gateway> {
        let mut g = Gateway::build(Mode::Replay, None, read_transcript(path)?, None);
        g.transcript_path = Some(path.to_path_buf());
        Ok(g)
    }

    pub fn replay_entries(entries: Vec<TranscriptEntry>) -> Gateway {
        Gateway::build(Mode::Replay, None, entries, None)
    }

    pub fn with_embedder(mut self, embedder: Embedder) -> Gateway {
        self.embedder = embedder;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn transcript_path(&self) -> Option<&Path> {
        self.transcript_path.as_deref()
    }

    /// Entries written so far in record mode.
    pub fn recorded(&self) -> Vec<TranscriptEntry> {
        self.recorder.lock().expect("recorder lock").entries.clone()
    }

    /// Number of replay entries not yet consumed.
    pub fn remaining(&self) -> usize {
        let st = self.replay.lock().expect("replay lock");
        st.entries.len() - st.next
    }

    pub fn complete(&self, prompt: &Prompt, timeout: Duration) -> Result<Completion> {
        let rendered = prompt.render();
        let digest = digest_text(&rendered);
        let started = Instant::now();
        let text = match self.mode {
            Mode::Replay => self.next_replay(CallKind::Complete, &digest)?,
            Mode::Live | Mode::Record => {
                let provider = self.provider.clone().ok_or(GatewayError::NoProvider)?;
                let p = prompt.clone();
                let result = call_with_timeout(timeout, move || provider.complete(&p));
                if self.mode == Mode::Record {
                    self.append(CallKind::Complete, digest, rendered, &result, started.elapsed());
                }
                result?
            }
        };
        Ok(Completion {
            text,
            elapsed_ms: started.elapsed().as_millis() as u64,
        })
    }

    pub fn web_lookup(&self, query: &str, timeout: Duration) -> Result<String> {
        let query = query.trim();
        if query.is_empty() {
            return Err(GatewayError::EmptyQuery);
        }
        let key = web_key(query);
        let digest = digest_text(&key);
        let started = Instant::now();
        match self.mode {
            Mode::Replay => self.next_replay(CallKind::Web, &digest),
            Mode::Live | Mode::Record => {
                let provider = self.provider.clone().ok_or(GatewayError::NoProvider)?;
                let q = query.to_string();
                let result = call_with_timeout(timeout, move || provider.web_search(&q));
                if self.mode == Mode::Record {
                    self.append(CallKind::Web, digest, key, &result, started.elapsed());
                }
                result
            }
        }
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyText);
        }
        match (self.embedder, &self.provider) {
            (Embedder::Provider, Some(p)) => p.embed(text),
            (Embedder::Provider, None) => Err(GatewayError::NoProvider),
            (Embedder::Hashed, _) => Ok(hashed_embedding(text)),
        }
    }

    fn next_replay(&self, kind: CallKind, digest: &str) -> Result<String> {
        let mut st = self.replay.lock().expect("replay lock");
        let Some(entry) = st.entries.get(st.next).cloned() else {
            return Err(GatewayError::ReplayExhausted(digest.to_string()));
        };
        if entry.digest != digest || entry.kind != kind {
            return Err(GatewayError::ReplayMismatch {
                expected: entry.digest,
                actual: digest.to_string(),
            });
        }
        st.next += 1;
        match entry.outcome {
            Outcome::Ok => Ok(entry.completion),
            Outcome::Timeout => Err(GatewayError::Timeout {
                after_ms: entry.elapsed_ms,
            }),
            Outcome::Error => Err(GatewayError::Transport(entry.completion)),
        }
    }

    fn append(&self, kind: CallKind, digest: String, prompt: String, result: &Result<String>, elapsed: Duration) {
        let (completion, outcome) = match result {
            Ok(t) => (t.clone(), Outcome::Ok),
            Err(GatewayError::Timeout { .. }) => (String::new(), Outcome::Timeout),
            Err(e) => (e.to_string(), Outcome::Error),
        };
        let entry = TranscriptEntry {
            digest,
            kind,
            prompt,
            completion,
            outcome,
            elapsed_ms: elapsed.as_millis() as u64,
        };
        let mut rec = self.recorder.lock().expect("recorder lock");
        if let Some(f) = rec.file.as_mut() {
            let line = serde_json::to_string(&entry).expect("entries serialize");
            if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
                tracing::warn!("failed to append transcript entry: {e}");
            }
        }
        rec.entries.push(entry);
    }
}

/// Runs `f` on a worker thread and gives up after `timeout`. A provider that
/// hangs keeps its thread, but the caller is released on time.
fn call_with_timeout<F>(timeout: Duration, f: F) -> Result<String>
where
    F: FnOnce() -> Result<String> + Send + 'static,
{
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(f());
    });
    match rx.recv_timeout(timeout) {
        Ok(r) => r,
        Err(RecvTimeoutError::Timeout) => Err(GatewayError::Timeout {
            after_ms: timeout.as_millis() as u64,
        }),
        Err(RecvTimeoutError::Disconnected) => Err(GatewayError::Transport("provider thread stopped".into())),
    }
}
