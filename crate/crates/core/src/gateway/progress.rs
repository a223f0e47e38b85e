//! Audible-cue progress events for long-running calls.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub const LOADING_CUE: &str = "Loading. Please Wait";
pub const STILL_LOADING_CUE: &str = "Still Loading";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressPhase {
    Started,
    StillLoading,
    Done,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub phase: ProgressPhase,
    pub message: String,
    pub elapsed_ms: u64,
}

impl ProgressEvent {
    pub fn new(phase: ProgressPhase, message: impl Into<String>, elapsed: Duration) -> ProgressEvent {
        ProgressEvent {
            phase,
            message: message.into(),
            elapsed_ms: elapsed.as_millis() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgressConfig {
    pub interval: Duration,
}

impl Default for ProgressConfig {
    fn default() -> Self {
        ProgressConfig {
            interval: Duration::from_secs(3),
        }
    }
}

/// Runs `work` on a worker thread, emitting a started event at once and a
/// still-loading event every `config.interval` until it finishes. The final
/// event is `Done`, or `Error` when `is_error` holds for the result.
pub fn run_with_progress<T, W, F, E>(config: ProgressConfig, mut emit: F, is_error: E, work: W) -> T
where
    T: Send,
    W: FnOnce() -> T + Send,
    F: FnMut(ProgressEvent),
    E: FnOnce(&T) -> Option<String>,
{
    let start = Instant::now();
    emit(ProgressEvent::new(ProgressPhase::Started, LOADING_CUE, Duration::ZERO));
    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        scope.spawn(move || {
            let _ = tx.send(work());
        });
        let mut next = config.interval;
        loop {
            let wait = next.saturating_sub(start.elapsed());
            match rx.recv_timeout(wait) {
                Ok(result) => {
                    let event = match is_error(&result) {
                        Some(msg) => ProgressEvent::new(ProgressPhase::Error, msg, start.elapsed()),
                        None => ProgressEvent::new(ProgressPhase::Done, "Done", start.elapsed()),
                    };
                    emit(event);
                    return result;
                }
                Err(RecvTimeoutError::Timeout) => {
                    emit(ProgressEvent::new(ProgressPhase::StillLoading, STILL_LOADING_CUE, start.elapsed()));
                    next += config.interval;
                }
                Err(RecvTimeoutError::Disconnected) => panic!("progress worker exited without a result"),
            }
        }
    })
}
