//! HTTP service and command-line front end over `chartwise-core`.

pub mod api;
pub mod config;

use chartwise_core::gateway::GatewayError;

pub use api::{router, ApiError, AppState, ServiceOptions, SortState, TablePage, ViewMode};
pub use config::{Config, GatewayMode};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Config {
    pub fn service_options(&self) -> ServiceOptions {
        let s = &self.service;
        ServiceOptions {
            progress_interval: std::time::Duration::from_millis(s.progress_interval_ms),
            max_concurrent_queries: s.max_concurrent_queries,
            retry_after: std::time::Duration::from_millis(s.retry_after_ms),
            event_log: s.event_log.clone(),
        }
    }
}
