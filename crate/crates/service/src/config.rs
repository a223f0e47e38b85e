//! TOML configuration plus environment overrides for credentials.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chartwise_core::eval::{read_corpus, stratified_split, validation_bank, BenchmarkItem};
use chartwise_core::gateway::{Gateway, HttpConfig, HttpProvider};
use chartwise_core::pipeline::{AgentBudget, ChartContext, Pipeline, PipelineConfig};
use serde::Deserialize;

use crate::ServiceError;

pub const API_KEY_ENV: &str = "CHARTWISE_API_KEY";
pub const SEARCH_KEY_ENV: &str = "CHARTWISE_SEARCH_KEY";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Directory of `<id>.vl.json` chart specs.
    pub charts_dir: PathBuf,
    /// Benchmark corpus; its validation split seeds the classifier examples.
    pub corpus: PathBuf,
    pub split_seed: u64,
    pub split_ratio: f64,
    pub provider: HttpConfig,
    pub pipeline: PipelineSection,
    pub service: ServiceSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct PipelineSection {
    pub examples_per_type: usize,
    pub call_timeout_secs: u64,
    pub agent_max_steps: usize,
    pub agent_wall_clock_secs: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct ServiceSection {
    pub addr: String,
    pub progress_interval_ms: u64,
    pub max_concurrent_queries: usize,
    pub retry_after_ms: u64,
    pub event_log: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            charts_dir: PathBuf::from("crates/core/fixtures/charts"),
            corpus: PathBuf::from("crates/core/fixtures/corpus/benchmark.jsonl"),
            split_seed: 7,
            split_ratio: 0.8,
            provider: HttpConfig::default(),
            pipeline: PipelineSection::default(),
            service: ServiceSection::default(),
        }
    }
}

impl Default for PipelineSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        PipelineSection {
            examples_per_type: d.examples_per_type,
            call_timeout_secs: d.call_timeout.as_secs(),
            agent_max_steps: d.agent.max_steps,
            agent_wall_clock_secs: d.agent.wall_clock.as_secs(),
        }
    }
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection {
            addr: "127.0.0.1:8080".into(),
            progress_interval_ms: 3000,
            max_concurrent_queries: 4,
            retry_after_ms: 1000,
            event_log: None,
        }
    }
}

impl PipelineSection {
    pub fn to_config(&self) -> PipelineConfig {
        PipelineConfig {
            examples_per_type: self.examples_per_type,
            call_timeout: Duration::from_secs(self.call_timeout_secs),
            agent: AgentBudget {
                max_steps: self.agent_max_steps,
                wall_clock: Duration::from_secs(self.agent_wall_clock_secs),
            },
        }
    }
}

impl Config {
    /// Reads `path` when given, then applies credential variables.
    pub fn load(path: Option<&Path>) -> Result<Config, ServiceError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?
            }
            None => Config::default(),
        };
        if let Ok(k) = std::env::var(API_KEY_ENV) {
            config.provider.api_key = k;
        }
        if let Ok(k) = std::env::var(SEARCH_KEY_ENV) {
            config.provider.search_key = k;
        }
        Ok(config)
    }

    /// Every `<id>.vl.json` under the charts directory, keyed by id.
    pub fn load_charts(&self) -> Result<HashMap<String, ChartContext>, ServiceError> {
        let dir = std::fs::read_dir(&self.charts_dir).map_err(|e| ServiceError::Config(format!("{}: {e}", self.charts_dir.display())))?;
        let mut charts = HashMap::new();
        for entry in dir {
            let path = entry.map_err(|e| ServiceError::Config(e.to_string()))?.path();
            let Some(id) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".vl.json")) else {
                continue;
            };
            let chart = ChartContext::load(id, &path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
            charts.insert(id.to_string(), chart);
        }
        Ok(charts)
    }

    pub fn split(&self) -> Result<(Vec<BenchmarkItem>, Vec<BenchmarkItem>), ServiceError> {
        let corpus = read_corpus(&self.corpus).map_err(|e| ServiceError::Config(e.to_string()))?;
        stratified_split(&corpus, self.split_ratio, self.split_seed).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn gateway(&self, mode: &GatewayMode) -> Result<Gateway, ServiceError> {
        let live = || {
            if self.provider.api_key.is_empty() {
                return Err(ServiceError::Config(format!("no API key; set {API_KEY_ENV} or provider.api_key")));
            }
            Ok(Arc::new(HttpProvider::new(self.provider.clone())))
        };
        let g = match mode {
            GatewayMode::Live => Gateway::live(live()?),
            GatewayMode::Record(p) => Gateway::record(live()?, p)?,
            GatewayMode::Replay(p) => Gateway::replay(p)?,
        };
        Ok(g)
    }

    pub fn pipeline(&self, gateway: Gateway) -> Result<Pipeline, ServiceError> {
        let (_, validation) = self.split()?;
        let bank = validation_bank(&gateway, &validation).map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(Pipeline::new(Arc::new(gateway), bank, self.pipeline.to_config()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GatewayMode {
    Live,
    Record(PathBuf),
    Replay(PathBuf),
}
