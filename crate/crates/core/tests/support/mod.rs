//! Shared loaders for the replay fixtures.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chartwise_core::eval::{
    generate_navigation_queries, judge, read_corpus, run_benchmark, stratified_split, validation_bank, BenchmarkItem, BenchmarkOptions,
    BenchmarkReport, JudgeConfig, JudgeVerdict,
};
use chartwise_core::gateway::Gateway;
use chartwise_core::nav::Cursor;
use chartwise_core::pipeline::{Answer, ChartContext, Pipeline, PipelineConfig, Suggestion, UserQuery};
use serde_json::Value;

pub const CHARTS: [&str; 4] = ["bar", "line", "scatter", "map"];
const SPLIT_SEED: u64 = 7;
const TIMEOUT: Duration = Duration::from_secs(60);

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn chart(id: &str) -> ChartContext {
    ChartContext::load(id, &fixtures().join(format!("charts/{id}.vl.json"))).unwrap()
}

pub fn charts() -> HashMap<String, ChartContext> {
    CHARTS.iter().map(|id| (id.to_string(), chart(id))).collect()
}

pub fn corpus() -> Vec<BenchmarkItem> {
    read_corpus(&fixtures().join("corpus/benchmark.jsonl")).unwrap()
}

pub fn split() -> (Vec<BenchmarkItem>, Vec<BenchmarkItem>) {
    stratified_split(&corpus(), 0.8, SPLIT_SEED).unwrap()
}

pub fn scenario(name: &str) -> Value {
    let text = std::fs::read_to_string(fixtures().join("transcripts/manifest.json")).unwrap();
    let all: Vec<Value> = serde_json::from_str(&text).unwrap();
    all.into_iter().find(|s| s["name"] == name).unwrap_or_else(|| panic!("no scenario `{name}`"))
}

pub fn replay_gateway(name: &str) -> Gateway {
    Gateway::replay(&fixtures().join(format!("transcripts/{name}.jsonl"))).unwrap()
}

pub fn pipeline(name: &str) -> Pipeline {
    let gateway = replay_gateway(name);
    let (_, validation) = split();
    let bank = validation_bank(&gateway, &validation).unwrap();
    Pipeline::new(Arc::new(gateway), bank, PipelineConfig::default())
}

/// Replays an `answer` scenario and returns the answer with the number of
/// transcript entries left unconsumed.
pub fn replay_answer(name: &str) -> (Answer, usize) {
    let s = scenario(name);
    let p = pipeline(name);
    let mut cursor = Cursor::at_root(name);
    cursor.address = s["cursor"].as_str().unwrap().to_string();
    let q = UserQuery::new(s["question"].as_str().unwrap(), cursor);
    let answer = p.answer(&chart(s["chart"].as_str().unwrap()), &q, s["auto"].as_bool().unwrap()).unwrap();
    (answer, p.gateway().remaining())
}

pub fn replay_judge(name: &str) -> JudgeVerdict {
    let s = scenario(name);
    let g = replay_gateway(name);
    let text = |k: &str| s[k].as_str().unwrap().to_string();
    judge(&g, &text("question"), &text("response"), &text("ground_truth"), &[], TIMEOUT).unwrap()
}

pub fn replay_cold_start() -> Vec<Suggestion> {
    pipeline("cold_start").cold_start_suggestions(&chart("bar"))
}

pub fn replay_navgen() -> Vec<BenchmarkItem> {
    let g = replay_gateway("navgen");
    let charts = charts();
    CHARTS
        .iter()
        .flat_map(|id| generate_navigation_queries(&g, id, &charts[*id].tree, 12, TIMEOUT).unwrap())
        .collect()
}

pub fn judge_config(validation: &[BenchmarkItem]) -> JudgeConfig {
    JudgeConfig::from_validation(validation, 2)
}

pub fn replay_benchmark() -> BenchmarkReport {
    let (test, validation) = split();
    let p = pipeline("benchmark");
    run_benchmark(&test, &p, &charts(), &judge_config(&validation), BenchmarkOptions::default())
}
