//! Runs the pipeline over a corpus and aggregates judge scores.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::judge::{judge, JudgeConfig, JudgeVerdict, RUBRIC};
use super::metrics::{classification_metrics, ClassificationReport};
use super::BenchmarkItem;
use crate::gateway::Mode;
use crate::nav::Cursor;
use crate::pipeline::{ChartContext, Pipeline, QueryType, UserQuery};

pub const PARTITION_KEYS: [&str; 4] = ["type", "chart", "answerable", "open_ended"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub id: String,
    pub chart_id: String,
    pub type_label: QueryType,
    pub answerable: bool,
    pub open_ended: bool,
    pub predicted: Option<QueryType>,
    pub response: Option<String>,
    pub verdict: Option<JudgeVerdict>,
    pub error: Option<String>,
}

impl ItemResult {
    fn partition_value(&self, key: &str) -> String {
        match key {
            "type" => self.type_label.as_str().to_string(),
            "chart" => self.chart_id.clone(),
            "answerable" => self.answerable.to_string(),
            "open_ended" => self.open_ended.to_string(),
            other => panic!("unknown partition key `{other}`"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub scored: usize,
    pub mean_score: Option<f64>,
    /// Counts for scores 5 down to 1.
    pub distribution: [usize; 5],
}

impl ScoreSummary {
    fn of<'r>(results: impl IntoIterator<Item = &'r ItemResult>) -> ScoreSummary {
        let mut s = ScoreSummary::default();
        let mut total = 0u64;
        for r in results {
            s.count += 1;
            if let Some(v) = &r.verdict {
                s.scored += 1;
                total += v.score as u64;
                s.distribution[5 - v.score as usize] += 1;
            }
        }
        s.mean_score = (s.scored > 0).then(|| total as f64 / s.scored as f64);
        s
    }

    /// Share of scored items at each rubric level, 5 down to 1.
    pub fn shares(&self) -> [f64; 5] {
        self.distribution.map(|c| if self.scored == 0 { 0.0 } else { c as f64 / self.scored as f64 })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Sorted by item id.
    pub items: Vec<ItemResult>,
    pub overall: ScoreSummary,
    /// Partition key, then value, then summary.
    pub partitions: BTreeMap<String, BTreeMap<String, ScoreSummary>>,
    pub classification: Option<ClassificationReport>,
}

impl BenchmarkReport {
    pub fn from_results(mut items: Vec<ItemResult>) -> BenchmarkReport {
        items.sort_by(|a, b| a.id.cmp(&b.id));
        let mut partitions = BTreeMap::new();
        for key in PARTITION_KEYS {
            let mut groups: BTreeMap<String, Vec<&ItemResult>> = BTreeMap::new();
            for r in &items {
                groups.entry(r.partition_value(key)).or_default().push(r);
            }
            let summaries = groups.into_iter().map(|(v, rs)| (v, ScoreSummary::of(rs))).collect();
            partitions.insert(key.to_string(), summaries);
        }
        let (preds, labels): (Vec<QueryType>, Vec<QueryType>) = items
            .iter()
            .filter(|r| QueryType::CLASSES.contains(&r.type_label))
            .filter_map(|r| r.predicted.map(|p| (p, r.type_label)))
            .unzip();
        let classification = (!preds.is_empty()).then(|| classification_metrics(&preds, &labels).expect("equal lengths"));
        BenchmarkReport {
            overall: ScoreSummary::of(&items),
            items,
            partitions,
            classification,
        }
    }

    /// The same report recomputed over a subset of items.
    pub fn filtered(&self, keep: impl Fn(&ItemResult) -> bool) -> BenchmarkReport {
        BenchmarkReport::from_results(self.items.iter().filter(|r| keep(r)).cloned().collect())
    }

    pub fn answerable_only(&self) -> BenchmarkReport {
        self.filtered(|r| r.answerable)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ItemResult> {
        self.items.iter().filter(|r| r.error.is_some())
    }

    /// Plain-text tables, one row per partition value.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let header = RUBRIC.iter().map(|(_, l)| format!("{l:>10}")).collect::<String>();
        let row = |out: &mut String, key: &str, value: &str, s: &ScoreSummary| {
            let mean = s.mean_score.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into());
            let shares: String = s.shares().iter().map(|p| format!("{:>9.2}%", p * 100.0)).collect();
            let _ = writeln!(out, "{key:<11}{value:<14}{:>6}{:>7}{mean:>7}{shares}", s.count, s.scored);
        };
        let _ = writeln!(out, "{:<11}{:<14}{:>6}{:>7}{:>7}{header}", "partition", "value", "items", "scored", "mean");
        row(&mut out, "all", "-", &self.overall);
        for (key, values) in &self.partitions {
            for (value, s) in values {
                row(&mut out, key, value, s);
            }
        }
        if let Some(c) = &self.classification {
            let _ = writeln!(out, "\nclassification accuracy {:.2}% over {} items", c.accuracy * 100.0, c.total);
            for m in &c.per_class {
                let _ = writeln!(
                    out,
                    "{:<11} precision {:>6.2}%  recall {:>6.2}%  f1 {:>6.2}%  support {}",
                    m.kind.as_str(),
                    m.precision * 100.0,
                    m.recall * 100.0,
                    m.f1 * 100.0,
                    m.support
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkOptions {
    /// Worker threads. Only used with a live gateway, since recorded and
    /// replayed transcripts depend on call order.
    pub parallelism: usize,
    pub auto_traverse: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            parallelism: 1,
            auto_traverse: false,
        }
    }
}

fn evaluate(item: &BenchmarkItem, pipeline: &Pipeline, charts: &HashMap<String, ChartContext>, judge_config: &JudgeConfig, auto: bool) -> ItemResult {
    let mut result = ItemResult {
        id: item.id.clone(),
        chart_id: item.chart_id.clone(),
        type_label: item.type_label,
        answerable: item.answerable,
        open_ended: item.open_ended,
        predicted: None,
        response: None,
        verdict: None,
        error: None,
    };
    let Some(chart) = charts.get(&item.chart_id) else {
        result.error = Some(format!("unknown chart `{}`", item.chart_id));
        return result;
    };
    let mut cursor = Cursor::at_root(item.id.clone());
    if let Some(a) = &item.cursor_context {
        cursor.address = a.clone();
    }
    let answer = match pipeline.answer(chart, &UserQuery::new(item.question.clone(), cursor), auto) {
        Ok(a) => a,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    result.predicted = Some(answer.kind);
    if judge_config.enabled && !item.ground_truth.is_empty() {
        let timeout = judge_config.timeout;
        match judge(pipeline.gateway(), &item.question, &answer.body, &item.ground_truth, &judge_config.references, timeout) {
            Ok(v) => result.verdict = Some(v),
            Err(e) => result.error = Some(format!("judge: {e}")),
        }
    }
    result.response = Some(answer.body);
    result
}

/// Answers and scores every item. Failures are recorded on the item and
/// the run continues.
pub fn run_benchmark(
    items: &[BenchmarkItem],
    pipeline: &Pipeline,
    charts: &HashMap<String, ChartContext>,
    judge_config: &JudgeConfig,
    options: BenchmarkOptions,
) -> BenchmarkReport {
    let workers = if pipeline.gateway().mode() == Mode::Live { options.parallelism.max(1) } else { 1 };
    let results = if workers == 1 {
        items.iter().map(|i| evaluate(i, pipeline, charts, judge_config, options.auto_traverse)).collect()
    } else {
        let next = AtomicUsize::new(0);
        let out = Mutex::new(Vec::with_capacity(items.len()));
        std::thread::scope(|s| {
            for _ in 0..workers.min(items.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(item) = items.get(i) else { break };
                    let r = evaluate(item, pipeline, charts, judge_config, options.auto_traverse);
                    out.lock().expect("results lock").push(r);
                });
            }
        });
        out.into_inner().expect("results lock")
    };
    BenchmarkReport::from_results(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: &str, kind: QueryType, answerable: bool, score: Option<u8>) -> ItemResult {
        ItemResult {
            id: id.into(),
            chart_id: "bar".into(),
            type_label: kind,
            answerable,
            open_ended: false,
            predicted: Some(kind),
            response: Some("r".into()),
            verdict: score.map(|s| JudgeVerdict {
                score: s,
                rationale: String::new(),
                raw: String::new(),
            }),
            error: None,
        }
    }

    #[test]
    fn empty_report() {
        let r = BenchmarkReport::from_results(Vec::new());
        assert_eq!(r.overall.count, 0);
        assert_eq!(r.overall.mean_score, None);
        assert!(r.classification.is_none());
        assert!(!r.to_table().is_empty());
    }

    #[test]
    fn partitions_and_answerable_filter() {
        let r = BenchmarkReport::from_results(vec![
            result("b", QueryType::Visual, false, Some(1)),
            result("a", QueryType::Analytical, true, Some(5)),
            result("c", QueryType::Analytical, true, Some(4)),
        ]);
        assert_eq!(r.items[0].id, "a");
        for key in PARTITION_KEYS {
            assert!(r.partitions.contains_key(key), "{key}");
        }
        assert_eq!(r.partitions["type"]["analytical"].count, 2);
        assert_eq!(r.overall.distribution, [1, 1, 0, 0, 1]);
        let before = r.overall.mean_score.unwrap();
        let after = r.answerable_only().overall.mean_score.unwrap();
        assert!((before - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(after, 4.5);
    }

    #[test]
    fn report_is_order_independent() {
        let a = vec![result("x", QueryType::Visual, true, Some(3)), result("y", QueryType::Analytical, true, None)];
        let b: Vec<ItemResult> = a.iter().rev().cloned().collect();
        assert_eq!(BenchmarkReport::from_results(a), BenchmarkReport::from_results(b));
    }
}
