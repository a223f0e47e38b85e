//! Regenerates the replay transcripts under `fixtures/transcripts`.
//!
//! Each scenario runs the real pipeline against a scripted provider in
//! record mode, so the transcripts hold exactly the prompts the current
//! templates produce. Run with `cargo run -p chartwise-core --example
//! record_fixtures` after changing a template.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chartwise_core::eval::{
    generate_navigation_queries, judge, read_corpus, run_benchmark, stratified_split, validation_bank, BenchmarkItem, BenchmarkOptions,
    JudgeConfig,
};
use chartwise_core::gateway::{Gateway, Reply, Rule, ScriptedProvider};
use chartwise_core::nav::Cursor;
use chartwise_core::pipeline::{ChartContext, ExampleBank, Pipeline, PipelineConfig, QueryType, UserQuery};
use chartwise_core::tree::AccessTree;
use serde_json::json;

const SPLIT_SEED: u64 = 7;
const TIMEOUT: Duration = Duration::from_secs(60);

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn chart(id: &str) -> ChartContext {
    ChartContext::load(id, &root().join(format!("charts/{id}.vl.json"))).expect("chart fixture loads")
}

fn bank(gateway: &Gateway) -> (ExampleBank, Vec<BenchmarkItem>, Vec<BenchmarkItem>) {
    let corpus = read_corpus(&root().join("corpus/benchmark.jsonl")).expect("corpus");
    let (test, validation) = stratified_split(&corpus, 0.8, SPLIT_SEED).expect("split");
    (validation_bank(gateway, &validation).expect("bank"), test, validation)
}

fn refine(q: &str, refined: &str) -> Rule {
    Rule::complete(&[&format!("Question: {q}\nRewritten question:")], Reply::Text(refined.into())).template("refine")
}

fn classify(refined: &str, kind: QueryType) -> Rule {
    Rule::complete(&[&format!("Question: {refined}\nKind:")], Reply::Text(kind.label().into())).template("classify")
}

fn step(refined: &str, after: &[&str], before: &[&str], reply: &str) -> Rule {
    let q = format!("Question: {refined}\n");
    let mut when = vec![q.as_str()];
    when.extend_from_slice(after);
    Rule::complete(&when, Reply::Text(reply.into())).template("tabular").unless(before)
}

fn contextual(refined: &str, snippet: &str, answer: &str) -> [Rule; 2] {
    [
        Rule::web(&[refined], Reply::Text(snippet.into())),
        Rule::complete(&[&format!("Question: {refined}\nAnswer:")], Reply::Text(answer.into())).template("contextual"),
    ]
}

fn navigation(refined: &str, reply: &str) -> Rule {
    Rule::complete(&[&format!("Question: {refined}")], Reply::Text(reply.into())).template("navigation")
}

fn suggest(q: &str, reply: &str) -> Rule {
    Rule::complete(&[&format!("Original question: {q}\n")], Reply::Text(reply.into())).template("suggest")
}

fn provider(rules: Vec<Rule>) -> Arc<ScriptedProvider> {
    Arc::new(rules.into_iter().fold(ScriptedProvider::new(), |p, r| p.rule(r)))
}

struct Recorder {
    dir: PathBuf,
    manifest: Vec<serde_json::Value>,
}

impl Recorder {
    fn gateway(&self, name: &str, rules: Vec<Rule>) -> Gateway {
        Gateway::record(provider(rules), &self.dir.join(format!("{name}.jsonl"))).expect("transcript opens")
    }

    fn answer(&mut self, name: &str, chart_id: &str, question: &str, cursor: &str, auto: bool, rules: Vec<Rule>) {
        let gateway = self.gateway(name, rules);
        let (bank, _, _) = bank(&gateway);
        let pipeline = Pipeline::new(Arc::new(gateway), bank, PipelineConfig::default());
        let mut c = Cursor::at_root(name);
        c.address = cursor.to_string();
        let answer = pipeline.answer(&chart(chart_id), &UserQuery::new(question, c), auto).expect("scenario answers");
        println!("{name}: {}", answer.body);
        if !answer.suggestions.is_empty() {
            println!("  suggestions: {:?}", answer.suggestions);
        }
        self.manifest.push(json!({
            "name": name, "action": "answer", "chart": chart_id, "question": question, "cursor": cursor, "auto": auto,
        }));
    }

    fn judge(&mut self, name: &str, question: &str, response: &str, ground_truth: &str, rules: Vec<Rule>) {
        let gateway = self.gateway(name, rules);
        let v = judge(&gateway, question, response, ground_truth, &[], TIMEOUT).expect("judge scores");
        println!("{name}: {} {}", v.score, v.rationale);
        self.manifest.push(json!({
            "name": name, "action": "judge", "question": question, "response": response, "ground_truth": ground_truth,
        }));
    }
}

/// Six wayfinding and six orientation lines over real addresses.
fn navgen_reply(tree: &AccessTree) -> String {
    let groups: Vec<&str> = tree.nodes().iter().filter(|n| n.address.matches('.').count() == 2).map(|n| n.address.as_str()).collect();
    let channels: Vec<&str> = tree.nodes().iter().filter(|n| n.address.matches('.').count() == 1).map(|n| n.address.as_str()).collect();
    let label = |a: &str| tree.get(a).map(|n| n.label.split(". ").nth(1).unwrap_or(&n.label).to_string()).unwrap_or_default();
    let mut lines = Vec::new();
    for (i, g) in groups.iter().step_by(groups.len().div_ceil(4).max(1)).take(4).enumerate() {
        let from = if i % 2 == 0 { "1" } else { channels[0] };
        lines.push(format!("Wayfinding | {from} | {g} | How do I get to the group where {}?", label(g).to_lowercase()));
    }
    lines.push(format!("Wayfinding | {} | 1 | How do I get back to the top of the chart?", groups[0]));
    lines.push(format!("Wayfinding | 1 | {} | Take me to the last axis or legend.", channels[channels.len() - 1]));
    for (i, g) in groups.iter().rev().step_by(groups.len().div_ceil(4).max(1)).take(4).enumerate() {
        let q = ["Where am I?", "Which group am I on?", "What part of the chart is this?", "What is my current position?"][i];
        lines.push(format!("Orientation | {g} | {q}"));
    }
    lines.push(format!("Orientation | {} | Which axis am I on?", channels[0]));
    lines.push("Orientation | 1 | Am I at the top of the tree?".to_string());
    lines.join("\n")
}

fn benchmark_rules(test: &[BenchmarkItem]) -> Vec<Rule> {
    let mut rules = Vec::new();
    for (i, item) in test.iter().enumerate() {
        let q = item.question.as_str();
        rules.push(refine(q, q));
        // A few deliberate misroutes so the confusion matrix is not diagonal.
        let predicted = match (item.type_label, i % 9) {
            (QueryType::Analytical, 4) => QueryType::Visual,
            (QueryType::Visual, 2) => QueryType::Analytical,
            (QueryType::Contextual, 5) => QueryType::Analytical,
            (k, _) => k,
        };
        rules.push(classify(q, predicted));
        let response = match (item.answerable, i % 5) {
            (false, _) => format!("I could not find this in the data. {}", item.ground_truth),
            (true, 3) => item.ground_truth.split(['.', ',']).next().unwrap_or("").to_string() + ".",
            _ => item.ground_truth.clone(),
        };
        match predicted {
            QueryType::Analytical | QueryType::Visual => {
                rules.push(step(q, &[], &["Observation:"], &format!("Thought: I now know the answer\nAnswer: {response}")));
            }
            QueryType::Contextual => rules.extend(contextual(q, &format!("Background for: {q}"), &response)),
            QueryType::Navigation => {
                let (start, end) = item.ground_truth.split_once("; ").expect("navigation ground truth");
                let same = start.trim_start_matches("Starting Address: ") == end.trim_start_matches("Ending Address: ");
                let kind = if same { "Orientation" } else { "Wayfinding" };
                rules.push(navigation(q, &format!("Navigation Type: {kind}\n{start}\n{end}")));
            }
            QueryType::Unanswerable => {}
        }
        rules.push(suggest(q, "1. What values does the chart show?\n2. What are the axes of the chart?"));
        let score = match (item.answerable, i % 5) {
            (false, _) => "Score: 2\nRationale: Response B hedges and adds content that Response A does not support.",
            (true, 3) => "Score: 4\nRationale: Response B is close to Response A but leaves out some detail.",
            _ => "Score: 5\nRationale: Response B states the same information as Response A.",
        };
        rules.push(Rule::complete(&[&format!("Question: {q}\nResponse A:")], Reply::Text(score.into())).template("judge"));
    }
    rules
}

fn main() {
    let dir = root().join("transcripts");
    std::fs::create_dir_all(&dir).expect("transcript dir");
    let mut rec = Recorder { dir, manifest: Vec::new() };

    let q = "Take me to Haiti";
    rec.answer(
        "haiti",
        "map",
        q,
        "1",
        true,
        vec![
            refine(q, "Take me to the node for Haiti in the Country detail channel."),
            classify("Take me to the node for Haiti in the Country detail channel.", QueryType::Navigation),
            navigation(
                "Take me to the node for Haiti in the Country detail channel.",
                "Navigation Type: Wayfinding\nStarting Point: A choropleth map.\nStarting Address: 1\nEnding Point: 3 of 180. Country equals Haiti.\nEnding Address: 1.2.3",
            ),
        ],
    );

    let q = "What is the vaccination rate of South Africa";
    let r = "What is the percentage of people vaccinated in South Africa?";
    rec.answer(
        "south_africa",
        "map",
        q,
        "1",
        false,
        vec![
            refine(q, r),
            classify(r, QueryType::Analytical),
            step(
                r,
                &[],
                &["Observation:"],
                "Thought: I should find the row for South Africa.\nAction: filter\nAction Input: {\"column\": \"Country\", \"op\": \"==\", \"value\": \"South Africa\"}",
            ),
            step(r, &["Observation: 1 of 180 rows remain."], &[], "Thought: I now know the answer\nAnswer: The vaccination rate of South Africa is 36%."),
        ],
    );

    let q = "How did vaccination rates change over time in every country?";
    rec.answer(
        "termination",
        "map",
        q,
        "1",
        false,
        vec![
            refine(q, q),
            classify(q, QueryType::Analytical),
            Rule::complete(&[&format!("Question: {q}\n")], Reply::Timeout).template("tabular"),
            suggest(q, "1. Which country has the highest vaccination rate?\n2. What is the vaccination rate in each continent?"),
        ],
    );

    let q = "Take me to Guam's data point.";
    rec.answer(
        "guam",
        "map",
        q,
        "1.1",
        false,
        vec![
            refine(q, q),
            classify(q, QueryType::Navigation),
            navigation(q, "Navigation Type: Wayfinding\nStarting Address: None\nEnding Point: Percent Vaccinated: 84.3. Country: Guam.\nEnding Address: 1.2.1.1"),
        ],
    );

    let q = "What's the quickest path to get from the top of the tree to inventory values above 1400000?";
    rec.answer(
        "inventory_path",
        "line",
        q,
        "1.1.2",
        false,
        vec![
            refine(q, q),
            classify(q, QueryType::Navigation),
            navigation(
                q,
                "Navigation Type: Wayfinding\nStarting Point: A line chart.\nStarting Address: 1\nEnding Point: 6 of 6. Inventory is between 1400000 and 1600000.\nEnding Address: 1.2.6",
            ),
        ],
    );

    let q = "What do you mean by temperature anomalies";
    let r = "What does temperature anomaly mean in this chart of yearly temperature anomalies?";
    let [web, answer] = contextual(
        r,
        "Temperature anomalies are any measure of temperatures that are unusual for a particular region, season, or time period.",
        "Temperature anomalies are any measure of temperatures that are unusual for a particular region, season, or time period. In this chart each bar shows how far a year's temperature was from the long-term average.",
    );
    rec.answer("temperature_anomalies", "bar", q, "1", false, vec![refine(q, r), classify(r, QueryType::Contextual), web, answer]);

    let q = "What is a temporal polarity";
    let r = "What does the Temporal Polarity field mean in this chart of temperature anomalies from 1850 to 2021?";
    let [web, answer] = contextual(
        r,
        "Temperature anomaly: a positive anomaly means the observed temperature was warmer than the reference value, a negative anomaly means it was cooler.",
        "In this chart, Temporal Polarity tells whether a year's temperature anomaly is positive, warmer than the long-term average, or negative, cooler than it.",
    );
    rec.answer("temporal_polarity", "bar", q, "1", false, vec![refine(q, r), classify(r, QueryType::Contextual), web, answer]);

    let q = "What color is North America?";
    rec.answer(
        "north_america_color",
        "scatter",
        q,
        "1",
        false,
        vec![
            refine(q, q),
            classify(q, QueryType::Visual),
            step(
                q,
                &[],
                &["Observation:"],
                "Thought: The color column holds the mark colors.\nAction: filter\nAction Input: {\"column\": \"Continent\", \"op\": \"==\", \"value\": \"North America\"}",
            ),
            step(
                q,
                &["Observation: 5 of 31 rows remain."],
                &[],
                "Thought: I now know the answer\nAnswer: The color that represents North America in the dataset is red.",
            ),
        ],
    );

    let q = "What parts of North America are not in the 80 to 100 percent range";
    let r = "Which countries in North America have a percentage of fully vaccinated individuals below 80%";
    rec.answer(
        "north_america_refine",
        "map",
        q,
        "1",
        false,
        vec![
            refine(q, r),
            classify(r, QueryType::Analytical),
            step(
                r,
                &[],
                &["Observation:"],
                "Thought: Keep North American countries first.\nAction: filter\nAction Input: {\"column\": \"Continent\", \"op\": \"==\", \"value\": \"North America\"}",
            ),
            step(
                r,
                &["Observation: 20 of 180 rows remain."],
                &["Observation: 17 of 20"],
                "Thought: Now keep rates below 80.\nAction: filter\nAction Input: {\"column\": \"Percent Vaccinated\", \"op\": \"<\", \"value\": 80}",
            ),
            step(
                r,
                &["Observation: 17 of 20 rows remain."],
                &["Observation: 17 distinct"],
                "Thought: List them.\nAction: unique\nAction Input: {\"column\": \"Country\"}",
            ),
            step(
                r,
                &["Observation: 17 distinct"],
                &[],
                "Thought: I now know the answer\nAnswer: The countries in North America with less than 80% of people vaccinated are Haiti, El Salvador, Panama, Guatemala, Costa Rica, Trinidad and Tobago, Bahamas, Dominican Republic, Mexico, Nicaragua, Jamaica, Honduras, United States, Barbados, Belize, Greenland, and Puerto Rico.",
            ),
        ],
    );

    let q = "Where are these houses sold?";
    rec.answer(
        "houses_sold",
        "line",
        q,
        "1",
        false,
        vec![
            refine(q, q),
            classify(q, QueryType::Analytical),
            step(q, &[], &[], "Thought: I now know the answer\nAnswer: The data does not contain any information about the location of the houses."),
            suggest(
                q,
                "1. What information regarding the sale of these homes is provided in the dataset beyond the date and inventory quantities?\n2. Could you elaborate on any additional details related to the properties or their characteristics available within the dataset?",
            ),
        ],
    );

    let (question, truth) = ("What is the vaccination rate of Rwanda?", "Rwanda has a vaccination rate of 78%.");
    let response = "Rwanda has one of the higher vaccination rates in Africa.";
    rec.judge(
        "rwanda_judge",
        question,
        response,
        truth,
        vec![Rule::complete(
            &["Response B: Rwanda"],
            Reply::Text("Score: 4\nRationale: Response B does not provide the specific percentage rate that Response A gives.".into()),
        )
        .template("judge")],
    );

    let question = "What is the highest temperature anomaly?";
    let truth = "The highest anomaly is 1.02 in 2021.";
    rec.judge(
        "judge_identical",
        question,
        truth,
        truth,
        vec![Rule::complete(&["Response B: The highest"], Reply::Text("Score: 5\nRationale: Response B matches Response A exactly.".into())).template("judge")],
    );

    rec.judge(
        "judge_reask",
        question,
        "The warmest year was 2021.",
        truth,
        vec![
            Rule::complete(&["did not give a score"], Reply::Text("Score: 4\nRationale: Response B names the year but not the value.".into())).template("judge"),
            Rule::complete(&["Response B:"], Reply::Text("Score: 7\nRationale: Excellent.".into())).template("judge"),
        ],
    );

    let bar = chart("bar");
    let gateway = rec.gateway(
        "cold_start",
        vec![Rule::complete(&["Chart description:"], Reply::Text(
            "Analytical: What is the temperature anomaly for the year 2020?\n\
             Visual: Can you provide a description of the color scheme used in the bar chart to represent the temperature anomalies?\n\
             Contextual: Are there any patterns or relationships between the year and the temporal polarity of the temperature anomaly?\n\
             Navigation: How do I get from my current position in the text representation to the x-axis?"
                .into(),
        ))
        .template("cold_start")],
    );
    let (b, _, _) = bank(&gateway);
    let s = Pipeline::new(Arc::new(gateway), b, PipelineConfig::default()).cold_start_suggestions(&bar);
    println!("cold_start: {s:?}");
    rec.manifest.push(json!({"name": "cold_start", "action": "cold_start", "chart": "bar"}));

    let ids = ["bar", "line", "scatter", "map"];
    let charts: HashMap<String, ChartContext> = ids.iter().map(|id| (id.to_string(), chart(id))).collect();
    let rules = ids
        .iter()
        .map(|id| {
            let tree = &charts[*id].tree;
            Rule::complete(&[&format!("Tree:\n1 {}\n", tree.root().label)], Reply::Text(navgen_reply(tree))).template("navgen")
        })
        .collect();
    let gateway = rec.gateway("navgen", rules);
    let mut total = 0;
    for id in ids {
        total += generate_navigation_queries(&gateway, id, &charts[id].tree, 12, TIMEOUT).expect("navgen").len();
    }
    println!("navgen: {total} items");
    rec.manifest.push(json!({"name": "navgen", "action": "navgen", "charts": ids, "n": 12}));

    let probe = Gateway::record_in_memory(provider(Vec::new()));
    let (_, test, validation) = bank(&probe);
    let gateway = rec.gateway("benchmark", benchmark_rules(&test));
    let (b, _, _) = bank(&gateway);
    let pipeline = Pipeline::new(Arc::new(gateway), b, PipelineConfig::default());
    let judge_config = JudgeConfig::from_validation(&validation, 2);
    let report = run_benchmark(&test, &pipeline, &charts, &judge_config, BenchmarkOptions::default());
    println!("benchmark: {} items, {} errors", report.items.len(), report.errors().count());
    print!("{}", report.to_table());
    rec.manifest.push(json!({"name": "benchmark", "action": "benchmark", "split_seed": SPLIT_SEED, "ratio": 0.8}));

    let manifest = serde_json::to_string_pretty(&rec.manifest).expect("manifest serializes");
    std::fs::write(rec.dir.join("manifest.json"), manifest + "\n").expect("manifest writes");
}
