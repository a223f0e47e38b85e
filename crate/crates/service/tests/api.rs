use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use chartwise_core::eval::{read_corpus, stratified_split, validation_bank};
use chartwise_core::gateway::{Gateway, Reply, Rule, ScriptedProvider, LOADING_CUE, STILL_LOADING_CUE};
use chartwise_core::pipeline::{ChartContext, Pipeline, PipelineConfig, QueryType, NAV_DISABLED};
use chartwise_service::{router, AppState, ServiceOptions};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const HAITI: &str = "Take me to Haiti";
const HAITI_REFINED: &str = "Take me to the node for Haiti in the Country detail channel.";
const SA: &str = "What is the vaccination rate of South Africa";
const SA_REFINED: &str = "What is the vaccination rate of South Africa in the data?";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn charts() -> HashMap<String, ChartContext> {
    ["bar", "line", "scatter", "map"]
        .iter()
        .map(|id| {
            let c = ChartContext::load(*id, &fixtures().join(format!("charts/{id}.vl.json"))).unwrap();
            (id.to_string(), c)
        })
        .collect()
}

fn refine(q: &str, refined: &str) -> Rule {
    Rule::complete(&[&format!("Question: {q}\nRewritten question:")], Reply::Text(refined.into())).template("refine")
}

fn classify(refined: &str, reply: Reply) -> Rule {
    Rule::complete(&[&format!("Question: {refined}\nKind:")], reply).template("classify")
}

/// Haiti and South Africa questions, with classification of the latter
/// delayed by `sa_delay_ms`.
fn rules(sa_delay_ms: u64) -> Vec<Rule> {
    let sa_kind = QueryType::Analytical.label().to_string();
    vec![
        refine(HAITI, HAITI_REFINED),
        classify(HAITI_REFINED, Reply::Text(QueryType::Navigation.label().into())),
        Rule::complete(
            &[&format!("Question: {HAITI_REFINED}")],
            Reply::Text(
                "Navigation Type: Wayfinding\nStarting Point: A choropleth map.\nStarting Address: 1\nEnding Point: 3 of 180. Country equals Haiti.\nEnding Address: 1.2.3"
                    .into(),
            ),
        )
        .template("navigation"),
        refine(SA, SA_REFINED),
        classify(SA_REFINED, if sa_delay_ms > 0 { Reply::Delay(sa_delay_ms, sa_kind) } else { Reply::Text(sa_kind) }),
        Rule::complete(
            &[&format!("Question: {SA_REFINED}\n")],
            Reply::Text(
                "Thought: I should find the row for South Africa.\nAction: filter\nAction Input: {\"column\": \"Country\", \"op\": \"==\", \"value\": \"South Africa\"}"
                    .into(),
            ),
        )
        .template("tabular")
        .unless(&["Observation:"]),
        Rule::complete(
            &[&format!("Question: {SA_REFINED}\n"), "Observation: 1 of 180 rows remain."],
            Reply::Text("Thought: I now know the answer\nAnswer: The vaccination rate of South Africa is 36%.".into()),
        )
        .template("tabular"),
        Rule::complete(
            &["Chart description:"],
            Reply::Text(
                "Analytical: Which country has the highest share vaccinated?\nVisual: What color marks the lowest range?\nContextual: Why might rates differ by region?\nNavigation: How do I reach the Country channel?"
                    .into(),
            ),
        )
        .template("cold_start"),
    ]
}

fn provider(rules: Vec<Rule>) -> Arc<ScriptedProvider> {
    Arc::new(rules.into_iter().fold(ScriptedProvider::new(), |p, r| p.rule(r)))
}

fn pipeline(gateway: Gateway) -> Arc<Pipeline> {
    let corpus = read_corpus(&fixtures().join("corpus/benchmark.jsonl")).unwrap();
    let (_, validation) = stratified_split(&corpus, 0.8, 7).unwrap();
    let bank = validation_bank(&gateway, &validation).unwrap();
    Arc::new(Pipeline::new(Arc::new(gateway), bank, PipelineConfig::default()))
}

fn app_with(gateway: Gateway, options: ServiceOptions) -> Router {
    router(AppState::new(charts(), pipeline(gateway), options).unwrap())
}

fn app(sa_delay_ms: u64) -> Router {
    app_with(Gateway::live(provider(rules(sa_delay_ms))), ServiceOptions::default())
}

struct Resp {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    text: String,
}

impl Resp {
    fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>, extra: &[(&str, &str)]) -> Resp {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in extra {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Resp {
        status,
        headers,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

async fn post(app: &Router, uri: &str, body: Value) -> Resp {
    send(app, "POST", uri, Some(body), &[]).await
}

async fn get(app: &Router, uri: &str) -> Resp {
    send(app, "GET", uri, None, &[]).await
}

async fn session(app: &Router, chart: &str) -> String {
    let r = post(app, "/v1/sessions", json!({"chart_id": chart})).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    r.json()["id"].as_str().unwrap().to_string()
}

/// Parses an event stream body into (event, data) pairs.
fn sse(text: &str) -> Vec<(String, Value)> {
    text.split("\n\n")
        .filter_map(|block| {
            let mut event = None;
            let mut data = String::new();
            for line in block.lines() {
                if let Some(e) = line.strip_prefix("event:") {
                    event = Some(e.trim().to_string());
                } else if let Some(d) = line.strip_prefix("data:") {
                    data.push_str(d.trim_start());
                }
            }
            Some((event?, serde_json::from_str(&data).ok()?))
        })
        .collect()
}

async fn ask_stream(app: &Router, sid: &str, text: &str, auto: bool) -> Vec<(String, Value)> {
    let r = send(
        app,
        "POST",
        &format!("/v1/sessions/{sid}/query"),
        Some(json!({"text": text, "auto": auto})),
        &[("accept", "text/event-stream")],
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    sse(&r.text)
}

fn final_answer(events: &[(String, Value)]) -> &Value {
    let (kind, data) = events.last().unwrap();
    assert_eq!(kind, "answer", "{events:?}");
    data
}

#[tokio::test]
async fn sessions_start_at_the_root() {
    let app = app(0);
    let sid = session(&app, "map").await;
    let v = get(&app, &format!("/v1/sessions/{sid}")).await.json();
    assert_eq!(v["chart_id"], "map");
    assert_eq!(v["focused_address"], "1");
    assert_eq!(v["view_mode"], "tree");
    assert!(v["focused_label"].as_str().unwrap().starts_with("A choropleth map."));
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let app = app(0);
    let r = get(&app, "/v1/sessions/nope").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"], "unknown_session");
    let r = post(&app, "/v1/sessions", json!({"chart_id": "pie"})).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"], "unknown_chart");
    let r = post(&app, "/v1/sessions/nope/key", json!({"key": "down"})).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn tree_lists_every_node() {
    let app = app(0);
    let sid = session(&app, "map").await;
    let v = get(&app, &format!("/v1/sessions/{sid}/tree")).await.json();
    let nodes = v["nodes"].as_array().unwrap();
    assert_eq!(nodes[0]["kind"], "root");
    let haiti = nodes.iter().find(|n| n["address"] == "1.2.3").unwrap();
    assert_eq!(haiti["label"], "3 of 180. Country equals Haiti. 1 value. Press t to open table.");
    assert_eq!(nodes.iter().map(|n| n["level"].as_u64().unwrap()).max(), Some(4));
    assert!(v["tree_text"].as_str().unwrap().starts_with("1 A choropleth map."));
}

#[tokio::test]
async fn keys_move_the_cursor_and_report_boundaries() {
    let app = app(0);
    let sid = session(&app, "map").await;
    let uri = format!("/v1/sessions/{sid}/key");
    let v = post(&app, &uri, json!({"key": "down"})).await.json();
    assert_eq!(v["focused_address"], "1.1");
    assert!(v["boundary"].is_null());
    let v = post(&app, &uri, json!({"key": "left"})).await.json();
    assert_eq!(v["focused_address"], "1.1");
    assert_eq!(v["boundary"], "first_sibling");
    for k in ["right", "down", "right", "right"] {
        post(&app, &uri, json!({"key": k})).await;
    }
    let v = post(&app, &uri, json!({"key": "t"})).await.json();
    assert_eq!(v["focused_address"], "1.2.3");
    assert_eq!(v["cursor"]["table_open"], true);
    let table = &v["table"];
    assert_eq!(table["rows"].as_array().unwrap().len(), 1);
    assert_eq!(table["origin_address"], "1.2.3");
    let r = post(&app, &uri, json!({"key": "enter"})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "invalid_key");
}

#[tokio::test]
async fn table_view_sorts_and_pages() {
    let app = app(0);
    let sid = session(&app, "map").await;
    let v = post(&app, &format!("/v1/sessions/{sid}/view"), json!({})).await.json();
    assert_eq!(v["view_mode"], "table");
    assert_eq!(v["table"]["total"], 180);
    let v = post(
        &app,
        &format!("/v1/sessions/{sid}/sort"),
        json!({"column": "Percent Vaccinated", "order": "desc", "limit": 3}),
    )
    .await
    .json();
    let rows = v["table"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let pv = v["table"]["columns"].as_array().unwrap().iter().position(|c| c == "Percent Vaccinated").unwrap();
    let first: Vec<f64> = rows.iter().map(|r| r[pv].as_str().unwrap().parse().unwrap()).collect();
    assert!(first.windows(2).all(|w| w[0] >= w[1]), "{first:?}");
    let page = get(&app, &format!("/v1/sessions/{sid}/table?offset=178&limit=10")).await.json();
    assert_eq!(page["table"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(page["table"]["sort"]["order"], "desc");
    let r = post(&app, &format!("/v1/sessions/{sid}/sort"), json!({"column": "Nope", "order": "asc"})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let v = post(&app, &format!("/v1/sessions/{sid}/view"), json!({})).await.json();
    assert_eq!(v["view_mode"], "tree");
}

#[tokio::test]
async fn streamed_query_reports_progress_then_the_answer() {
    let app = app(0);
    let sid = session(&app, "map").await;
    let events = ask_stream(&app, &sid, HAITI, true).await;
    let (kind, first) = &events[0];
    assert_eq!(kind, "progress");
    assert_eq!(first["message"], LOADING_CUE);
    assert_eq!(first["phase"], "started");
    let a = final_answer(&events);
    assert_eq!(a["focused_address"], "1.2.3");
    assert_eq!(a["focused_label"], "3 of 180. Country equals Haiti. 1 value. Press t to open table.");
    assert_eq!(a["answer"]["kind"], "navigation");
    let v = get(&app, &format!("/v1/sessions/{sid}")).await.json();
    assert_eq!(v["focused_address"], "1.2.3");
}

#[tokio::test]
async fn slow_queries_emit_still_loading_cues() {
    let app = app_with(
        Gateway::live(provider(rules(7000))),
        ServiceOptions {
            progress_interval: Duration::from_secs(3),
            ..ServiceOptions::default()
        },
    );
    let sid = session(&app, "map").await;
    let events = ask_stream(&app, &sid, SA, false).await;
    assert_eq!(events[0].1["message"], LOADING_CUE);
    let still = events.iter().filter(|(_, d)| d["message"] == STILL_LOADING_CUE).count();
    assert!(still >= 2, "{events:?}");
    assert!(final_answer(&events)["answer"]["body"].as_str().unwrap().contains("36%"));
}

#[tokio::test]
async fn polling_returns_events_and_result() {
    let app = app(0);
    let sid = session(&app, "map").await;
    let r = post(&app, &format!("/v1/sessions/{sid}/query"), json!({"text": SA})).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let qid = r.json()["query_id"].as_str().unwrap().to_string();
    let mut after = 0;
    let mut messages = Vec::new();
    let result = loop {
        let v = get(&app, &format!("/v1/sessions/{sid}/queries/{qid}?after={after}&wait_ms=2000")).await.json();
        for e in v["events"].as_array().unwrap() {
            messages.push(e["message"].as_str().unwrap().to_string());
        }
        after = v["next"].as_u64().unwrap() as usize;
        if v["finished"] == true {
            break v["result"].clone();
        }
    };
    assert_eq!(messages.first().map(String::as_str), Some(LOADING_CUE));
    assert!(result["answer"]["body"].as_str().unwrap().contains("36%"));
    let r = get(&app, &format!("/v1/sessions/{sid}/queries/q999")).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

async fn wait_finished(app: &Router, sid: &str, qid: &str) -> Value {
    let mut after = 0;
    loop {
        let v = get(app, &format!("/v1/sessions/{sid}/queries/{qid}?after={after}&wait_ms=5000")).await.json();
        if v["finished"] == true {
            return v;
        }
        after = v["next"].as_u64().unwrap() as usize;
    }
}

#[tokio::test]
async fn second_query_while_one_runs_conflicts() {
    let app = app(1500);
    let sid = session(&app, "map").await;
    let uri = format!("/v1/sessions/{sid}/query");
    let r = post(&app, &uri, json!({"text": SA})).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let qid = r.json()["query_id"].clone();
    let r = post(&app, &uri, json!({"text": HAITI})).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.headers.get(header::RETRY_AFTER).unwrap(), "1");
    let v = r.json();
    assert_eq!(v["error"], "query_in_progress");
    assert_eq!(v["retry_after_ms"], 1000);
    assert_eq!(v["query_id"], qid);
    let done = wait_finished(&app, &sid, qid.as_str().unwrap()).await;
    assert_eq!(done["finished"], true);
    let r = post(&app, &uri, json!({"text": HAITI})).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
}

#[tokio::test]
async fn other_sessions_are_not_blocked() {
    let app = app(1500);
    let a = session(&app, "map").await;
    let b = session(&app, "map").await;
    let r = post(&app, &format!("/v1/sessions/{a}/query"), json!({"text": SA})).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let r = post(&app, &format!("/v1/sessions/{b}/key"), json!({"key": "down"})).await;
    assert_eq!(r.status, StatusCode::OK);
}

#[tokio::test]
async fn navigation_is_disabled_in_table_view() {
    let app = app(0);
    let sid = session(&app, "map").await;
    post(&app, &format!("/v1/sessions/{sid}/view"), json!({"mode": "table"})).await;
    let events = ask_stream(&app, &sid, HAITI, true).await;
    let a = final_answer(&events);
    assert_eq!(a["answer"]["body"], NAV_DISABLED);
    assert_eq!(a["focused_address"], "1");
}

#[tokio::test]
async fn idempotency_keys_replay_the_first_reply() {
    let app = app(0);
    let key = [("idempotency-key", "abc")];
    let r1 = send(&app, "POST", "/v1/sessions", Some(json!({"chart_id": "map"})), &key).await;
    let r2 = send(&app, "POST", "/v1/sessions", Some(json!({"chart_id": "map"})), &key).await;
    assert_eq!(r1.status, StatusCode::CREATED);
    assert_eq!(r1.text, r2.text);
    let sid = r1.json()["id"].as_str().unwrap().to_string();
    let uri = format!("/v1/sessions/{sid}/key");
    let k = [("idempotency-key", "k1")];
    send(&app, "POST", &uri, Some(json!({"key": "down"})), &k).await;
    let v = send(&app, "POST", &uri, Some(json!({"key": "down"})), &k).await.json();
    assert_eq!(v["focused_address"], "1.1");
    let quri = format!("/v1/sessions/{sid}/query");
    let q = [("idempotency-key", "q1")];
    let a = send(&app, "POST", &quri, Some(json!({"text": SA})), &q).await;
    let b = send(&app, "POST", &quri, Some(json!({"text": SA})), &q).await;
    assert_eq!(a.status, StatusCode::ACCEPTED);
    assert_eq!(b.status, StatusCode::ACCEPTED);
    assert_eq!(a.json()["query_id"], b.json()["query_id"]);
}

#[tokio::test]
async fn cold_start_suggestions_clear_after_the_first_query() {
    let app = app(0);
    let sid = session(&app, "map").await;
    let uri = format!("/v1/sessions/{sid}/suggestions");
    let v = get(&app, &uri).await.json();
    let kinds: Vec<&str> = v["suggestions"].as_array().unwrap().iter().map(|s| s["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["analytical", "visual", "contextual", "navigation"]);
    ask_stream(&app, &sid, SA, false).await;
    let v = get(&app, &uri).await.json();
    assert_eq!(v["suggestions"], json!([]));
}

#[tokio::test]
async fn traverse_jumps_and_reports_keys() {
    let app = app(0);
    let sid = session(&app, "map").await;
    post(&app, &format!("/v1/sessions/{sid}/key"), json!({"key": "down"})).await;
    let v = post(&app, &format!("/v1/sessions/{sid}/traverse"), json!({"target": "1.2.1.1"})).await.json();
    assert_eq!(v["focused_address"], "1.2.1.1");
    assert_eq!(v["script"]["spoken"], "Press the right arrow key. Press the down arrow key 2 times.");
    let r = post(&app, &format!("/v1/sessions/{sid}/traverse"), json!({"target": "9.9"})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn params_rebuild_the_chart() {
    let app = app(0);
    let sid = session(&app, "scatter").await;
    let r = post(&app, &format!("/v1/sessions/{sid}/params"), json!({"name": "year", "value": 1997})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let t = get(&app, &format!("/v1/sessions/{sid}/table?limit=500")).await.json();
    let cols = t["table"]["columns"].as_array().unwrap();
    let year = cols.iter().position(|c| c == "Year").unwrap();
    assert!(t["table"]["rows"].as_array().unwrap().iter().all(|r| r[year] == "1997"));
    let r = post(&app, &format!("/v1/sessions/{sid}/params"), json!({"name": "year", "value": 1900})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

async fn scripted_session(app: &Router) -> Vec<Value> {
    let sid = session(app, "map").await;
    let mut out = Vec::new();
    for (q, auto) in [(SA, false), (HAITI, true)] {
        let events = ask_stream(app, &sid, q, auto).await;
        out.push(final_answer(&events).clone());
    }
    out.push(get(app, &format!("/v1/sessions/{sid}")).await.json());
    out
}

#[tokio::test]
async fn recorded_sessions_replay_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("api.jsonl");
    let recorded = {
        let g = Gateway::record(provider(rules(0)), &path).unwrap();
        scripted_session(&app_with(g, ServiceOptions::default())).await
    };
    let replayed = scripted_session(&app_with(Gateway::replay(&path).unwrap(), ServiceOptions::default())).await;
    assert_eq!(recorded, replayed);
    assert!(recorded[0]["answer"]["body"].as_str().unwrap().contains("36%"));
}

#[tokio::test]
async fn mutations_are_logged() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let app = app_with(
        Gateway::live(provider(rules(0))),
        ServiceOptions {
            event_log: Some(log.clone()),
            ..ServiceOptions::default()
        },
    );
    let sid = session(&app, "map").await;
    post(&app, &format!("/v1/sessions/{sid}/key"), json!({"key": "down"})).await;
    get(&app, &format!("/v1/sessions/{sid}/tree")).await;
    let lines: Vec<Value> = std::fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let ops: Vec<&str> = lines.iter().map(|l| l["op"].as_str().unwrap()).collect();
    assert_eq!(ops, ["create", "key"]);
    assert_eq!(lines[1]["detail"]["address"], "1.1");
}
