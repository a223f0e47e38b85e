//! The `/v1` HTTP API: sessions over a chart, cursor moves, the data table,
//! and question answering with progress events.

use std::collections::HashMap;
use std::convert::Infallible;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chartwise_core::chart::{sort_view, SortOrder, TransformedView};
use chartwise_core::gateway::{run_with_progress, ProgressConfig, ProgressEvent};
use chartwise_core::nav::{apply_key, auto_traverse, Boundary, Cursor, InstructionScript, Key};
use chartwise_core::pipeline::{Answer, ChartContext, Pipeline, Suggestion, UserQuery};
use chartwise_core::tree::{snapshot_table, SnapshotTable};
use chartwise_core::value::DataValue;
use futures_util::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{watch, Semaphore};

const IDEMPOTENCY_HEADER: &str = "idempotency-key";
const MAX_POLL_WAIT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceOptions {
    pub progress_interval: Duration,
    pub max_concurrent_queries: usize,
    pub retry_after: Duration,
    /// Append-only JSONL log of every mutation.
    pub event_log: Option<PathBuf>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            progress_interval: Duration::from_secs(3),
            max_concurrent_queries: 4,
            retry_after: Duration::from_secs(1),
            event_log: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewMode {
    Tree,
    Table,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortState {
    pub column: String,
    pub order: SortOrder,
}

struct Session {
    id: String,
    chart: Arc<ChartContext>,
    cursor: Cursor,
    view_mode: ViewMode,
    sort: Option<SortState>,
    cold_start: Option<Vec<Suggestion>>,
    cold_start_cleared: bool,
    active: Option<Arc<QueryRun>>,
    queries: HashMap<String, Arc<QueryRun>>,
}

#[derive(Default)]
struct RunState {
    events: Vec<ProgressEvent>,
    answer: Option<Value>,
    error: Option<String>,
    finished: bool,
}

struct QueryRun {
    id: String,
    state: Mutex<RunState>,
    changed: watch::Sender<u64>,
}

impl QueryRun {
    fn new(id: String) -> QueryRun {
        QueryRun {
            id,
            state: Mutex::new(RunState::default()),
            changed: watch::channel(0).0,
        }
    }

    fn update(&self, f: impl FnOnce(&mut RunState)) {
        f(&mut self.state.lock().expect("run lock"));
        self.changed.send_modify(|v| *v += 1);
    }

    fn finished(&self) -> bool {
        self.state.lock().expect("run lock").finished
    }
}

type SessionSlot = Arc<tokio::sync::Mutex<Session>>;

pub struct AppState {
    charts: HashMap<String, Arc<ChartContext>>,
    pipeline: Arc<Pipeline>,
    options: ServiceOptions,
    sessions: Mutex<HashMap<String, SessionSlot>>,
    replies: Mutex<HashMap<String, (StatusCode, Value)>>,
    query_keys: Mutex<HashMap<String, String>>,
    limiter: Arc<Semaphore>,
    log: Option<Mutex<File>>,
    next_session: AtomicU64,
    next_query: AtomicU64,
}

impl AppState {
    pub fn new(charts: HashMap<String, ChartContext>, pipeline: Arc<Pipeline>, options: ServiceOptions) -> std::io::Result<Arc<AppState>> {
        let log = match &options.event_log {
            Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?)),
            None => None,
        };
        Ok(Arc::new(AppState {
            charts: charts.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
            pipeline,
            limiter: Arc::new(Semaphore::new(options.max_concurrent_queries.max(1))),
            options,
            sessions: Mutex::new(HashMap::new()),
            replies: Mutex::new(HashMap::new()),
            query_keys: Mutex::new(HashMap::new()),
            log,
            next_session: AtomicU64::new(1),
            next_query: AtomicU64::new(1),
        }))
    }

    fn session(&self, id: &str) -> Result<SessionSlot, ApiError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`")))
    }

    fn record(&self, session: &str, op: &str, detail: Value) {
        if let Some(log) = &self.log {
            let line = json!({"session": session, "op": op, "detail": detail});
            let mut f = log.lock().expect("log lock");
            if let Err(e) = writeln!(f, "{line}") {
                tracing::warn!("event log write failed: {e}");
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retry_after_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            error: error.to_string(),
            message: message.into(),
            retry_after_ms: None,
            query_id: None,
        }
    }

    fn bad_request(error: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, error, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut resp = (self.status, Json(&self)).into_response();
        if let Some(ms) = self.retry_after_ms {
            let secs = ms.div_ceil(1000).max(1);
            resp.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        resp
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok(status: StatusCode, body: Value) -> ApiResult {
    Ok((status, Json(body)).into_response())
}

fn idempotency_key(headers: &HeaderMap, scope: &str) -> Option<String> {
    headers
        .get(IDEMPOTENCY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(|k| format!("{scope} {k}"))
}

/// Returns the stored reply for a repeated key, or runs `f` and stores it.
async fn once<F, Fut>(state: &AppState, key: Option<String>, f: F) -> ApiResult
where
    F: FnOnce() -> Fut,
    Fut: std::future::Future<Output = Result<(StatusCode, Value), ApiError>>,
{
    if let Some(k) = &key {
        if let Some((status, body)) = state.replies.lock().expect("replies lock").get(k).cloned() {
            return ok(status, body);
        }
    }
    let (status, body) = f().await?;
    if let Some(k) = key {
        state.replies.lock().expect("replies lock").insert(k, (status, body.clone()));
    }
    ok(status, body)
}

fn focused_label(s: &Session) -> String {
    s.chart.tree.get(&s.cursor.address).map(|n| n.label.clone()).unwrap_or_default()
}

fn session_view(s: &Session) -> Value {
    json!({
        "id": s.id,
        "chart_id": s.chart.id,
        "cursor": {"address": s.cursor.address, "table_open": s.cursor.table_open},
        "focused_address": s.cursor.address,
        "focused_label": focused_label(s),
        "view_mode": s.view_mode,
        "sort": s.sort,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TablePage {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub total: usize,
    pub offset: usize,
    pub sort: Option<SortState>,
}

fn table_page(s: &Session, offset: usize, limit: usize) -> Result<TablePage, ApiError> {
    let view: TransformedView = match &s.sort {
        Some(st) => sort_view(&s.chart.view, &st.column, st.order).map_err(|e| ApiError::bad_request("unknown_column", e.to_string()))?,
        None => s.chart.view.clone(),
    };
    Ok(TablePage {
        columns: view.columns().iter().map(|c| c.name.clone()).collect(),
        rows: view.rows().iter().skip(offset).take(limit).map(|r| r.iter().map(DataValue::to_cell).collect()).collect(),
        total: view.len(),
        offset,
        sort: s.sort.clone(),
    })
}

fn snapshot(s: &Session) -> Option<SnapshotTable> {
    s.cursor
        .table_open
        .then(|| snapshot_table(&s.chart.tree, &s.cursor.address, &s.chart.view).ok())
        .flatten()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/tree", get(get_tree))
        .route("/v1/sessions/{id}/key", post(send_key))
        .route("/v1/sessions/{id}/view", post(toggle_view))
        .route("/v1/sessions/{id}/table", get(get_table))
        .route("/v1/sessions/{id}/sort", post(sort_table))
        .route("/v1/sessions/{id}/traverse", post(traverse))
        .route("/v1/sessions/{id}/params", post(set_param))
        .route("/v1/sessions/{id}/suggestions", get(suggestions))
        .route("/v1/sessions/{id}/query", post(submit_query))
        .route("/v1/sessions/{id}/queries/{qid}", get(poll_query))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    chart_id: String,
}

async fn create_session(State(state): State<Arc<AppState>>, headers: HeaderMap, Json(req): Json<CreateSession>) -> ApiResult {
    let key = idempotency_key(&headers, "POST /v1/sessions");
    let st = state.clone();
    once(&state, key, || async move {
        let chart = st
            .charts
            .get(&req.chart_id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_chart", format!("no chart `{}`", req.chart_id)))?;
        let id = format!("s{}", st.next_session.fetch_add(1, Ordering::Relaxed));
        let session = Session {
            id: id.clone(),
            chart,
            cursor: Cursor::at_root(id.clone()),
            view_mode: ViewMode::Tree,
            sort: None,
            cold_start: None,
            cold_start_cleared: false,
            active: None,
            queries: HashMap::new(),
        };
        let body = session_view(&session);
        st.sessions.lock().expect("sessions lock").insert(id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
        st.record(&id, "create", json!({"chart_id": req.chart_id}));
        Ok((StatusCode::CREATED, body))
    })
    .await
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let slot = state.session(&id)?;
    let s = slot.lock().await;
    ok(StatusCode::OK, session_view(&s))
}

async fn get_tree(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let slot = state.session(&id)?;
    let s = slot.lock().await;
    let nodes: Vec<Value> = s
        .chart
        .tree
        .nodes()
        .iter()
        .map(|n| json!({"address": n.address, "level": n.level, "kind": n.kind, "label": n.label}))
        .collect();
    ok(
        StatusCode::OK,
        json!({
            "tree_text": s.chart.tree.tree_text(),
            "nodes": nodes,
            "focused_address": s.cursor.address,
            "focused_label": focused_label(&s),
        }),
    )
}

#[derive(Debug, Deserialize)]
struct KeyRequest {
    key: String,
}

async fn send_key(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, Json(req): Json<KeyRequest>) -> ApiResult {
    let slot = state.session(&id)?;
    let key = idempotency_key(&headers, &format!("POST /v1/sessions/{id}/key"));
    let st = state.clone();
    once(&state, key, || async move {
        let k = Key::parse(&req.key).map_err(|e| ApiError::bad_request("invalid_key", e.to_string()))?;
        let mut s = slot.lock().await;
        let out = apply_key(&s.chart.tree, &s.cursor, k).map_err(|e| ApiError::bad_request("invalid_cursor", e.to_string()))?;
        s.cursor = out.cursor;
        let label = focused_label(&s);
        let announcement = match out.boundary {
            Some(b) => b.announcement().to_string(),
            None if k == Key::T && s.cursor.table_open => format!("Table opened. {label}"),
            None if k == Key::T => format!("Table closed. {label}"),
            None => label.clone(),
        };
        st.record(&id, "key", json!({"key": k.as_str(), "address": s.cursor.address}));
        let boundary: Option<Boundary> = out.boundary;
        Ok((
            StatusCode::OK,
            json!({
                "cursor": {"address": s.cursor.address, "table_open": s.cursor.table_open},
                "focused_address": s.cursor.address,
                "focused_label": label,
                "boundary": boundary,
                "announcement": announcement,
                "table": snapshot(&s),
            }),
        ))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
struct ViewRequest {
    mode: Option<ViewMode>,
}

async fn toggle_view(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, body: Option<Json<ViewRequest>>) -> ApiResult {
    let slot = state.session(&id)?;
    let key = idempotency_key(&headers, &format!("POST /v1/sessions/{id}/view"));
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let st = state.clone();
    once(&state, key, || async move {
        let mut s = slot.lock().await;
        s.view_mode = req.mode.unwrap_or(match s.view_mode {
            ViewMode::Tree => ViewMode::Table,
            ViewMode::Table => ViewMode::Tree,
        });
        st.record(&id, "view", json!({"mode": s.view_mode}));
        let table = match s.view_mode {
            ViewMode::Table => Some(table_page(&s, 0, 50)?),
            ViewMode::Tree => None,
        };
        Ok((
            StatusCode::OK,
            json!({"view_mode": s.view_mode, "focused_address": s.cursor.address, "focused_label": focused_label(&s), "table": table}),
        ))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    #[serde(default)]
    offset: usize,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    50
}

async fn get_table(State(state): State<Arc<AppState>>, Path(id): Path<String>, Query(page): Query<PageQuery>) -> ApiResult {
    let slot = state.session(&id)?;
    let s = slot.lock().await;
    let table = table_page(&s, page.offset, page.limit)?;
    ok(StatusCode::OK, json!({"table": table, "focused_label": focused_label(&s)}))
}

#[derive(Debug, Deserialize)]
struct SortRequest {
    column: String,
    order: String,
    #[serde(default)]
    offset: usize,
    #[serde(default = "default_limit")]
    limit: usize,
}

async fn sort_table(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, Json(req): Json<SortRequest>) -> ApiResult {
    let slot = state.session(&id)?;
    let key = idempotency_key(&headers, &format!("POST /v1/sessions/{id}/sort"));
    let st = state.clone();
    once(&state, key, || async move {
        let order = SortOrder::parse(&req.order).ok_or_else(|| ApiError::bad_request("invalid_order", format!("`{}` is not asc or desc", req.order)))?;
        let mut s = slot.lock().await;
        if s.chart.view.table.column_index(&req.column).is_none() {
            return Err(ApiError::bad_request("unknown_column", format!("no column `{}`", req.column)));
        }
        s.sort = Some(SortState {
            column: req.column.clone(),
            order,
        });
        st.record(&id, "sort", json!({"column": req.column, "order": order}));
        let table = table_page(&s, req.offset, req.limit)?;
        Ok((StatusCode::OK, json!({"table": table, "focused_label": focused_label(&s)})))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct TraverseRequest {
    target: String,
}

async fn traverse(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, Json(req): Json<TraverseRequest>) -> ApiResult {
    let slot = state.session(&id)?;
    let key = idempotency_key(&headers, &format!("POST /v1/sessions/{id}/traverse"));
    let st = state.clone();
    once(&state, key, || async move {
        let mut s = slot.lock().await;
        let t = auto_traverse(&s.chart.tree, &s.cursor, &req.target).map_err(|e| ApiError::bad_request("unknown_address", e.to_string()))?;
        s.cursor = t.cursor;
        st.record(&id, "traverse", json!({"target": req.target}));
        let script: InstructionScript = t.script;
        Ok((
            StatusCode::OK,
            json!({
                "cursor": {"address": s.cursor.address, "table_open": s.cursor.table_open},
                "focused_address": s.cursor.address,
                "focused_label": focused_label(&s),
                "script": script,
            }),
        ))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct ParamRequest {
    name: String,
    value: Value,
}

async fn set_param(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, Json(req): Json<ParamRequest>) -> ApiResult {
    let slot = state.session(&id)?;
    let key = idempotency_key(&headers, &format!("POST /v1/sessions/{id}/params"));
    let st = state.clone();
    once(&state, key, || async move {
        let value = match &req.value {
            Value::Number(n) => DataValue::number(n.as_f64().unwrap_or(f64::NAN)),
            Value::String(t) => DataValue::text(t.clone()),
            other => return Err(ApiError::bad_request("invalid_value", format!("unsupported value {other}"))),
        };
        let mut s = slot.lock().await;
        let next = s.chart.with_param(&req.name, value).map_err(|e| ApiError::bad_request("invalid_param", e.to_string()))?;
        s.chart = Arc::new(next);
        if s.chart.tree.get(&s.cursor.address).is_none() {
            s.cursor.address = "1".into();
        }
        s.cursor.table_open = false;
        s.cold_start = None;
        st.record(&id, "params", json!({"name": req.name, "value": req.value}));
        Ok((StatusCode::OK, session_view(&s)))
    })
    .await
}

async fn suggestions(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let slot = state.session(&id)?;
    let mut s = slot.lock().await;
    if s.cold_start_cleared {
        return ok(StatusCode::OK, json!({"suggestions": [], "focused_label": focused_label(&s)}));
    }
    if s.cold_start.is_none() {
        let pipeline = state.pipeline.clone();
        let chart = s.chart.clone();
        let list = tokio::task::spawn_blocking(move || pipeline.cold_start_suggestions(&chart))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
        s.cold_start = Some(list);
    }
    ok(StatusCode::OK, json!({"suggestions": s.cold_start, "focused_label": focused_label(&s)}))
}

#[derive(Debug, Deserialize)]
struct QueryRequest {
    text: String,
    #[serde(default)]
    auto: bool,
}

fn wants_stream(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/event-stream"))
}

fn start_query(state: &Arc<AppState>, slot: SessionSlot, s: &mut Session, req: QueryRequest) -> Arc<QueryRun> {
    let run = Arc::new(QueryRun::new(format!("q{}", state.next_query.fetch_add(1, Ordering::Relaxed))));
    s.active = Some(run.clone());
    s.queries.insert(run.id.clone(), run.clone());
    s.cold_start_cleared = true;
    let mut q = UserQuery::new(req.text.clone(), s.cursor.clone());
    q.table_mode = s.view_mode == ViewMode::Table || s.cursor.table_open;
    let chart = s.chart.clone();
    let pipeline = state.pipeline.clone();
    let limiter = state.limiter.clone();
    let config = ProgressConfig {
        interval: state.options.progress_interval,
    };
    let st = state.clone();
    state.record(&s.id, "query", json!({"query_id": run.id, "text": req.text, "auto": req.auto}));
    let r = run.clone();
    tokio::spawn(async move {
        let _permit = limiter.acquire_owned().await.expect("limiter open");
        let events = r.clone();
        let result = tokio::task::spawn_blocking(move || {
            run_with_progress(
                config,
                |ev| events.update(|st| st.events.push(ev)),
                |res: &Result<Answer, _>| res.as_ref().err().map(|e: &chartwise_core::pipeline::PipelineError| e.to_string()),
                || pipeline.answer(&chart, &q, req.auto),
            )
        })
        .await;
        let mut s = slot.lock().await;
        let body = match result {
            Ok(Ok(answer)) => {
                if let Some(moved) = answer.navigation.as_ref().and_then(|n| n.moved_to.clone()) {
                    s.cursor.address = moved.address;
                    s.cursor.table_open = false;
                }
                Ok(json!({
                    "query_id": r.id,
                    "answer": answer,
                    "spoken": answer.spoken(),
                    "focused_address": s.cursor.address,
                    "focused_label": focused_label(&s),
                }))
            }
            Ok(Err(e)) => Err(e.to_string()),
            Err(e) => Err(format!("query task failed: {e}")),
        };
        st.record(&s.id, "answer", json!({"query_id": r.id, "ok": body.is_ok()}));
        s.active = None;
        r.update(|st| {
            match body {
                Ok(v) => st.answer = Some(v),
                Err(e) => st.error = Some(e),
            }
            st.finished = true;
        });
    });
    run
}

fn event_stream(run: Arc<QueryRun>) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = run.changed.subscribe();
    stream::unfold((run, rx, 0usize, false), |(run, mut rx, sent, done)| async move {
        if done {
            return None;
        }
        loop {
            let next = {
                let st = run.state.lock().expect("run lock");
                if sent < st.events.len() {
                    Some((Event::default().event("progress").json_data(&st.events[sent]), sent + 1, false))
                } else if st.finished {
                    let ev = match (&st.answer, &st.error) {
                        (Some(a), _) => Event::default().event("answer").json_data(a),
                        (None, e) => Event::default().event("error").json_data(json!({"error": "query_failed", "message": e})),
                    };
                    Some((ev, sent, true))
                } else {
                    None
                }
            };
            if let Some((ev, sent, done)) = next {
                let ev = ev.unwrap_or_else(|e| Event::default().event("error").data(e.to_string()));
                return Some((Ok(ev), (run, rx, sent, done)));
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    })
}

fn query_reply(session: &str, run: &Arc<QueryRun>, headers: &HeaderMap) -> Response {
    if wants_stream(headers) {
        return Sse::new(event_stream(run.clone())).keep_alive(KeepAlive::default()).into_response();
    }
    (
        StatusCode::ACCEPTED,
        Json(json!({"query_id": run.id, "poll": format!("/v1/sessions/{session}/queries/{}", run.id)})),
    )
        .into_response()
}

async fn submit_query(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap, Json(req): Json<QueryRequest>) -> ApiResult {
    let slot = state.session(&id)?;
    if req.text.trim().is_empty() {
        return Err(ApiError::bad_request("empty_query", "query text is empty"));
    }
    let idem = idempotency_key(&headers, &format!("POST /v1/sessions/{id}/query"));
    let mut s = slot.lock().await;
    if let Some(k) = &idem {
        let known = state.query_keys.lock().expect("query keys lock").get(k).cloned();
        if let Some(run) = known.and_then(|qid| s.queries.get(&qid).cloned()) {
            return Ok(query_reply(&id, &run, &headers));
        }
    }
    if let Some(active) = s.active.as_ref().filter(|r| !r.finished()) {
        let mut e = ApiError::new(StatusCode::CONFLICT, "query_in_progress", "a query is already running for this session; retry when it finishes");
        e.retry_after_ms = Some(state.options.retry_after.as_millis() as u64);
        e.query_id = Some(active.id.clone());
        return Err(e);
    }
    let run = start_query(&state, slot.clone(), &mut s, req);
    if let Some(k) = idem {
        state.query_keys.lock().expect("query keys lock").insert(k, run.id.clone());
    }
    Ok(query_reply(&id, &run, &headers))
}

#[derive(Debug, Deserialize)]
struct PollQuery {
    #[serde(default)]
    after: usize,
    #[serde(default)]
    wait_ms: u64,
}

async fn poll_query(State(state): State<Arc<AppState>>, Path((id, qid)): Path<(String, String)>, Query(p): Query<PollQuery>) -> ApiResult {
    let slot = state.session(&id)?;
    let run = slot
        .lock()
        .await
        .queries
        .get(&qid)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_query", format!("no query `{qid}`")))?;
    let mut rx = run.changed.subscribe();
    let wait = Duration::from_millis(p.wait_ms).min(MAX_POLL_WAIT);
    let deadline = tokio::time::Instant::now() + wait;
    loop {
        {
            let st = run.state.lock().expect("run lock");
            if st.events.len() > p.after || st.finished || tokio::time::Instant::now() >= deadline {
                let events: Vec<&ProgressEvent> = st.events.iter().skip(p.after).collect();
                return ok(
                    StatusCode::OK,
                    json!({
                        "query_id": run.id,
                        "events": events,
                        "next": st.events.len(),
                        "finished": st.finished,
                        "result": st.answer,
                        "error": st.error,
                    }),
                );
            }
        }
        if tokio::time::timeout_at(deadline, rx.changed()).await.is_err() {
            continue;
        }
    }
}
