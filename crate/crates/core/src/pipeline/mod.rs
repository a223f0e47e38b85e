//! The answering pipeline: refine, classify, dispatch to a type-specific
//! agent, format numbers, and justify. Every failure after the input check
//! still produces an [`Answer`], carrying alternative questions when the
//! model can supply them.

mod examples;
mod format;
mod navigation;
mod suggest;
mod tabular;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use examples::{select_examples, BankEntry, ExampleBank};
pub use format::format_numbers;
pub use navigation::{answer_navigation, parse_navigation, resolve_request, NavRequest, NavigationAnswer, NavigationKind, NavigationOutcome};
pub use suggest::{cold_start_suggestions, fallback_suggestions, parse_cold_start, parse_two, suggest_alternatives, Suggestion};
pub use tabular::{calc, parse_answer, run_agent, AgentBudget, AgentContext, AgentOutcome, Describe, FilterOp, TableHost, ToolError, TOOLS};

use crate::chart::{load_chart, materialize_view, update_params, ChartError, ChartSpec, TransformedView};
use crate::color::name_map;
use crate::gateway::{Gateway, GatewayError};
use crate::nav::{Cursor, InstructionScript};
use crate::prompts;
use crate::tree::{build_tree, render_tree_text, AccessTree};
use crate::value::DataValue;

pub const TERMINATION_MESSAGE: &str =
    "I'm sorry, but the process has been terminated because it took too long to arrive at an answer.";
pub const APOLOGY: &str = "I am sorry. I am unable to answer this question";
pub const NAV_FAILURE: &str = "The question was interpreted as involving navigation, but either no starting/ending point was provided, or the tree view was not activated. Please try again.";
pub const NAV_DISABLED: &str =
    "Navigation questions are disabled while the data table is open. Press t to return to the tree view and ask again.";
pub const CANNOT_ANSWER: &str = "I am sorry but I cannot answer the question.";
pub const NO_EXTERNAL_INFO: &str = "No external information was found for this question.";

const CLASSIFY_REASK: &str = "Your previous reply was not one of the allowed answers. Reply with exactly one of: Analytical Query, Visual Query, Contextual Query, Navigation Query.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("example bank has {have} {kind:?} entries, need {need}")]
    InsufficientBank { kind: QueryType, have: usize, need: usize },
    #[error("classifier output could not be parsed: {0}")]
    Unparseable(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryType {
    Analytical,
    Visual,
    Contextual,
    Navigation,
    Unanswerable,
}

impl QueryType {
    /// The four types the classifier can name.
    pub const CLASSES: [QueryType; 4] = [QueryType::Analytical, QueryType::Visual, QueryType::Contextual, QueryType::Navigation];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::Analytical => "analytical",
            QueryType::Visual => "visual",
            QueryType::Contextual => "contextual",
            QueryType::Navigation => "navigation",
            QueryType::Unanswerable => "unanswerable",
        }
    }

    /// The classifier's output label.
    pub fn label(self) -> &'static str {
        match self {
            QueryType::Analytical => "Analytical Query",
            QueryType::Visual => "Visual Query",
            QueryType::Contextual => "Contextual Query",
            QueryType::Navigation => "Navigation Query",
            QueryType::Unanswerable => APOLOGY,
        }
    }

    pub fn parse(s: &str) -> Option<QueryType> {
        let s = s.trim().to_ascii_lowercase();
        [QueryType::Analytical, QueryType::Visual, QueryType::Contextual, QueryType::Navigation, QueryType::Unanswerable]
            .into_iter()
            .find(|k| s == k.as_str() || s == k.label().to_ascii_lowercase())
    }
}

/// Maps classifier output to a type: the apology means unanswerable, and
/// exactly one label must appear otherwise.
pub fn parse_classification(text: &str) -> Option<QueryType> {
    let lower = text.to_lowercase();
    if lower.contains("unable to answer this question") {
        return Some(QueryType::Unanswerable);
    }
    let hits: Vec<QueryType> = QueryType::CLASSES
        .into_iter()
        .filter(|k| lower.contains(&k.label().to_lowercase()))
        .collect();
    match hits.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserQuery {
    pub text: String,
    pub session: String,
    pub cursor: Cursor,
    pub table_mode: bool,
}

impl UserQuery {
    pub fn new(text: impl Into<String>, cursor: Cursor) -> UserQuery {
        UserQuery {
            text: text.into(),
            session: cursor.session.clone(),
            cursor,
            table_mode: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub query_echo: String,
    pub refined_query: String,
    pub justification: String,
    pub body: String,
    pub kind: QueryType,
    pub suggestions: Vec<String>,
    pub instruction_script: Option<InstructionScript>,
    pub navigation: Option<NavigationOutcome>,
    /// True when the body reports a failure rather than an answer.
    pub failed: bool,
    pub warnings: Vec<String>,
}

impl Answer {
    /// Justification and body as read aloud.
    pub fn spoken(&self) -> String {
        format!("{}\n{}", self.justification, self.body)
    }
}

fn justification(kind: QueryType, query: &str) -> String {
    match kind {
        QueryType::Analytical => format!(
            "Your question '{query}' was categorized as being data-focused, and as such, has been answered based on the chart's underlying data."
        ),
        QueryType::Visual => format!(
            "Your question '{query}' was categorized as being visual, and as such, has been answered based on the chart's visual encodings and data."
        ),
        QueryType::Contextual => format!(
            "Your question '{query}' was categorized as being context-seeking, and as such, has been answered based on information found on the web."
        ),
        QueryType::Navigation => format!(
            "Your question '{query}' was categorized as being navigational, and as such, has been answered based on the chart's tree view."
        ),
        QueryType::Unanswerable => format!(
            "Your question '{query}' could not be categorized as a supported question type, and as such, has not been answered."
        ),
    }
}

/// Wraps a body with the echo and source-scope sentence. Numbers in the body
/// are formatted; a navigation script is carried as is.
pub fn justify(body: &str, kind: QueryType, query_echo: &str) -> Answer {
    Answer {
        query_echo: query_echo.to_string(),
        refined_query: query_echo.to_string(),
        justification: justification(kind, query_echo),
        body: format_numbers(body),
        kind,
        suggestions: Vec::new(),
        instruction_script: None,
        navigation: None,
        failed: false,
        warnings: Vec::new(),
    }
}

/// Heuristic for answers that technically succeeded but say nothing.
pub fn looks_incomplete(body: &str) -> bool {
    let b = body.to_lowercase();
    [
        "no answer can be found",
        "cannot answer",
        "unable to answer",
        "does not contain any information",
        "not enough information",
        "i don't know",
        "i do not know",
    ]
    .iter()
    .any(|p| b.contains(p))
}

/// A loaded chart with everything the pipeline reads from it.
#[derive(Debug, Clone)]
pub struct ChartContext {
    pub id: String,
    pub spec: ChartSpec,
    pub view: TransformedView,
    pub tree: AccessTree,
    pub color_names: HashMap<String, String>,
}

impl ChartContext {
    pub fn new(id: impl Into<String>, spec: ChartSpec, view: TransformedView) -> ChartContext {
        let tree = build_tree(&spec, &view);
        let color_names = view.row_color_hex.as_ref().map(|h| name_map(h.iter())).unwrap_or_default();
        ChartContext {
            id: id.into(),
            spec,
            view,
            tree,
            color_names,
        }
    }

    pub fn load(id: impl Into<String>, path: &Path) -> Result<ChartContext, PipelineError> {
        let (spec, view) = load_chart(path)?;
        Ok(ChartContext::new(id, spec, view))
    }

    /// Rebuilds the view and tree with parameter `name` set to `value`.
    pub fn with_param(&self, name: &str, value: DataValue) -> Result<ChartContext, PipelineError> {
        let spec = update_params(&self.spec, name, value)?;
        let view = materialize_view(&spec, &spec.load_data()?)?;
        Ok(ChartContext::new(self.id.clone(), spec, view))
    }

    /// Root, channel, and group lines; the text the prompts describe the
    /// chart with.
    pub fn summary_text(&self) -> String {
        render_tree_text(&self.tree, 3).trim_end().to_string()
    }

    pub fn csv(&self) -> String {
        crate::chart::export_csv(&self.view, self.view.row_color_hex.as_ref().map(|_| &self.color_names))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Examples per type in the classification prompt.
    pub examples_per_type: usize,
    /// Timeout for single model or web calls outside the data agent.
    pub call_timeout: Duration,
    pub agent: AgentBudget,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            examples_per_type: 4,
            call_timeout: Duration::from_secs(60),
            agent: AgentBudget::default(),
        }
    }
}

pub struct Pipeline {
    gateway: Arc<Gateway>,
    bank: ExampleBank,
    config: PipelineConfig,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("bank", &self.bank.entries.len()).field("config", &self.config).finish()
    }
}

impl Pipeline {
    pub fn new(gateway: Arc<Gateway>, bank: ExampleBank, config: PipelineConfig) -> Pipeline {
        Pipeline { gateway, bank, config }
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn bank(&self) -> &ExampleBank {
        &self.bank
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Rewrites the question to be specific to the chart. Falls back to the
    /// raw text, with a warning, when the call fails or returns nothing.
    pub fn refine_query(&self, query: &str, tree_text: &str) -> (String, Option<String>) {
        let prompt = prompts::render("refine", &[("tree", tree_text), ("query", query)]);
        match self.gateway.complete(&prompt, self.config.call_timeout) {
            Ok(c) => {
                let line = c
                    .text
                    .lines()
                    .map(str::trim)
                    .find(|l| !l.is_empty())
                    .unwrap_or("")
                    .trim_start_matches("Rewritten question:")
                    .trim()
                    .trim_matches(|ch| matches!(ch, '"' | '“' | '”'))
                    .trim()
                    .to_string();
                if line.is_empty() {
                    let w = "refinement returned no text; using the original question".to_string();
                    tracing::warn!("{w}");
                    (query.to_string(), Some(w))
                } else {
                    (line, None)
                }
            }
            Err(e) => {
                let w = format!("refinement failed ({e}); using the original question");
                tracing::warn!("{w}");
                (query.to_string(), Some(w))
            }
        }
    }

    /// Classifies with similarity-selected examples. One corrective re-ask on
    /// unparseable output.
    pub fn classify(&self, query: &str) -> Result<QueryType, PipelineError> {
        let embedding = self.gateway.embed(query)?;
        let picked = select_examples(&embedding, &self.bank, self.config.examples_per_type)?;
        let list = |kind: QueryType| -> String {
            picked
                .iter()
                .find(|(k, _)| *k == kind)
                .map(|(_, es)| es.iter().map(|e| format!("- {}", e.question)).collect::<Vec<_>>().join("\n"))
                .unwrap_or_default()
        };
        let (a, v, c, n) = (
            list(QueryType::Analytical),
            list(QueryType::Visual),
            list(QueryType::Contextual),
            list(QueryType::Navigation),
        );
        let mut prompt = prompts::render(
            "classify",
            &[
                ("analytical_examples", &a),
                ("visual_examples", &v),
                ("contextual_examples", &c),
                ("navigation_examples", &n),
                ("query", query),
            ],
        );
        let first = self.gateway.complete(&prompt, self.config.call_timeout)?;
        if let Some(k) = parse_classification(&first.text) {
            return Ok(k);
        }
        prompt.user = format!("{}\n\n{CLASSIFY_REASK}", prompt.user);
        let second = self.gateway.complete(&prompt, self.config.call_timeout)?;
        parse_classification(&second.text).ok_or(PipelineError::Unparseable(second.text))
    }

    /// Runs the data agent over the view (with a color-name column) and maps
    /// its outcome to a body. The flag is true for failures.
    pub fn answer_tabular(&self, chart: &ChartContext, query: &str, cursor: &Cursor) -> (String, bool) {
        let mut host = TableHost::from_view(&chart.view, Some(&chart.color_names));
        let tree_text = chart.summary_text();
        let cursor_label = chart.tree.get(&cursor.address).map(|n| n.label.as_str()).unwrap_or("");
        let ctx = AgentContext {
            query,
            tree_text: &tree_text,
            cursor_label,
        };
        match run_agent(&self.gateway, &ctx, &mut host, self.config.agent) {
            AgentOutcome::Answer(a) => {
                let failed = looks_incomplete(&a);
                (a, failed)
            }
            AgentOutcome::Terminated => (TERMINATION_MESSAGE.to_string(), true),
            AgentOutcome::FormatError => (CANNOT_ANSWER.to_string(), true),
            AgentOutcome::Failed(e) => {
                tracing::warn!("data agent failed: {e}");
                (CANNOT_ANSWER.to_string(), true)
            }
        }
    }

    /// Web search composed with the chart description.
    pub fn answer_contextual(&self, query: &str, tree_text: &str) -> (String, bool) {
        let results = match self.gateway.web_lookup(query, self.config.call_timeout) {
            Ok(r) => r,
            Err(GatewayError::Timeout { .. }) => return (TERMINATION_MESSAGE.to_string(), true),
            Err(e) => {
                tracing::warn!("web lookup failed: {e}");
                return (CANNOT_ANSWER.to_string(), true);
            }
        };
        if results.trim().is_empty() {
            return (NO_EXTERNAL_INFO.to_string(), true);
        }
        let prompt = prompts::render("contextual", &[("tree", tree_text), ("results", results.trim()), ("query", query)]);
        match self.gateway.complete(&prompt, self.config.call_timeout) {
            Ok(c) if !c.text.trim().is_empty() => {
                let body = c.text.trim().to_string();
                let failed = looks_incomplete(&body);
                (body, failed)
            }
            Ok(_) => (NO_EXTERNAL_INFO.to_string(), true),
            Err(GatewayError::Timeout { .. }) => (TERMINATION_MESSAGE.to_string(), true),
            Err(e) => {
                tracing::warn!("contextual answer failed: {e}");
                (CANNOT_ANSWER.to_string(), true)
            }
        }
    }

    pub fn suggest_alternatives(&self, query: &str, error_text: &str, tree_text: &str) -> Vec<String> {
        suggest_alternatives(&self.gateway, query, error_text, tree_text, self.config.call_timeout)
    }

    pub fn cold_start_suggestions(&self, chart: &ChartContext) -> Vec<Suggestion> {
        cold_start_suggestions(&self.gateway, &chart.summary_text(), self.config.call_timeout)
    }

    /// The whole pipeline for one question. `auto` moves the cursor for
    /// navigation questions instead of only describing the keys.
    pub fn answer(&self, chart: &ChartContext, q: &UserQuery, auto: bool) -> Result<Answer, PipelineError> {
        let raw = q.text.trim();
        if raw.is_empty() {
            return Err(PipelineError::EmptyQuery);
        }
        let tree_text = chart.summary_text();
        let (refined, warning) = self.refine_query(raw, &tree_text);
        let mut warnings: Vec<String> = warning.into_iter().collect();

        let kind = match self.classify(&refined) {
            Ok(k) => k,
            Err(e) => {
                tracing::warn!("classification failed: {e}");
                warnings.push(format!("classification failed: {e}"));
                QueryType::Unanswerable
            }
        };

        let mut nav = None;
        let (body, failed, suggest) = match kind {
            QueryType::Analytical | QueryType::Visual => {
                let (b, f) = self.answer_tabular(chart, &refined, &q.cursor);
                (b, f, f)
            }
            QueryType::Contextual => {
                let (b, f) = self.answer_contextual(&refined, &tree_text);
                (b, f, f)
            }
            QueryType::Navigation => {
                let a = answer_navigation(
                    &self.gateway,
                    &refined,
                    &chart.tree,
                    &q.cursor,
                    auto,
                    q.table_mode,
                    self.config.call_timeout,
                );
                nav = a.outcome;
                let suggest = a.failed && !q.table_mode;
                (a.body, a.failed, suggest)
            }
            QueryType::Unanswerable => (format!("{APOLOGY}."), true, true),
        };

        let mut answer = justify(&body, kind, raw);
        answer.refined_query = refined.clone();
        answer.failed = failed;
        answer.warnings = warnings;
        answer.instruction_script = nav.as_ref().and_then(|n| n.script.clone());
        answer.navigation = nav;
        if suggest {
            answer.suggestions = self.suggest_alternatives(raw, &body, &tree_text);
        }
        Ok(answer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_change_rebuilds_the_tree() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/charts/scatter.vl.json");
        let chart = ChartContext::load("scatter", &path).unwrap();
        let earlier = chart.with_param("year", DataValue::number(1997.0)).unwrap();
        assert_eq!(chart.view.len(), 31);
        assert!(earlier.view.rows().iter().all(|r| r[2] == DataValue::number(1997.0)));
        assert!(chart.with_param("year", DataValue::number(1900.0)).is_err());
    }

    #[test]
    fn classification_labels_parse() {
        assert_eq!(parse_classification("Analytical Query"), Some(QueryType::Analytical));
        assert_eq!(parse_classification("navigation query."), Some(QueryType::Navigation));
        assert_eq!(parse_classification("I am sorry. I am unable to answer this question"), Some(QueryType::Unanswerable));
        assert_eq!(parse_classification("Visual Query or Analytical Query"), None);
        assert_eq!(parse_classification("analytical"), None);
    }

    #[test]
    fn justification_names_the_source() {
        let a = justify("x", QueryType::Contextual, "What is a choropleth map?");
        assert_eq!(
            a.justification,
            "Your question 'What is a choropleth map?' was categorized as being context-seeking, and as such, has been answered based on information found on the web."
        );
        assert!(justify("x", QueryType::Analytical, "q").justification.contains("data"));
        assert!(justify("x", QueryType::Visual, "q").justification.contains("visual encodings"));
        assert!(justify("x", QueryType::Navigation, "q").justification.contains("tree view"));
        assert_eq!(justify("468297 homes", QueryType::Analytical, "q").body, "468,297 homes");
    }

    #[test]
    fn query_type_round_trips() {
        for k in QueryType::CLASSES {
            assert_eq!(QueryType::parse(k.as_str()), Some(k));
            assert_eq!(QueryType::parse(k.label()), Some(k));
        }
    }

    #[test]
    fn incomplete_answers_are_detected() {
        assert!(looks_incomplete("The data does not contain any information about the location of the houses."));
        assert!(!looks_incomplete("The vaccination rate for South Africa is 36%."));
    }
}
