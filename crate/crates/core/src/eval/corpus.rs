//! Benchmark items, the JSONL corpus format, and the CSV importer.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::pipeline::QueryType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub chart_id: String,
    pub question: String,
    pub type_label: QueryType,
    pub ground_truth: String,
    pub answerable: bool,
    pub open_ended: bool,
    /// Where the cursor sits when the question is asked. Navigation only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cursor_context: Option<String>,
}

pub fn read_corpus(path: &Path) -> Result<Vec<BenchmarkItem>, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_corpus(std::io::BufReader::new(file))
}

pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<BenchmarkItem>, EvalError> {
    let mut items = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: BenchmarkItem =
            serde_json::from_str(&line).map_err(|e| EvalError::Corpus(format!("line {}: {e}", n + 1)))?;
        items.push(item);
    }
    Ok(items)
}

pub fn write_corpus(items: &[BenchmarkItem], mut out: impl Write) -> Result<(), EvalError> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| EvalError::Corpus(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| EvalError::Io(e.to_string()))?;
    }
    Ok(())
}

fn normalize_header(h: &str) -> String {
    h.trim().to_ascii_lowercase().replace([' ', '-'], "_")
}

fn column(headers: &[String], names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.contains(&h.as_str()))
}

fn parse_flag(v: &str, row: usize, name: &str) -> Result<bool, EvalError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "" | "yes" | "y" | "true" | "1" => Ok(true),
        "no" | "n" | "false" | "0" => Ok(false),
        other => Err(EvalError::Corpus(format!("row {row}: `{other}` is not a valid {name} flag"))),
    }
}

fn parse_type(v: &str, row: usize) -> Result<QueryType, EvalError> {
    let t = v.trim().to_ascii_lowercase();
    let t = t.strip_suffix(" query").unwrap_or(&t);
    QueryType::parse(t).ok_or_else(|| EvalError::Corpus(format!("row {row}: unknown query type `{v}`")))
}

/// Imports a spreadsheet export with one question per row.
///
/// Required columns: `chart`, `question`, `type`. Optional: `id`,
/// `ground_truth`, `answerable`, `open_ended`, `cursor`. Header matching
/// ignores case and treats spaces and dashes as underscores; `query_type`
/// and `answer` are accepted as aliases. Blank flags mean true. Rows without
/// an id get `{chart}-{row}`.
pub fn convert_corpus(csv_text: &str) -> Result<Vec<BenchmarkItem>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| EvalError::Corpus(e.to_string()))?
        .iter()
        .map(normalize_header)
        .collect();
    let need = |names: &[&str]| {
        column(&headers, names).ok_or_else(|| EvalError::Corpus(format!("missing column `{}`", names[0])))
    };
    let chart = need(&["chart", "chart_id", "chart_type"])?;
    let question = need(&["question", "query"])?;
    let kind = need(&["type", "query_type", "type_label"])?;
    let id = column(&headers, &["id"]);
    let truth = column(&headers, &["ground_truth", "answer"]);
    let answerable = column(&headers, &["answerable"]);
    let open_ended = column(&headers, &["open_ended"]);
    let cursor = column(&headers, &["cursor", "cursor_context"]);

    let mut items = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| EvalError::Corpus(format!("row {row}: {e}")))?;
        let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("").to_string();
        let chart_id = get(Some(chart)).to_ascii_lowercase();
        let q = get(Some(question));
        if chart_id.is_empty() || q.is_empty() {
            return Err(EvalError::Corpus(format!("row {row}: chart and question are required")));
        }
        let item_id = match get(id) {
            s if s.is_empty() => format!("{chart_id}-{row}"),
            s => s,
        };
        let cursor_context = Some(get(cursor)).filter(|s| !s.is_empty());
        items.push(BenchmarkItem {
            id: item_id,
            chart_id,
            question: q,
            type_label: parse_type(&get(Some(kind)), row)?,
            ground_truth: get(truth),
            answerable: parse_flag(&get(answerable), row, "answerable")?,
            open_ended: parse_flag(&get(open_ended), row, "open_ended").map(|f| f && open_ended.is_some())?,
            cursor_context,
        });
    }
    Ok(items)
}
