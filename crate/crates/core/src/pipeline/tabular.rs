//! The data agent: a Thought / Action / Action Input loop in which the model
//! names host tools and the host runs them against the chart's view.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde_json::Value;
use thiserror::Error;

use crate::chart::{export_csv, reduce, sort_view, AggregateOp, SortOrder, Table, TransformedView};
use crate::gateway::{Gateway, GatewayError};
use crate::prompts;
use crate::value::{format_number, parse_timestamp, DataValue, Field, FieldType};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not numeric")]
    NotNumeric(String),
    #[error("cannot evaluate expression: {0}")]
    Calc(String),
}

pub const TOOLS: [&str; 8] = ["filter", "aggregate", "sort", "head", "unique", "describe", "calc", "reset"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Contains,
}

impl FilterOp {
    pub fn parse(s: &str) -> Option<FilterOp> {
        Some(match s.trim() {
            "==" | "=" | "eq" | "equals" => FilterOp::Eq,
            "!=" | "ne" => FilterOp::Ne,
            "<" | "lt" => FilterOp::Lt,
            "<=" | "lte" => FilterOp::Le,
            ">" | "gt" => FilterOp::Gt,
            ">=" | "gte" => FilterOp::Ge,
            "contains" => FilterOp::Contains,
            _ => return None,
        })
    }
}

/// Summary of one column.
#[derive(Debug, Clone, PartialEq)]
pub enum Describe {
    Numeric { count: usize, mean: f64, min: f64, max: f64 },
    Categorical { count: usize, distinct: usize, top: String, top_count: usize },
}

/// The working table the agent's tools read and narrow.
#[derive(Debug, Clone)]
pub struct TableHost {
    base: TransformedView,
    current: TransformedView,
}

impl TableHost {
    pub fn new(table: Table) -> TableHost {
        let view = TransformedView {
            table,
            row_color_hex: None,
        };
        TableHost {
            base: view.clone(),
            current: view,
        }
    }

    /// The view plus a trailing `color` column of English names when the
    /// view has row colors.
    pub fn from_view(view: &TransformedView, color_names: Option<&HashMap<String, String>>) -> TableHost {
        let mut table = view.table.clone();
        if let (Some(hexes), Some(names)) = (&view.row_color_hex, color_names) {
            table.columns.push(Field::new("color", FieldType::Nominal));
            for (row, hex) in table.rows.iter_mut().zip(hexes) {
                row.push(DataValue::text(names.get(hex).cloned().unwrap_or_else(|| hex.clone())));
            }
        }
        TableHost::new(table)
    }

    pub fn current(&self) -> &Table {
        &self.current.table
    }

    pub fn columns(&self) -> &[Field] {
        self.base.columns()
    }

    fn col(&self, name: &str) -> Result<usize, ToolError> {
        let name = name.trim();
        self.current
            .table
            .column_index(name)
            .or_else(|| {
                self.current
                    .columns()
                    .iter()
                    .position(|c| c.name.eq_ignore_ascii_case(name))
            })
            .ok_or_else(|| ToolError::UnknownColumn(name.to_string()))
    }

    pub fn reset(&mut self) {
        self.current = self.base.clone();
    }

    /// Keeps rows whose `column` satisfies `op value`; returns the row count left.
    pub fn filter(&mut self, column: &str, op: FilterOp, value: &DataValue) -> Result<usize, ToolError> {
        let ci = self.col(column)?;
        let ft = self.current.columns()[ci].field_type;
        let rhs = coerce(value, ft);
        let keep: Vec<usize> = self
            .current
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| cell_matches(&r[ci], op, &rhs))
            .map(|(i, _)| i)
            .collect();
        self.current = self.current.select_rows(&keep);
        Ok(keep.len())
    }

    /// One value per group (first-appearance order), or a single unlabeled
    /// value without `group_by`. Count without a column counts rows.
    pub fn aggregate(
        &self,
        op: AggregateOp,
        column: Option<&str>,
        group_by: Option<&str>,
    ) -> Result<Vec<(Option<String>, DataValue)>, ToolError> {
        let ci = column.map(|c| self.col(c)).transpose()?;
        if let Some(ci) = ci {
            if op != AggregateOp::Count && self.current.columns()[ci].field_type == FieldType::Nominal {
                return Err(ToolError::NotNumeric(self.current.columns()[ci].name.clone()));
            }
        } else if op != AggregateOp::Count {
            return Err(ToolError::BadInput(format!("{} needs a column", op.as_str())));
        }
        let gi = group_by.map(|g| self.col(g)).transpose()?;
        let mut order: Vec<Option<String>> = Vec::new();
        let mut groups: HashMap<Option<String>, Vec<usize>> = HashMap::new();
        for (i, row) in self.current.rows().iter().enumerate() {
            let key = gi.map(|g| row[g].to_string());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(i);
        }
        if gi.is_none() && order.is_empty() {
            order.push(None);
        }
        Ok(order
            .into_iter()
            .map(|key| {
                let rows = groups.get(&key).map(Vec::as_slice).unwrap_or(&[]);
                let vals: Vec<f64> = match ci {
                    Some(c) => rows
                        .iter()
                        .map(|&r| &self.current.rows()[r][c])
                        .filter(|v| !v.is_null())
                        .map(|v| v.as_f64().unwrap_or(0.0))
                        .collect(),
                    None => Vec::new(),
                };
                (key, reduce(op, &vals, rows.len(), ci.is_none()))
            })
            .collect())
    }

    pub fn sort(&mut self, column: &str, order: SortOrder) -> Result<(), ToolError> {
        let ci = self.col(column)?;
        let name = self.current.columns()[ci].name.clone();
        self.current = sort_view(&self.current, &name, order).map_err(|e| ToolError::BadInput(e.to_string()))?;
        Ok(())
    }

    /// First `n` current rows as CSV.
    pub fn head(&self, n: usize) -> String {
        let idx: Vec<usize> = (0..n.min(self.current.len())).collect();
        export_csv(&self.current.select_rows(&idx), None)
    }

    /// Distinct non-null values in first-appearance order.
    pub fn unique(&self, column: &str) -> Result<Vec<DataValue>, ToolError> {
        let ci = self.col(column)?;
        let mut seen = Vec::new();
        for row in self.current.rows() {
            let v = &row[ci];
            if !v.is_null() && !seen.contains(v) {
                seen.push(v.clone());
            }
        }
        Ok(seen)
    }

    pub fn describe(&self, column: &str) -> Result<Describe, ToolError> {
        let ci = self.col(column)?;
        let vals: Vec<&DataValue> = self.current.rows().iter().map(|r| &r[ci]).filter(|v| !v.is_null()).collect();
        if self.current.columns()[ci].field_type == FieldType::Nominal {
            let mut counts: Vec<(String, usize)> = Vec::new();
            for v in &vals {
                let s = v.to_string();
                match counts.iter_mut().find(|(k, _)| *k == s) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((s, 1)),
                }
            }
            // most frequent, first seen on ties
            let (top, top_count) = counts
                .iter()
                .fold(None::<&(String, usize)>, |best, c| match best {
                    Some(b) if b.1 >= c.1 => Some(b),
                    _ => Some(c),
                })
                .cloned()
                .unwrap_or_default();
            return Ok(Describe::Categorical {
                count: vals.len(),
                distinct: counts.len(),
                top,
                top_count,
            });
        }
        let nums: Vec<f64> = vals.iter().filter_map(|v| v.as_f64()).collect();
        if nums.is_empty() {
            return Ok(Describe::Numeric {
                count: 0,
                mean: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            });
        }
        Ok(Describe::Numeric {
            count: nums.len(),
            mean: nums.iter().sum::<f64>() / nums.len() as f64,
            min: nums.iter().copied().fold(f64::INFINITY, f64::min),
            max: nums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Runs one named tool with a JSON argument object and renders the
    /// observation text the model will read.
    pub fn execute(&mut self, tool: &str, input: &str) -> Result<String, ToolError> {
        let args: Value = if input.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(input.trim()).map_err(|e| ToolError::BadInput(e.to_string()))?
        };
        let text = |k: &str| -> Result<String, ToolError> {
            args.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| ToolError::BadInput(format!("missing `{k}`")))
        };
        let ft = |host: &TableHost, c: &str| host.col(c).map(|i| host.current.columns()[i].field_type);
        match tool.trim() {
            "filter" => {
                let column = text("column")?;
                let op_text = text("op").unwrap_or_else(|_| "==".into());
                let op = FilterOp::parse(&op_text).ok_or_else(|| ToolError::BadInput(format!("unknown op `{op_text}`")))?;
                let value = match args.get("value") {
                    Some(Value::Number(n)) => DataValue::number(n.as_f64().unwrap_or(f64::NAN)),
                    Some(Value::String(s)) => DataValue::text(s.clone()),
                    Some(Value::Bool(b)) => DataValue::text(b.to_string()),
                    _ => return Err(ToolError::BadInput("missing `value`".into())),
                };
                let total = self.current.len();
                let n = self.filter(&column, op, &value)?;
                let shown = if n <= 10 { n } else { 5 };
                Ok(format!("{n} of {total} rows remain.\n{}", self.head(shown)).trim_end().to_string())
            }
            "aggregate" => {
                let op_text = text("op")?;
                let op = AggregateOp::parse(&op_text.to_ascii_lowercase())
                    .ok_or_else(|| ToolError::BadInput(format!("unknown op `{op_text}`")))?;
                let column = args.get("column").and_then(Value::as_str);
                let group = args.get("group_by").and_then(Value::as_str);
                let out = self.aggregate(op, column, group)?;
                let label = column.unwrap_or("rows");
                let lines: Vec<String> = out
                    .iter()
                    .map(|(g, v)| match g {
                        Some(g) => format!("{g}: {v}"),
                        None => format!("{} of {label}: {v}", op.as_str()),
                    })
                    .collect();
                Ok(lines.join("\n"))
            }
            "sort" => {
                let column = text("column")?;
                let order = args
                    .get("order")
                    .and_then(Value::as_str)
                    .map(|o| SortOrder::parse(o).ok_or_else(|| ToolError::BadInput(format!("unknown order `{o}`"))))
                    .transpose()?
                    .unwrap_or(SortOrder::Asc);
                self.sort(&column, order)?;
                Ok(format!("Sorted {} rows by {column}.\n{}", self.current.len(), self.head(5)).trim_end().to_string())
            }
            "head" => {
                let n = args.get("n").and_then(Value::as_u64).unwrap_or(5) as usize;
                Ok(self.head(n).trim_end().to_string())
            }
            "unique" => {
                let column = text("column")?;
                let vals = self.unique(&column)?;
                let list: Vec<String> = vals.iter().map(DataValue::to_string).collect();
                Ok(format!("{} distinct values: {}", list.len(), list.join(", ")))
            }
            "describe" => {
                let column = text("column")?;
                let temporal = ft(self, &column)? == FieldType::Temporal;
                let show = |v: f64| {
                    if temporal {
                        DataValue::Timestamp(v as i64).to_string()
                    } else {
                        format_number(v)
                    }
                };
                Ok(match self.describe(&column)? {
                    Describe::Numeric { count: 0, .. } => "count: 0".to_string(),
                    Describe::Numeric { count, mean, min, max } => {
                        format!("count: {count}, mean: {}, min: {}, max: {}", show(mean), show(min), show(max))
                    }
                    Describe::Categorical {
                        count,
                        distinct,
                        top,
                        top_count,
                    } => format!("count: {count}, distinct: {distinct}, most frequent: {top} ({top_count} rows)"),
                })
            }
            "calc" => {
                let expr = text("expression")?;
                calc(&expr).map(format_number)
            }
            "reset" => {
                self.reset();
                Ok(format!("Restored all {} rows.", self.current.len()))
            }
            other => Err(ToolError::UnknownTool(other.to_string())),
        }
    }
}

fn coerce(value: &DataValue, ft: FieldType) -> DataValue {
    match (value, ft) {
        (DataValue::Text(s), FieldType::Quantitative) => s.trim().parse::<f64>().map(DataValue::number).unwrap_or(value.clone()),
        (DataValue::Text(s), FieldType::Temporal) => parse_timestamp(s).map(DataValue::Timestamp).unwrap_or(value.clone()),
        (DataValue::Number(n), FieldType::Temporal) if (1000.0..=9999.0).contains(n) && n.fract() == 0.0 => {
            parse_timestamp(&format!("{}", *n as i64)).map(DataValue::Timestamp).unwrap_or(value.clone())
        }
        (DataValue::Number(n), FieldType::Nominal) => DataValue::text(format_number(*n)),
        _ => value.clone(),
    }
}

/// Text compares case-insensitively; numeric-looking text compares as numbers.
fn cell_matches(cell: &DataValue, op: FilterOp, rhs: &DataValue) -> bool {
    use std::cmp::Ordering;
    if cell.is_null() || rhs.is_null() {
        return false;
    }
    let ord = match (cell, rhs) {
        (DataValue::Text(a), DataValue::Text(b)) => {
            if op == FilterOp::Contains {
                return a.to_lowercase().contains(&b.to_lowercase());
            }
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => x.partial_cmp(&y),
                _ => Some(a.to_lowercase().cmp(&b.to_lowercase())),
            }
        }
        (a, b) => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => x.partial_cmp(&y),
            _ => None,
        },
    };
    let Some(ord) = ord else { return false };
    match op {
        FilterOp::Eq => ord == Ordering::Equal,
        FilterOp::Ne => ord != Ordering::Equal,
        FilterOp::Lt => ord == Ordering::Less,
        FilterOp::Le => ord != Ordering::Greater,
        FilterOp::Gt => ord == Ordering::Greater,
        FilterOp::Ge => ord != Ordering::Less,
        FilterOp::Contains => ord == Ordering::Equal,
    }
}

/// Evaluates `+ - * / ^`, parentheses, and unary minus over decimal numbers.
pub fn calc(expr: &str) -> Result<f64, ToolError> {
    struct P<'a> {
        s: &'a [u8],
        i: usize,
    }
    impl P<'_> {
        fn ws(&mut self) {
            while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
                self.i += 1;
            }
        }
        fn peek(&mut self) -> Option<u8> {
            self.ws();
            self.s.get(self.i).copied()
        }
        fn err(&self, what: &str) -> ToolError {
            ToolError::Calc(format!("{what} at position {}", self.i))
        }
        fn sum(&mut self) -> Result<f64, ToolError> {
            let mut v = self.product()?;
            while let Some(c @ (b'+' | b'-')) = self.peek() {
                self.i += 1;
                let r = self.product()?;
                v = if c == b'+' { v + r } else { v - r };
            }
            Ok(v)
        }
        fn product(&mut self) -> Result<f64, ToolError> {
            let mut v = self.power()?;
            while let Some(c @ (b'*' | b'/')) = self.peek() {
                self.i += 1;
                let r = self.power()?;
                v = if c == b'*' { v * r } else { v / r };
            }
            Ok(v)
        }
        fn power(&mut self) -> Result<f64, ToolError> {
            let base = self.unary()?;
            if self.peek() == Some(b'^') {
                self.i += 1;
                let exp = self.power()?;
                return Ok(base.powf(exp));
            }
            Ok(base)
        }
        fn unary(&mut self) -> Result<f64, ToolError> {
            match self.peek() {
                Some(b'-') => {
                    self.i += 1;
                    Ok(-self.unary()?)
                }
                Some(b'+') => {
                    self.i += 1;
                    self.unary()
                }
                _ => self.atom(),
            }
        }
        fn atom(&mut self) -> Result<f64, ToolError> {
            match self.peek() {
                Some(b'(') => {
                    self.i += 1;
                    let v = self.sum()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("expected `)`"));
                    }
                    self.i += 1;
                    Ok(v)
                }
                Some(c) if c.is_ascii_digit() || c == b'.' => {
                    let start = self.i;
                    while self.i < self.s.len() && (self.s[self.i].is_ascii_digit() || self.s[self.i] == b'.') {
                        self.i += 1;
                    }
                    std::str::from_utf8(&self.s[start..self.i])
                        .ok()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| self.err("malformed number"))
                }
                _ => Err(self.err("expected a number")),
            }
        }
    }
    let mut p = P { s: expr.as_bytes(), i: 0 };
    let v = p.sum()?;
    if p.peek().is_some() {
        return Err(p.err("unexpected input"));
    }
    if !v.is_finite() {
        return Err(ToolError::Calc("result is not a finite number".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentBudget {
    pub max_steps: usize,
    pub wall_clock: Duration,
}

impl Default for AgentBudget {
    fn default() -> Self {
        AgentBudget {
            max_steps: 15,
            wall_clock: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentOutcome {
    Answer(String),
    /// Step or time budget ran out.
    Terminated,
    /// Two replies in a row broke the layout.
    FormatError,
    Failed(GatewayError),
}

/// Everything the agent prompt shows besides the scratchpad.
#[derive(Debug, Clone)]
pub struct AgentContext<'a> {
    pub query: &'a str,
    pub tree_text: &'a str,
    pub cursor_label: &'a str,
}

const LAYOUT_REMINDER: &str =
    "Your reply did not follow the required layout. Reply with Thought, Action, and Action Input lines, or with an Answer: line.";

/// Text after the first `Answer:` (or `Final Answer:`) line marker.
pub fn parse_answer(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let l = line.trim();
        let rest = l.strip_prefix("Final Answer:").or_else(|| l.strip_prefix("Answer:"));
        if let Some(rest) = rest {
            let mut out = rest.trim().to_string();
            for more in &lines[i + 1..] {
                out.push('\n');
                out.push_str(more);
            }
            let out = out.trim().to_string();
            return (!out.is_empty()).then_some(out);
        }
    }
    None
}

/// Drops anything the model wrote from its own `Observation:` line onward.
fn cut_observation(text: &str) -> &str {
    match text.find("\nObservation:") {
        Some(i) => &text[..i],
        None => text,
    }
    .trim()
}

pub fn run_agent(gateway: &Gateway, ctx: &AgentContext<'_>, host: &mut TableHost, budget: AgentBudget) -> AgentOutcome {
    let started = Instant::now();
    let columns: Vec<String> = host
        .columns()
        .iter()
        .map(|c| format!("{} ({})", c.name, c.field_type.as_str()))
        .collect();
    let columns = columns.join(", ");
    let head = host.head(5);
    let head = head.trim_end();
    let mut scratch = String::new();
    let mut corrected = false;
    for _ in 0..budget.max_steps {
        let remaining = budget.wall_clock.saturating_sub(started.elapsed());
        if remaining.is_zero() {
            return AgentOutcome::Terminated;
        }
        let prompt = prompts::render(
            "tabular",
            &[
                ("tree", ctx.tree_text),
                ("cursor", ctx.cursor_label),
                ("columns", &columns),
                ("head", head),
                ("query", ctx.query),
                ("scratchpad", scratch.trim_end()),
            ],
        );
        let completion = match gateway.complete(&prompt, remaining) {
            Ok(c) => c,
            Err(GatewayError::Timeout { .. }) => return AgentOutcome::Terminated,
            Err(e) => return AgentOutcome::Failed(e),
        };
        let text = cut_observation(&completion.text);
        if let Some(answer) = parse_answer(text) {
            return AgentOutcome::Answer(answer);
        }
        let call = completion.tool_call();
        match call {
            Some(call) if !call.name.is_empty() => {
                corrected = false;
                let observation = match host.execute(&call.name, &call.arguments) {
                    Ok(o) => o,
                    Err(e) => format!("Error: {e}"),
                };
                scratch.push_str(&format!("{text}\nObservation: {observation}\n"));
            }
            _ => {
                if corrected {
                    return AgentOutcome::FormatError;
                }
                corrected = true;
                scratch.push_str(&format!("{text}\nObservation: {LAYOUT_REMINDER}\n"));
            }
        }
    }
    AgentOutcome::Terminated
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Reply, Rule, ScriptedProvider};
    use std::sync::Arc;

    fn three_rows() -> TableHost {
        TableHost::new(Table {
            columns: vec![Field::new("name", FieldType::Nominal), Field::new("value", FieldType::Quantitative)],
            rows: vec![
                vec![DataValue::text("a"), DataValue::Number(2.0)],
                vec![DataValue::text("b"), DataValue::Number(5.5)],
                vec![DataValue::text("c"), DataValue::Number(9.0)],
            ],
        })
    }

    #[test]
    fn mean_of_three_rows() {
        let mut h = three_rows();
        // (2 + 5.5 + 9) / 3
        assert_eq!(h.execute("aggregate", r#"{"op": "mean", "column": "value"}"#).unwrap(), "mean of value: 5.5");
    }

    #[test]
    fn filter_then_reset() {
        let mut h = three_rows();
        let obs = h.execute("filter", r#"{"column": "value", "op": ">", "value": 3}"#).unwrap();
        assert!(obs.starts_with("2 of 3 rows remain."));
        assert_eq!(h.current().len(), 2);
        h.execute("reset", "{}").unwrap();
        assert_eq!(h.current().len(), 3);
        h.execute("filter", r#"{"column": "NAME", "value": "B"}"#).unwrap();
        assert_eq!(h.current().rows[0][1], DataValue::Number(5.5));
    }

    #[test]
    fn tool_errors_are_typed() {
        let mut h = three_rows();
        assert!(matches!(h.execute("plot", "{}"), Err(ToolError::UnknownTool(_))));
        assert!(matches!(h.execute("unique", r#"{"column": "zzz"}"#), Err(ToolError::UnknownColumn(_))));
        assert!(matches!(h.execute("aggregate", r#"{"op": "sum", "column": "name"}"#), Err(ToolError::NotNumeric(_))));
        assert!(matches!(h.execute("head", "not json"), Err(ToolError::BadInput(_))));
    }

    #[test]
    fn calc_evaluates_arithmetic() {
        assert_eq!(calc("1 + 2 * 3").unwrap(), 7.0);
        assert_eq!(calc("(1 + 2) * 3").unwrap(), 9.0);
        assert_eq!(calc("-2 ^ 2").unwrap(), 4.0);
        assert_eq!(calc("2 ^ 3 ^ 2").unwrap(), 512.0);
        assert_eq!(calc("7 / 2").unwrap(), 3.5);
        assert!(calc("1 / 0").is_err());
        assert!(calc("2 +").is_err());
        assert!(calc("abs(2)").is_err());
    }

    #[test]
    fn describe_and_unique() {
        let h = three_rows();
        assert_eq!(
            h.describe("value").unwrap(),
            Describe::Numeric {
                count: 3,
                mean: 5.5,
                min: 2.0,
                max: 9.0
            }
        );
        assert_eq!(h.unique("name").unwrap().len(), 3);
    }

    #[test]
    fn parse_answer_takes_trailing_lines() {
        assert_eq!(parse_answer("Thought: done\nAnswer: 42\nmore"), Some("42\nmore".into()));
        assert_eq!(parse_answer("Final Answer: yes"), Some("yes".into()));
        assert_eq!(parse_answer("Action: head"), None);
    }

    fn gateway(rules: Vec<Rule>) -> Gateway {
        let p = rules.into_iter().fold(ScriptedProvider::new(), |p, r| p.rule(r));
        Gateway::live(Arc::new(p))
    }

    fn ctx() -> AgentContext<'static> {
        AgentContext {
            query: "What is the mean value?",
            tree_text: "1 A chart.",
            cursor_label: "A chart.",
        }
    }

    #[test]
    fn agent_runs_tools_until_answer() {
        let g = gateway(vec![
            Rule::complete(&["Observation: mean of value: 5.5"], Reply::Text("Thought: I now know the answer\nAnswer: The mean value is 5.5.".into())),
            Rule::complete(
                &["What is the mean value?"],
                Reply::Text("Thought: use aggregate\nAction: aggregate\nAction Input: {\"op\": \"mean\", \"column\": \"value\"}\nObservation: made up".into()),
            ),
        ]);
        let out = run_agent(&g, &ctx(), &mut three_rows(), AgentBudget::default());
        assert_eq!(out, AgentOutcome::Answer("The mean value is 5.5.".into()));
    }

    #[test]
    fn agent_gets_one_correction() {
        let g = gateway(vec![Rule::complete(&["mean"], Reply::Text("I think it is five".into()))]);
        assert_eq!(run_agent(&g, &ctx(), &mut three_rows(), AgentBudget::default()), AgentOutcome::FormatError);

        let g = gateway(vec![
            Rule::complete(&["did not follow"], Reply::Text("Answer: 5.5".into())),
            Rule::complete(&["mean"], Reply::Text("I think it is five".into())),
        ]);
        assert_eq!(run_agent(&g, &ctx(), &mut three_rows(), AgentBudget::default()), AgentOutcome::Answer("5.5".into()));
    }

    #[test]
    fn agent_budgets_terminate() {
        let looping = Rule::complete(&["mean"], Reply::Text("Thought: look again\nAction: head\nAction Input: {\"n\": 1}".into()));
        let g = gateway(vec![looping]);
        let budget = AgentBudget {
            max_steps: 3,
            wall_clock: Duration::from_secs(5),
        };
        assert_eq!(run_agent(&g, &ctx(), &mut three_rows(), budget), AgentOutcome::Terminated);

        let g = gateway(vec![Rule::complete(&["mean"], Reply::Delay(1_000, "Answer: late".into()))]);
        let budget = AgentBudget {
            max_steps: 15,
            wall_clock: Duration::from_millis(100),
        };
        let t = Instant::now();
        assert_eq!(run_agent(&g, &ctx(), &mut three_rows(), budget), AgentOutcome::Terminated);
        assert!(t.elapsed() < Duration::from_millis(800));
    }
}
