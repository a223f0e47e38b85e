//! Chart grammar model: a single-view Vega-Lite subset, its data, and the
//! post-transform view that the tree builder and the answering agents read.
//!
//! Supported marks are `bar`, `line`, `point`/`circle`, and `geoshape`;
//! channels `x`, `y`, `color`, `detail`; transforms `filter`, `bin`, and
//! `aggregate`. Anything else is rejected with the path of the offending node.

mod scale;
mod spec;
mod table;
mod transform;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scale::{default_palette, interpolate_hex, resolve_colors};
pub use spec::{parse_chart_spec, parse_chart_spec_at};
pub use table::{export_csv, parse_csv, sort_view, SortOrder};
pub use transform::{materialize_view, update_params};
pub(crate) use transform::reduce;

use crate::value::{DataValue, Field, FieldType};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ChartError {
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported construct at {path}: {what}")]
    Unsupported { path: String, what: String },
    #[error("unsupported mark `{0}`")]
    UnsupportedMark(String),
    #[error("chart has no data source")]
    MissingData,
    #[error("chart needs at least one x, y, or detail encoding")]
    MissingEncoding,
    #[error("encoding `{channel}` refers to field `{field}` which is not in the data")]
    UnknownEncodingField { channel: String, field: String },
    #[error("invalid encoding `{channel}`: {reason}")]
    InvalidEncoding { channel: String, reason: String },
    #[error("transform #{index} refers to missing field `{field}`")]
    TransformMissingField { index: usize, field: String },
    #[error("transform #{index}: cannot compare field `{field}` ({field_type}) with {operand}")]
    TypeMismatch {
        index: usize,
        field: String,
        field_type: &'static str,
        operand: String,
    },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("value {value} is outside the allowed range of parameter `{name}`")]
    OutOfRange { name: String, value: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("cannot read data: {0}")]
    Io(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, ChartError>;

/// The four supported chart kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Bar,
    Line,
    Scatter,
    Choropleth,
}

impl ChartKind {
    pub fn from_mark(mark: &str) -> Option<ChartKind> {
        match mark {
            "bar" => Some(ChartKind::Bar),
            "line" => Some(ChartKind::Line),
            "point" | "circle" => Some(ChartKind::Scatter),
            "geoshape" => Some(ChartKind::Choropleth),
            _ => None,
        }
    }

    /// Noun phrase used by the root node of the tree.
    pub fn noun(self) -> &'static str {
        match self {
            ChartKind::Bar => "bar chart",
            ChartKind::Line => "line chart",
            ChartKind::Scatter => "scatter plot",
            ChartKind::Choropleth => "choropleth map",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
    Color,
    Detail,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Color => "color",
            Channel::Detail => "detail",
        }
    }

    pub fn parse(name: &str) -> Option<Channel> {
        match name {
            "x" => Some(Channel::X),
            "y" => Some(Channel::Y),
            "color" => Some(Channel::Color),
            "detail" => Some(Channel::Detail),
            _ => None,
        }
    }
}

/// Explicit scale domain declared on an encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleDomain {
    Numeric { min: f64, max: f64 },
    Categorical(Vec<DataValue>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingChannel {
    pub channel: Channel,
    pub field: String,
    pub data_type: FieldType,
    pub title: Option<String>,
    pub binned: bool,
    pub scale_domain: Option<ScaleDomain>,
    /// Hex colors for color encodings; categorical or two ramp endpoints.
    pub scale_range: Option<Vec<String>>,
}

impl EncodingChannel {
    /// Axis or legend title, falling back to the field name.
    pub fn display_title(&self) -> &str {
        self.title.as_deref().unwrap_or(&self.field)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    pub fn parse(s: &str) -> Option<CompareOp> {
        match s {
            "==" | "===" | "=" | "equal" | "eq" => Some(CompareOp::Eq),
            "!=" | "!==" | "ne" => Some(CompareOp::Ne),
            "<" | "lt" => Some(CompareOp::Lt),
            "<=" | "lte" | "le" => Some(CompareOp::Le),
            ">" | "gt" => Some(CompareOp::Gt),
            ">=" | "gte" | "ge" => Some(CompareOp::Ge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Literal(DataValue),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub field: String,
    pub op: CompareOp,
    pub operand: Operand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateOp {
    Mean,
    Sum,
    Count,
    Min,
    Max,
}

impl AggregateOp {
    pub fn parse(s: &str) -> Option<AggregateOp> {
        match s {
            "mean" | "average" => Some(AggregateOp::Mean),
            "sum" => Some(AggregateOp::Sum),
            "count" => Some(AggregateOp::Count),
            "min" => Some(AggregateOp::Min),
            "max" => Some(AggregateOp::Max),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AggregateOp::Mean => "mean",
            AggregateOp::Sum => "sum",
            AggregateOp::Count => "count",
            AggregateOp::Min => "min",
            AggregateOp::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSpec {
    pub op: AggregateOp,
    pub field: Option<String>,
    pub as_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    Filter(Predicate),
    Bin {
        field: String,
        as_start: String,
        as_end: String,
        maxbins: usize,
    },
    Aggregate {
        ops: Vec<AggregateSpec>,
        groupby: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamRange {
    Numeric { min: f64, max: f64, step: Option<f64> },
    Options(Vec<DataValue>),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractiveParam {
    pub name: String,
    pub value: DataValue,
    pub range: ParamRange,
}

impl InteractiveParam {
    pub fn allows(&self, v: &DataValue) -> bool {
        match (&self.range, v) {
            (ParamRange::Unbounded, _) => true,
            (ParamRange::Numeric { min, max, .. }, DataValue::Number(x)) => x >= min && x <= max,
            (ParamRange::Numeric { .. }, _) => false,
            (ParamRange::Options(opts), v) => opts.contains(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataRef {
    Inline(Table),
    /// Path to a CSV file, relative to the chart file's directory when not absolute.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub description: String,
    pub data: DataRef,
    pub encodings: Vec<EncodingChannel>,
    pub transforms: Vec<Transform>,
    pub params: Vec<InteractiveParam>,
    /// Directory that relative data paths resolve against.
    pub base_dir: Option<PathBuf>,
}

impl ChartSpec {
    pub fn encoding(&self, channel: Channel) -> Option<&EncodingChannel> {
        self.encodings.iter().find(|e| e.channel == channel)
    }

    pub fn param(&self, name: &str) -> Option<&InteractiveParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Loads the raw rows this spec points at, typed by its encodings.
    pub fn load_data(&self) -> Result<Table> {
        match &self.data {
            DataRef::Inline(t) => Ok(t.clone()),
            DataRef::File(path) => {
                let resolved = match (&self.base_dir, path.is_absolute()) {
                    (Some(dir), false) => dir.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&resolved)
                    .map_err(|e| ChartError::Io(format!("{}: {e}", resolved.display())))?;
                table::read_raw_csv(&text, &self.declared_types())
            }
        }
    }

    /// Field types implied by the encodings; used to type raw columns.
    pub fn declared_types(&self) -> Vec<(String, FieldType)> {
        self.encodings.iter().map(|e| (e.field.clone(), e.data_type)).collect()
    }
}

/// Rows with a typed schema.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<Field>,
    pub rows: Vec<Vec<DataValue>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|f| f.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Field> {
        self.columns.iter().find(|f| f.name == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// The data actually depicted by the chart after all transforms, with the
/// color assigned to each row when a color encoding exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedView {
    pub table: Table,
    pub row_color_hex: Option<Vec<String>>,
}

impl TransformedView {
    pub fn columns(&self) -> &[Field] {
        &self.table.columns
    }

    pub fn rows(&self) -> &[Vec<DataValue>] {
        &self.table.rows
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Copy holding only the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> TransformedView {
        TransformedView {
            table: Table {
                columns: self.table.columns.clone(),
                rows: indices.iter().map(|&i| self.table.rows[i].clone()).collect(),
            },
            row_color_hex: self
                .row_color_hex
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i].clone()).collect()),
        }
    }
}

/// Loads a spec file, reads its data, and materializes the colored view.
pub fn load_chart(path: &Path) -> Result<(ChartSpec, TransformedView)> {
    let text = std::fs::read_to_string(path).map_err(|e| ChartError::Io(format!("{}: {e}", path.display())))?;
    let spec = parse_chart_spec_at(&text, path.parent())?;
    let data = spec.load_data()?;
    let view = materialize_view(&spec, &data)?;
    Ok((spec, view))
}
