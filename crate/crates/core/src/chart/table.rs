use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ChartError, Result, Table, TransformedView};
use crate::value::{DataValue, Field, FieldType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    Desc,
}

impl SortOrder {
    pub fn parse(s: &str) -> Option<SortOrder> {
        match s.to_ascii_lowercase().as_str() {
            "asc" | "ascending" => Some(SortOrder::Asc),
            "desc" | "descending" => Some(SortOrder::Desc),
            _ => None,
        }
    }
}

/// Reads CSV text into a typed table. Columns named in `declared` take that
/// type; the rest are quantitative when every non-empty cell is numeric and
/// nominal otherwise.
pub(crate) fn read_raw_csv(text: &str, declared: &[(String, FieldType)]) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| ChartError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut raw: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ChartError::Csv(e.to_string()))?;
        raw.push(rec.iter().map(str::to_string).collect());
    }
    let columns: Vec<Field> = headers
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let ty = declared
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| *t)
                .unwrap_or_else(|| infer_type(raw.iter().map(|r| r[i].as_str())));
            Field::new(name.clone(), ty)
        })
        .collect();
    typed_rows(columns, raw)
}

fn infer_type<'a>(cells: impl Iterator<Item = &'a str>) -> FieldType {
    let mut any = false;
    for c in cells {
        let c = c.trim();
        if c.is_empty() {
            continue;
        }
        any = true;
        if !c.parse::<f64>().is_ok_and(f64::is_finite) {
            return FieldType::Nominal;
        }
    }
    if any {
        FieldType::Quantitative
    } else {
        FieldType::Nominal
    }
}

fn typed_rows(columns: Vec<Field>, raw: Vec<Vec<String>>) -> Result<Table> {
    let mut rows = Vec::with_capacity(raw.len());
    for (r, cells) in raw.into_iter().enumerate() {
        let mut row = Vec::with_capacity(columns.len());
        for (col, cell) in columns.iter().zip(&cells) {
            let v = DataValue::parse_as(cell, col.field_type).ok_or_else(|| {
                ChartError::Csv(format!(
                    "row {}, column `{}`: `{}` is not {}",
                    r + 1,
                    col.name,
                    cell,
                    col.field_type.as_str()
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Parses CSV produced by [`export_csv`] back into a table with the given
/// schema. Columns not in the schema (such as `color`) are read as nominal.
pub fn parse_csv(text: &str, schema: &[Field]) -> Result<Table> {
    let declared: Vec<(String, FieldType)> = schema.iter().map(|f| (f.name.clone(), f.field_type)).collect();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| ChartError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let columns: Vec<Field> = headers
        .iter()
        .map(|h| {
            let ty = declared.iter().find(|(n, _)| n == h).map(|(_, t)| *t).unwrap_or(FieldType::Nominal);
            Field::new(h.clone(), ty)
        })
        .collect();
    let mut raw = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ChartError::Csv(e.to_string()))?;
        raw.push(rec.iter().map(str::to_string).collect());
    }
    typed_rows(columns, raw)
}

/// Header plus one line per row, LF line endings, quoting only when needed.
/// With `color_names`, a trailing `color` column carries the English name of
/// each row's color (falling back to the hex when the map lacks it).
pub fn export_csv(view: &TransformedView, color_names: Option<&HashMap<String, String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let with_color = color_names.is_some() && view.row_color_hex.is_some();
    let mut header: Vec<&str> = view.columns().iter().map(|c| c.name.as_str()).collect();
    if with_color {
        header.push("color");
    }
    w.write_record(&header).expect("writing to memory");
    for (i, row) in view.rows().iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(DataValue::to_cell).collect();
        if let (true, Some(names), Some(hexes)) = (with_color, color_names, &view.row_color_hex) {
            let hex = &hexes[i];
            cells.push(names.get(hex).cloned().unwrap_or_else(|| hex.clone()));
        }
        w.write_record(&cells).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing memory")).expect("CSV output is UTF-8")
}

/// Stable sort by one column. Nulls stay last in both directions.
pub fn sort_view(view: &TransformedView, column: &str, order: SortOrder) -> Result<TransformedView> {
    let ci = view
        .table
        .column_index(column)
        .ok_or_else(|| ChartError::UnknownColumn(column.to_string()))?;
    let rows = view.rows();
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (&rows[a][ci], &rows[b][ci]);
        match (x.is_null(), y.is_null(), order) {
            (true, true, _) => std::cmp::Ordering::Equal,
            (true, false, _) => std::cmp::Ordering::Greater,
            (false, true, _) => std::cmp::Ordering::Less,
            (false, false, SortOrder::Asc) => x.sort_cmp(y),
            (false, false, SortOrder::Desc) => y.sort_cmp(x),
        }
    });
    Ok(view.select_rows(&idx))
}
