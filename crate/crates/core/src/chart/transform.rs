use std::cmp::Ordering;
use std::collections::HashMap;

use super::{
    resolve_colors, AggregateOp, AggregateSpec, ChartError, ChartSpec, CompareOp, Operand, Predicate, Result, Table,
    Transform, TransformedView,
};
use crate::bins::{bin_intervals, interval_index};
use crate::value::{parse_timestamp, DataValue, Field, FieldType};

/// Applies the chart's transforms in declaration order and resolves row colors.
pub fn materialize_view(spec: &ChartSpec, data: &Table) -> Result<TransformedView> {
    check_fields(spec, data)?;
    let mut table = data.clone();
    for (index, t) in spec.transforms.iter().enumerate() {
        table = match t {
            Transform::Filter(pred) => apply_filter(spec, &table, pred, index)?,
            Transform::Bin {
                field,
                as_start,
                as_end,
                maxbins,
            } => apply_bin(&table, field, as_start, as_end, *maxbins, index)?,
            Transform::Aggregate { ops, groupby } => apply_aggregate(&table, ops, groupby, index)?,
        };
    }
    let view = TransformedView {
        table,
        row_color_hex: None,
    };
    Ok(resolve_colors(spec, &view))
}

/// Returns a copy of `spec` with parameter `name` set to `value`.
pub fn update_params(spec: &ChartSpec, name: &str, value: DataValue) -> Result<ChartSpec> {
    let param = spec.param(name).ok_or_else(|| ChartError::UnknownParam(name.to_string()))?;
    if !param.allows(&value) {
        return Err(ChartError::OutOfRange {
            name: name.to_string(),
            value: value.to_string(),
        });
    }
    let mut next = spec.clone();
    for p in &mut next.params {
        if p.name == name {
            p.value = value.clone();
        }
    }
    Ok(next)
}

/// Walks the schema through every transform, checking that each referenced
/// field exists at the point it is used and that encodings name real fields.
pub(crate) fn check_fields(spec: &ChartSpec, data: &Table) -> Result<()> {
    let mut schema: Vec<Field> = data.columns.clone();
    let has = |schema: &[Field], f: &str| schema.iter().any(|c| c.name == f);
    for (index, t) in spec.transforms.iter().enumerate() {
        let missing = |field: &str| ChartError::TransformMissingField {
            index,
            field: field.to_string(),
        };
        match t {
            Transform::Filter(p) => {
                if !has(&schema, &p.field) {
                    return Err(missing(&p.field));
                }
            }
            Transform::Bin {
                field, as_start, as_end, ..
            } => {
                if !has(&schema, field) {
                    return Err(missing(field));
                }
                schema.retain(|c| &c.name != as_start && &c.name != as_end);
                schema.push(Field::new(as_start.clone(), FieldType::Quantitative));
                schema.push(Field::new(as_end.clone(), FieldType::Quantitative));
            }
            Transform::Aggregate { ops, groupby } => {
                let mut next = Vec::new();
                for g in groupby {
                    let col = schema.iter().find(|c| &c.name == g).ok_or_else(|| missing(g))?;
                    next.push(col.clone());
                }
                for op in ops {
                    if let Some(f) = &op.field {
                        if !has(&schema, f) {
                            return Err(missing(f));
                        }
                    }
                    next.push(Field::new(op.as_name.clone(), FieldType::Quantitative));
                }
                schema = next;
            }
        }
    }
    for e in &spec.encodings {
        if !has(&schema, &e.field) {
            return Err(ChartError::UnknownEncodingField {
                channel: e.channel.as_str().to_string(),
                field: e.field.clone(),
            });
        }
    }
    Ok(())
}

fn column(table: &Table, field: &str, index: usize) -> Result<usize> {
    table.column_index(field).ok_or_else(|| ChartError::TransformMissingField {
        index,
        field: field.to_string(),
    })
}

/// Coerces a filter operand to the column's type.
fn coerce_operand(value: &DataValue, col: &Field, index: usize) -> Result<DataValue> {
    let mismatch = || ChartError::TypeMismatch {
        index,
        field: col.name.clone(),
        field_type: col.field_type.as_str(),
        operand: value.to_string(),
    };
    Ok(match (col.field_type, value) {
        (_, DataValue::Null) => DataValue::Null,
        (FieldType::Quantitative, DataValue::Number(_)) => value.clone(),
        (FieldType::Quantitative, DataValue::Text(s)) => match s.trim().parse::<f64>() {
            Ok(n) if n.is_finite() => DataValue::Number(n),
            _ => return Err(mismatch()),
        },
        (FieldType::Nominal, DataValue::Number(n)) => DataValue::Text(crate::value::format_number(*n)),
        (FieldType::Nominal, DataValue::Text(_)) => value.clone(),
        (FieldType::Temporal, DataValue::Text(s)) => DataValue::Timestamp(parse_timestamp(s).ok_or_else(mismatch)?),
        (FieldType::Temporal, DataValue::Number(n)) if n.fract() == 0.0 && (1000.0..=9999.0).contains(n) => {
            DataValue::Timestamp(parse_timestamp(&format!("{}", *n as i64)).ok_or_else(mismatch)?)
        }
        (FieldType::Temporal, DataValue::Number(n)) => DataValue::Timestamp(*n as i64),
        (_, DataValue::Timestamp(_)) if col.field_type == FieldType::Temporal => value.clone(),
        _ => return Err(mismatch()),
    })
}

/// Compares a cell against an operand of the same kind. Numeric-looking text
/// compares numerically so ordinal years order correctly.
fn compare(cell: &DataValue, rhs: &DataValue) -> Option<Ordering> {
    match (cell, rhs) {
        (DataValue::Null, _) | (_, DataValue::Null) => None,
        (DataValue::Text(a), DataValue::Text(b)) => match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => x.partial_cmp(&y),
            _ => Some(a.cmp(b)),
        },
        _ => Some(cell.sort_cmp(rhs)),
    }
}

pub(crate) fn predicate_holds(op: CompareOp, ord: Option<Ordering>) -> bool {
    let Some(ord) = ord else {
        return false;
    };
    match op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::Ne => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::Le => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::Ge => ord != Ordering::Less,
    }
}

fn apply_filter(spec: &ChartSpec, table: &Table, pred: &Predicate, index: usize) -> Result<Table> {
    let ci = column(table, &pred.field, index)?;
    let raw = match &pred.operand {
        Operand::Literal(v) => v.clone(),
        Operand::Param(name) => spec
            .param(name)
            .ok_or_else(|| ChartError::UnknownParam(name.clone()))?
            .value
            .clone(),
    };
    // an unset parameter leaves the data unfiltered
    if raw.is_null() && matches!(pred.operand, Operand::Param(_)) {
        return Ok(table.clone());
    }
    let rhs = coerce_operand(&raw, &table.columns[ci], index)?;
    let rows = table
        .rows
        .iter()
        .filter(|row| predicate_holds(pred.op, compare(&row[ci], &rhs)))
        .cloned()
        .collect();
    Ok(Table {
        columns: table.columns.clone(),
        rows,
    })
}

fn apply_bin(table: &Table, field: &str, as_start: &str, as_end: &str, maxbins: usize, index: usize) -> Result<Table> {
    let ci = column(table, field, index)?;
    let col = &table.columns[ci];
    if col.field_type != FieldType::Quantitative {
        return Err(ChartError::TypeMismatch {
            index,
            field: field.to_string(),
            field_type: col.field_type.as_str(),
            operand: "bin".into(),
        });
    }
    let values: Vec<f64> = table.rows.iter().filter_map(|r| r[ci].as_f64()).collect();
    let intervals = bin_intervals(&values, maxbins).unwrap_or_default();
    let keep: Vec<usize> = (0..table.columns.len())
        .filter(|&i| table.columns[i].name != as_start && table.columns[i].name != as_end)
        .collect();
    let mut columns: Vec<Field> = keep.iter().map(|&i| table.columns[i].clone()).collect();
    columns.push(Field::new(as_start, FieldType::Quantitative));
    columns.push(Field::new(as_end, FieldType::Quantitative));
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let mut out: Vec<DataValue> = keep.iter().map(|&i| row[i].clone()).collect();
            match row[ci].as_f64().and_then(|v| interval_index(&intervals, v)) {
                Some(b) => {
                    out.push(DataValue::Number(intervals[b].lo));
                    out.push(DataValue::Number(intervals[b].hi));
                }
                None => {
                    out.push(DataValue::Null);
                    out.push(DataValue::Null);
                }
            }
            out
        })
        .collect();
    Ok(Table { columns, rows })
}

fn group_key(v: &DataValue) -> String {
    match v {
        DataValue::Number(n) => format!("n:{}", n.to_bits()),
        DataValue::Text(s) => format!("s:{s}"),
        DataValue::Timestamp(t) => format!("t:{t}"),
        DataValue::Null => "null".into(),
    }
}

/// Reduces the non-null values of one column with `op`.
pub(crate) fn reduce(op: AggregateOp, values: &[f64], row_count: usize, counts_rows: bool) -> DataValue {
    match op {
        AggregateOp::Count => DataValue::Number(if counts_rows { row_count } else { values.len() } as f64),
        _ if values.is_empty() => DataValue::Null,
        AggregateOp::Sum => DataValue::number(values.iter().sum()),
        AggregateOp::Mean => DataValue::number(values.iter().sum::<f64>() / values.len() as f64),
        AggregateOp::Min => DataValue::number(values.iter().copied().fold(f64::INFINITY, f64::min)),
        AggregateOp::Max => DataValue::number(values.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    }
}

fn apply_aggregate(table: &Table, ops: &[AggregateSpec], groupby: &[String], index: usize) -> Result<Table> {
    let gidx: Vec<usize> = groupby.iter().map(|g| column(table, g, index)).collect::<Result<_>>()?;
    let mut oidx = Vec::with_capacity(ops.len());
    for op in ops {
        oidx.push(match &op.field {
            Some(f) => {
                let ci = column(table, f, index)?;
                let ty = table.columns[ci].field_type;
                if op.op != AggregateOp::Count && ty == FieldType::Nominal {
                    return Err(ChartError::TypeMismatch {
                        index,
                        field: f.clone(),
                        field_type: ty.as_str(),
                        operand: op.op.as_str().into(),
                    });
                }
                Some(ci)
            }
            None => None,
        });
    }

    // groups in first-appearance order
    let mut order: Vec<Vec<DataValue>> = Vec::new();
    let mut members: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
    for (r, row) in table.rows.iter().enumerate() {
        let key: Vec<String> = gidx.iter().map(|&i| group_key(&row[i])).collect();
        let entry = members.entry(key).or_default();
        if entry.is_empty() {
            order.push(gidx.iter().map(|&i| row[i].clone()).collect());
        }
        entry.push(r);
    }
    if groupby.is_empty() && table.rows.is_empty() {
        order.push(Vec::new());
        members.insert(Vec::new(), Vec::new());
    }

    let mut columns: Vec<Field> = gidx.iter().map(|&i| table.columns[i].clone()).collect();
    columns.extend(ops.iter().map(|o| Field::new(o.as_name.clone(), FieldType::Quantitative)));
    let mut rows = Vec::with_capacity(order.len());
    for keyvals in order {
        let key: Vec<String> = keyvals.iter().map(group_key).collect();
        let idx = &members[&key];
        let mut out = keyvals;
        for (op, ci) in ops.iter().zip(&oidx) {
            let values: Vec<f64> = match ci {
                Some(ci) => idx.iter().filter_map(|&r| table.rows[r][*ci].as_f64()).collect(),
                None => Vec::new(),
            };
            let non_null = match ci {
                Some(ci) => idx.iter().filter(|&&r| !table.rows[r][*ci].is_null()).count(),
                None => idx.len(),
            };
            out.push(match op.op {
                AggregateOp::Count => DataValue::Number(non_null as f64),
                other => reduce(other, &values, idx.len(), ci.is_none()),
            });
        }
        rows.push(out);
    }
    Ok(Table { columns, rows })
}
