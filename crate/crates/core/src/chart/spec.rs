use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::{
    AggregateOp, AggregateSpec, Channel, ChartError, ChartKind, ChartSpec, CompareOp, DataRef, EncodingChannel,
    InteractiveParam, Operand, ParamRange, Predicate, Result, ScaleDomain, Table, Transform,
};
use crate::color::parse_hex_or_name;
use crate::value::{parse_timestamp, DataValue, Field, FieldType};

const TOP_LEVEL_KEYS: &[&str] = &[
    "$schema",
    "description",
    "title",
    "data",
    "mark",
    "encoding",
    "transform",
    "params",
    "width",
    "height",
];
const ENCODING_KEYS: &[&str] = &["field", "type", "title", "bin", "scale"];

/// Parses a chart document with no base directory for relative data paths.
pub fn parse_chart_spec(source: &str) -> Result<ChartSpec> {
    parse_chart_spec_at(source, None)
}

/// Parses a chart document whose relative data paths resolve against `base_dir`.
pub fn parse_chart_spec_at(source: &str, base_dir: Option<&Path>) -> Result<ChartSpec> {
    let root: Value = serde_json::from_str(source).map_err(|e| ChartError::Parse {
        path: format!("$ (line {}, column {})", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = as_object(&root, "$")?;
    for key in obj.keys() {
        if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
            return Err(unsupported(key, "top-level property"));
        }
    }

    let kind = parse_mark(obj.get("mark").ok_or_else(|| parse_err("mark", "missing mark"))?)?;
    let description = match (obj.get("description"), obj.get("title")) {
        (Some(Value::String(s)), _) => s.clone(),
        (_, Some(Value::String(s))) => s.clone(),
        _ => String::new(),
    };
    let params = match obj.get("params") {
        Some(v) => parse_params(v)?,
        None => Vec::new(),
    };
    let encodings = parse_encodings(obj.get("encoding"))?;
    let data = parse_data(obj.get("data"), &encodings)?;
    let transforms = match obj.get("transform") {
        Some(v) => parse_transforms(v, &params)?,
        None => Vec::new(),
    };

    validate(kind, &encodings)?;
    let spec = ChartSpec {
        kind,
        description,
        data,
        encodings,
        transforms,
        params,
        base_dir: base_dir.map(Path::to_path_buf),
    };
    if let DataRef::Inline(table) = &spec.data {
        // inline data can be checked up front; file data is checked on materialize
        super::transform::check_fields(&spec, table)?;
    }
    Ok(spec)
}

fn parse_err(path: &str, message: impl Into<String>) -> ChartError {
    ChartError::Parse {
        path: path.to_string(),
        message: message.into(),
    }
}

fn unsupported(path: &str, what: impl Into<String>) -> ChartError {
    ChartError::Unsupported {
        path: path.to_string(),
        what: what.into(),
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| parse_err(path, "expected an object"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| parse_err(path, "expected a string"))
}

fn parse_mark(v: &Value) -> Result<ChartKind> {
    let name = match v {
        Value::String(s) => s.as_str(),
        Value::Object(o) => {
            for key in o.keys() {
                if key != "type" {
                    return Err(unsupported(&format!("mark.{key}"), "mark property"));
                }
            }
            as_str(o.get("type").ok_or_else(|| parse_err("mark.type", "missing"))?, "mark.type")?
        }
        _ => return Err(parse_err("mark", "expected a string or object")),
    };
    ChartKind::from_mark(name).ok_or_else(|| ChartError::UnsupportedMark(name.to_string()))
}

fn parse_encodings(v: Option<&Value>) -> Result<Vec<EncodingChannel>> {
    let Some(v) = v else {
        return Err(ChartError::MissingEncoding);
    };
    let obj = as_object(v, "encoding")?;
    let mut out = Vec::new();
    for (name, enc) in obj {
        let path = format!("encoding.{name}");
        let channel = Channel::parse(name).ok_or_else(|| unsupported(&path, "encoding channel"))?;
        out.push(parse_encoding(channel, enc, &path)?);
    }
    out.sort_by_key(|e| e.channel);
    Ok(out)
}

fn parse_encoding(channel: Channel, v: &Value, path: &str) -> Result<EncodingChannel> {
    let obj = as_object(v, path)?;
    for key in obj.keys() {
        if !ENCODING_KEYS.contains(&key.as_str()) {
            return Err(unsupported(&format!("{path}.{key}"), "encoding property"));
        }
    }
    let field = as_str(
        obj.get("field").ok_or_else(|| parse_err(&format!("{path}.field"), "missing"))?,
        &format!("{path}.field"),
    )?
    .to_string();
    let type_path = format!("{path}.type");
    let data_type = match as_str(obj.get("type").ok_or_else(|| parse_err(&type_path, "missing"))?, &type_path)? {
        "quantitative" => FieldType::Quantitative,
        "nominal" | "ordinal" => FieldType::Nominal,
        "temporal" => FieldType::Temporal,
        other => return Err(unsupported(&type_path, format!("data type `{other}`"))),
    };
    let title = match obj.get("title") {
        Some(t) => Some(as_str(t, &format!("{path}.title"))?.to_string()),
        None => None,
    };
    let binned = match obj.get("bin") {
        None | Some(Value::Bool(false)) | Some(Value::Null) => false,
        Some(Value::Bool(true)) | Some(Value::Object(_)) => true,
        Some(_) => return Err(parse_err(&format!("{path}.bin"), "expected a boolean or object")),
    };
    let (scale_domain, scale_range) = match obj.get("scale") {
        Some(s) => parse_scale(s, data_type, &format!("{path}.scale"))?,
        None => (None, None),
    };
    Ok(EncodingChannel {
        channel,
        field,
        data_type,
        title,
        binned,
        scale_domain,
        scale_range,
    })
}

fn parse_scale(v: &Value, data_type: FieldType, path: &str) -> Result<(Option<ScaleDomain>, Option<Vec<String>>)> {
    let obj = as_object(v, path)?;
    let mut domain = None;
    let mut range = None;
    for (key, val) in obj {
        let p = format!("{path}.{key}");
        match key.as_str() {
            "domain" => {
                let items = val.as_array().ok_or_else(|| parse_err(&p, "expected an array"))?;
                domain = Some(match data_type {
                    FieldType::Quantitative => {
                        let nums: Vec<f64> = items.iter().filter_map(Value::as_f64).collect();
                        if nums.len() != 2 || items.len() != 2 || nums[0] > nums[1] {
                            return Err(parse_err(&p, "quantitative domain must be [min, max]"));
                        }
                        ScaleDomain::Numeric { min: nums[0], max: nums[1] }
                    }
                    _ => ScaleDomain::Categorical(
                        items
                            .iter()
                            .enumerate()
                            .map(|(i, item)| json_to_value(item, data_type, &format!("{p}[{i}]")))
                            .collect::<Result<_>>()?,
                    ),
                });
            }
            "range" => {
                let items = val.as_array().ok_or_else(|| parse_err(&p, "expected an array of colors"))?;
                let mut colors = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let ip = format!("{p}[{i}]");
                    let raw = as_str(item, &ip)?;
                    let hex = parse_hex_or_name(raw).ok_or_else(|| parse_err(&ip, format!("`{raw}` is not a color")))?;
                    colors.push(hex);
                }
                if colors.is_empty() {
                    return Err(parse_err(&p, "empty color range"));
                }
                range = Some(colors);
            }
            _ => return Err(unsupported(&p, "scale property")),
        }
    }
    Ok((domain, range))
}

fn validate(kind: ChartKind, encodings: &[EncodingChannel]) -> Result<()> {
    if !encodings
        .iter()
        .any(|e| matches!(e.channel, Channel::X | Channel::Y | Channel::Detail))
    {
        return Err(ChartError::MissingEncoding);
    }
    for e in encodings {
        if e.channel == Channel::Detail && e.data_type != FieldType::Nominal {
            return Err(ChartError::InvalidEncoding {
                channel: "detail".into(),
                reason: "detail must carry nominal data".into(),
            });
        }
        if e.binned && e.data_type != FieldType::Quantitative {
            return Err(ChartError::InvalidEncoding {
                channel: e.channel.as_str().into(),
                reason: "binning requires quantitative data".into(),
            });
        }
        if let Some(range) = &e.scale_range {
            if e.channel != Channel::Color {
                return Err(unsupported(
                    &format!("encoding.{}.scale.range", e.channel.as_str()),
                    "ranges are only supported on color",
                ));
            }
            if e.data_type != FieldType::Nominal && range.len() != 2 {
                return Err(ChartError::InvalidEncoding {
                    channel: "color".into(),
                    reason: "sequential color ranges need exactly two endpoint colors".into(),
                });
            }
        }
    }
    let positional = encodings.iter().any(|e| matches!(e.channel, Channel::X | Channel::Y));
    match kind {
        ChartKind::Choropleth if positional => Err(ChartError::InvalidEncoding {
            channel: "x/y".into(),
            reason: "geoshape charts are modeled by detail and color only".into(),
        }),
        ChartKind::Choropleth if !encodings.iter().any(|e| e.channel == Channel::Detail) => {
            Err(ChartError::InvalidEncoding {
                channel: "detail".into(),
                reason: "geoshape charts need a detail channel naming the regions".into(),
            })
        }
        ChartKind::Bar | ChartKind::Line | ChartKind::Scatter if !positional => Err(ChartError::MissingEncoding),
        _ => Ok(()),
    }
}

fn parse_data(v: Option<&Value>, encodings: &[EncodingChannel]) -> Result<DataRef> {
    let Some(v) = v else {
        return Err(ChartError::MissingData);
    };
    let obj = as_object(v, "data")?;
    if let Some(url) = obj.get("url") {
        for key in obj.keys() {
            if key != "url" && key != "format" {
                return Err(unsupported(&format!("data.{key}"), "data property"));
            }
        }
        if let Some(fmt) = obj.get("format") {
            let ty = fmt.get("type").and_then(Value::as_str).unwrap_or("csv");
            if ty != "csv" {
                return Err(unsupported("data.format.type", format!("data format `{ty}`")));
            }
        }
        return Ok(DataRef::File(PathBuf::from(as_str(url, "data.url")?)));
    }
    if let Some(values) = obj.get("values") {
        let rows = values.as_array().ok_or_else(|| parse_err("data.values", "expected an array"))?;
        return Ok(DataRef::Inline(inline_table(rows, encodings)?));
    }
    Err(ChartError::MissingData)
}

fn inline_table(rows: &[Value], encodings: &[EncodingChannel]) -> Result<Table> {
    let mut names: Vec<String> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for key in as_object(row, &format!("data.values[{i}]"))?.keys() {
            if !names.contains(key) {
                names.push(key.clone());
            }
        }
    }
    let declared = |name: &str| encodings.iter().find(|e| e.field == name).map(|e| e.data_type);
    let columns: Vec<Field> = names
        .iter()
        .map(|name| {
            let ty = declared(name).unwrap_or_else(|| {
                let all_numeric = rows.iter().all(|r| matches!(r.get(name), None | Some(Value::Null) | Some(Value::Number(_))));
                if all_numeric {
                    FieldType::Quantitative
                } else {
                    FieldType::Nominal
                }
            });
            Field::new(name.clone(), ty)
        })
        .collect();
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut cells = Vec::with_capacity(columns.len());
        for col in &columns {
            let path = format!("data.values[{i}].{}", col.name);
            cells.push(match row.get(&col.name) {
                None => DataValue::Null,
                Some(v) => json_to_value(v, col.field_type, &path)?,
            });
        }
        out.push(cells);
    }
    Ok(Table { columns, rows: out })
}

fn json_to_value(v: &Value, ty: FieldType, path: &str) -> Result<DataValue> {
    Ok(match (v, ty) {
        (Value::Null, _) => DataValue::Null,
        (Value::Number(n), FieldType::Quantitative) => DataValue::number(n.as_f64().unwrap_or(f64::NAN)),
        (Value::String(s), FieldType::Quantitative) => DataValue::parse_as(s, ty)
            .ok_or_else(|| parse_err(path, format!("`{s}` is not a number")))?,
        (Value::Number(n), FieldType::Nominal) => DataValue::number(n.as_f64().unwrap_or(f64::NAN)),
        (Value::String(s), FieldType::Nominal) => DataValue::text(s.clone()),
        (Value::String(s), FieldType::Temporal) => {
            DataValue::Timestamp(parse_timestamp(s).ok_or_else(|| parse_err(path, format!("`{s}` is not a date")))?)
        }
        (Value::Number(n), FieldType::Temporal) => match n.as_i64() {
            Some(year @ 1000..=9999) => DataValue::Timestamp(parse_timestamp(&year.to_string()).unwrap_or_default()),
            Some(ms) => DataValue::Timestamp(ms),
            None => return Err(parse_err(path, "expected a date")),
        },
        (Value::Bool(b), _) => DataValue::Text(b.to_string()),
        _ => return Err(parse_err(path, "unsupported value")),
    })
}

fn parse_params(v: &Value) -> Result<Vec<InteractiveParam>> {
    let items = v.as_array().ok_or_else(|| parse_err("params", "expected an array"))?;
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = format!("params[{i}]");
        let obj = as_object(item, &path)?;
        for key in obj.keys() {
            if !["name", "value", "bind"].contains(&key.as_str()) {
                return Err(unsupported(&format!("{path}.{key}"), "parameter property (selections are not supported)"));
            }
        }
        let name = as_str(obj.get("name").ok_or_else(|| parse_err(&format!("{path}.name"), "missing"))?, &path)?;
        let value = match obj.get("value") {
            Some(Value::Number(n)) => DataValue::number(n.as_f64().unwrap_or(f64::NAN)),
            Some(Value::String(s)) => DataValue::text(s.clone()),
            Some(Value::Null) | None => DataValue::Null,
            Some(_) => return Err(parse_err(&format!("{path}.value"), "expected a number or string")),
        };
        let range = match obj.get("bind") {
            None => ParamRange::Unbounded,
            Some(b) => {
                let bp = format!("{path}.bind");
                let bobj = as_object(b, &bp)?;
                match bobj.get("input").and_then(Value::as_str) {
                    Some("range") => {
                        let num = |k: &str| bobj.get(k).and_then(Value::as_f64);
                        let (Some(min), Some(max)) = (num("min"), num("max")) else {
                            return Err(parse_err(&bp, "range inputs need min and max"));
                        };
                        ParamRange::Numeric { min, max, step: num("step") }
                    }
                    Some("select") | Some("radio") => {
                        let opts = bobj
                            .get("options")
                            .and_then(Value::as_array)
                            .ok_or_else(|| parse_err(&format!("{bp}.options"), "missing"))?;
                        ParamRange::Options(
                            opts.iter()
                                .map(|o| match o {
                                    Value::Number(n) => DataValue::number(n.as_f64().unwrap_or(f64::NAN)),
                                    Value::String(s) => DataValue::text(s.clone()),
                                    _ => DataValue::Null,
                                })
                                .collect(),
                        )
                    }
                    other => return Err(unsupported(&format!("{bp}.input"), format!("input {other:?}"))),
                }
            }
        };
        let param = InteractiveParam {
            name: name.to_string(),
            value,
            range,
        };
        if !param.value.is_null() && !param.allows(&param.value) {
            return Err(ChartError::OutOfRange {
                name: param.name,
                value: param.value.to_string(),
            });
        }
        out.push(param);
    }
    Ok(out)
}

fn parse_transforms(v: &Value, params: &[InteractiveParam]) -> Result<Vec<Transform>> {
    let items = v.as_array().ok_or_else(|| parse_err("transform", "expected an array"))?;
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = format!("transform[{i}]");
        let obj = as_object(item, &path)?;
        if let Some(f) = obj.get("filter") {
            let pred = parse_filter(f, &format!("{path}.filter"))?;
            if let Operand::Param(name) = &pred.operand {
                if !params.iter().any(|p| &p.name == name) {
                    return Err(ChartError::UnknownParam(name.clone()));
                }
            }
            out.push(Transform::Filter(pred));
        } else if obj.contains_key("bin") {
            let field = as_str(obj.get("field").ok_or_else(|| parse_err(&format!("{path}.field"), "missing"))?, &path)?;
            let maxbins = match obj.get("bin") {
                Some(Value::Bool(true)) => 10,
                Some(Value::Object(b)) => b.get("maxbins").and_then(Value::as_u64).unwrap_or(10) as usize,
                _ => return Err(parse_err(&format!("{path}.bin"), "expected true or an object")),
            };
            let (as_start, as_end) = match obj.get("as") {
                Some(Value::String(s)) => (s.clone(), format!("{s}_end")),
                Some(Value::Array(a)) if a.len() == 2 => (
                    as_str(&a[0], &format!("{path}.as[0]"))?.to_string(),
                    as_str(&a[1], &format!("{path}.as[1]"))?.to_string(),
                ),
                None => (format!("bin_{field}"), format!("bin_{field}_end")),
                _ => return Err(parse_err(&format!("{path}.as"), "expected a name or a pair of names")),
            };
            out.push(Transform::Bin {
                field: field.to_string(),
                as_start,
                as_end,
                maxbins: maxbins.max(1),
            });
        } else if let Some(aggs) = obj.get("aggregate") {
            let list = aggs.as_array().ok_or_else(|| parse_err(&format!("{path}.aggregate"), "expected an array"))?;
            let mut ops = Vec::new();
            for (j, a) in list.iter().enumerate() {
                let ap = format!("{path}.aggregate[{j}]");
                let aobj = as_object(a, &ap)?;
                let op_name = as_str(aobj.get("op").ok_or_else(|| parse_err(&format!("{ap}.op"), "missing"))?, &ap)?;
                let op = AggregateOp::parse(op_name).ok_or_else(|| unsupported(&format!("{ap}.op"), format!("aggregate `{op_name}`")))?;
                let field = aobj.get("field").and_then(Value::as_str).map(str::to_string);
                if field.is_none() && op != AggregateOp::Count {
                    return Err(parse_err(&format!("{ap}.field"), "missing"));
                }
                let as_name = match aobj.get("as").and_then(Value::as_str) {
                    Some(s) => s.to_string(),
                    None => match &field {
                        Some(f) => format!("{}_{f}", op.as_str()),
                        None => op.as_str().to_string(),
                    },
                };
                ops.push(AggregateSpec { op, field, as_name });
            }
            let groupby = match obj.get("groupby") {
                Some(Value::Array(g)) => g
                    .iter()
                    .enumerate()
                    .map(|(j, s)| as_str(s, &format!("{path}.groupby[{j}]")).map(str::to_string))
                    .collect::<Result<_>>()?,
                None => Vec::new(),
                Some(_) => return Err(parse_err(&format!("{path}.groupby"), "expected an array")),
            };
            out.push(Transform::Aggregate { ops, groupby });
        } else {
            let key = obj.keys().next().cloned().unwrap_or_default();
            return Err(unsupported(&format!("{path}.{key}"), "transform"));
        }
    }
    Ok(out)
}

fn parse_filter(v: &Value, path: &str) -> Result<Predicate> {
    match v {
        Value::String(expr) => parse_filter_expr(expr, path),
        Value::Object(obj) => {
            let field = as_str(obj.get("field").ok_or_else(|| parse_err(&format!("{path}.field"), "missing"))?, path)?;
            let mut found = None;
            for (key, val) in obj {
                if key == "field" {
                    continue;
                }
                let op = CompareOp::parse(key).ok_or_else(|| unsupported(&format!("{path}.{key}"), "filter predicate"))?;
                let operand = match val {
                    Value::Object(p) if p.contains_key("param") => {
                        Operand::Param(as_str(&p["param"], &format!("{path}.{key}.param"))?.to_string())
                    }
                    Value::Number(n) => Operand::Literal(DataValue::number(n.as_f64().unwrap_or(f64::NAN))),
                    Value::String(s) => Operand::Literal(DataValue::text(s.clone())),
                    _ => return Err(parse_err(&format!("{path}.{key}"), "expected a number, string, or param")),
                };
                if found.replace((op, operand)).is_some() {
                    return Err(unsupported(path, "compound field predicate"));
                }
            }
            let (op, operand) = found.ok_or_else(|| parse_err(path, "predicate has no comparison"))?;
            Ok(Predicate {
                field: field.to_string(),
                op,
                operand,
            })
        }
        _ => Err(parse_err(path, "expected an expression string or predicate object")),
    }
}

/// Accepts `datum.Field OP rhs` and `datum['Field name'] OP rhs`, where rhs is
/// a number, a quoted string, or a parameter name.
fn parse_filter_expr(expr: &str, path: &str) -> Result<Predicate> {
    let s = expr.trim();
    let rest = s
        .strip_prefix("datum")
        .ok_or_else(|| unsupported(path, format!("filter expression `{expr}`")))?;
    let (field, rest) = if let Some(r) = rest.strip_prefix('.') {
        let end = r.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(r.len());
        (r[..end].to_string(), &r[end..])
    } else if let Some(r) = rest.strip_prefix('[') {
        let quote = r.chars().next().filter(|c| *c == '\'' || *c == '"').ok_or_else(|| parse_err(path, "expected a quoted field name"))?;
        let body = &r[1..];
        let close = body.find(quote).ok_or_else(|| parse_err(path, "unterminated field name"))?;
        let after = body[close + 1..].trim_start();
        let after = after.strip_prefix(']').ok_or_else(|| parse_err(path, "expected `]`"))?;
        (body[..close].to_string(), after)
    } else {
        return Err(unsupported(path, format!("filter expression `{expr}`")));
    };
    if field.is_empty() {
        return Err(parse_err(path, "empty field name"));
    }
    let rest = rest.trim_start();
    let op_len = rest.find(|c: char| !"=!<>".contains(c)).unwrap_or(rest.len());
    let op = CompareOp::parse(&rest[..op_len]).ok_or_else(|| unsupported(path, format!("operator in `{expr}`")))?;
    let rhs = rest[op_len..].trim();
    let operand = if let Some(q) = rhs.strip_prefix('\'').and_then(|r| r.strip_suffix('\'')) {
        Operand::Literal(DataValue::text(q))
    } else if let Some(q) = rhs.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        Operand::Literal(DataValue::text(q))
    } else if let Ok(n) = rhs.parse::<f64>() {
        Operand::Literal(DataValue::number(n))
    } else if !rhs.is_empty() && rhs.chars().all(|c| c.is_alphanumeric() || c == '_') {
        Operand::Param(rhs.to_string())
    } else {
        return Err(unsupported(path, format!("right-hand side `{rhs}`")));
    };
    Ok(Predicate { field, op, operand })
}
