use super::{Channel, ChartSpec, ScaleDomain, TransformedView};
use crate::color::parse_hex_or_name;
use crate::value::{DataValue, FieldType};

const PALETTE_FILE: &str = include_str!("../../data/categorical_palette.txt");
const DEFAULT_RAMP: [&str; 2] = ["#deebf7", "#08519c"];
/// Color given to rows whose color field is null.
pub const NULL_COLOR: &str = "#d3d3d3";

/// The shipped 10-color categorical palette, lowercase `#rrggbb`.
pub fn default_palette() -> Vec<String> {
    PALETTE_FILE
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .filter_map(parse_hex_or_name)
        .collect()
}

/// Linear interpolation between two hex colors in sRGB, `t` clamped to [0, 1].
pub fn interpolate_hex(from: &str, to: &str, t: f64) -> String {
    let a = rgb(from);
    let b = rgb(to);
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let mix = |i: usize| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
}

fn rgb(hex: &str) -> [u8; 3] {
    let h = parse_hex_or_name(hex).unwrap_or_else(|| "#000000".into());
    let byte = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).unwrap_or(0);
    [byte(1), byte(3), byte(5)]
}

/// Assigns each row the color its value maps to under the color encoding.
/// Without a color encoding the view comes back with no colors.
pub fn resolve_colors(spec: &ChartSpec, view: &TransformedView) -> TransformedView {
    let mut out = view.clone();
    let Some(enc) = spec.encoding(Channel::Color) else {
        out.row_color_hex = None;
        return out;
    };
    let Some(ci) = view.table.column_index(&enc.field) else {
        out.row_color_hex = None;
        return out;
    };
    let values: Vec<&DataValue> = view.table.rows.iter().map(|r| &r[ci]).collect();
    let colors = match enc.data_type {
        FieldType::Nominal => {
            let domain = categorical_domain(enc.scale_domain.as_ref(), &values);
            let range = enc.scale_range.clone().unwrap_or_else(default_palette);
            values
                .iter()
                .map(|v| match domain.iter().position(|d| d == *v) {
                    Some(i) if !v.is_null() => range[i % range.len()].clone(),
                    _ => NULL_COLOR.to_string(),
                })
                .collect()
        }
        FieldType::Quantitative | FieldType::Temporal => {
            let (lo, hi) = match &enc.scale_domain {
                Some(ScaleDomain::Numeric { min, max }) => (*min, *max),
                _ => {
                    let nums: Vec<f64> = values.iter().filter_map(|v| v.as_f64()).collect();
                    let lo = nums.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                }
            };
            let (from, to) = match &enc.scale_range {
                Some(r) if r.len() >= 2 => (r[0].clone(), r[r.len() - 1].clone()),
                _ => (DEFAULT_RAMP[0].to_string(), DEFAULT_RAMP[1].to_string()),
            };
            values
                .iter()
                .map(|v| match v.as_f64() {
                    Some(x) => {
                        let t = if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
                        interpolate_hex(&from, &to, t)
                    }
                    None => NULL_COLOR.to_string(),
                })
                .collect()
        }
    };
    out.row_color_hex = Some(colors);
    out
}

/// Declared domain first, then any undeclared values in ascending order.
pub(crate) fn categorical_domain(declared: Option<&ScaleDomain>, values: &[&DataValue]) -> Vec<DataValue> {
    let mut domain: Vec<DataValue> = match declared {
        Some(ScaleDomain::Categorical(d)) => d.clone(),
        _ => Vec::new(),
    };
    let mut extra: Vec<DataValue> = Vec::new();
    for v in values {
        if !v.is_null() && !domain.contains(v) && !extra.contains(v) {
            extra.push((*v).clone());
        }
    }
    extra.sort_by(|a, b| a.sort_cmp(b));
    domain.extend(extra);
    domain
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::load_chart;
    use std::collections::BTreeSet;
    use std::path::Path;

    fn chart(name: &str) -> (ChartSpec, TransformedView) {
        load_chart(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/charts").join(name)).unwrap()
    }

    #[test]
    fn palette_has_ten_distinct_colors() {
        let p = default_palette();
        assert_eq!(p.len(), 10);
        assert_eq!(p.iter().collect::<BTreeSet<_>>().len(), 10);
    }

    #[test]
    fn two_categories_give_two_colors() {
        let (spec, view) = chart("bar.vl.json");
        let colors = view.row_color_hex.as_ref().unwrap();
        assert_eq!(colors.iter().collect::<BTreeSet<_>>().len(), 2);
        let ci = view.table.column_index("Temporal Polarity").unwrap();
        for (row, c) in view.rows().iter().zip(colors) {
            let want = if row[ci] == DataValue::text("negative") { "#4682b4" } else { "#ff0000" };
            assert_eq!(c, want);
        }
        assert_eq!(resolve_colors(&spec, &view), view);
    }

    #[test]
    fn sequential_ramp_matches_independent_interpolation() {
        let (_, view) = chart("map.vl.json");
        let colors = view.row_color_hex.as_ref().unwrap();
        let ci = view.table.column_index("Percent Vaccinated").unwrap();
        // oracle: per-channel lerp of #e5f5e0 → #006d2c over the declared [0, 100] domain
        let (a, b) = ([0xe5, 0xf5, 0xe0], [0x00, 0x6d, 0x2c]);
        for (row, c) in view.rows().iter().zip(colors) {
            let Some(v) = row[ci].as_f64() else { continue };
            let t = v / 100.0;
            let want: String = std::iter::once("#".to_string())
                .chain((0..3).map(|i| format!("{:02x}", (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8)))
                .collect();
            assert_eq!(c, &want, "value {v}");
        }
        // monotone: the green channel never increases with the value
        let mut pairs: Vec<(f64, u8)> = view
            .rows()
            .iter()
            .zip(colors)
            .filter_map(|(r, c)| Some((r[ci].as_f64()?, u8::from_str_radix(&c[3..5], 16).unwrap())))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        assert!(pairs.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn no_color_encoding_means_no_colors() {
        let (spec, view) = chart("line.vl.json");
        assert!(view.row_color_hex.is_none());
        assert!(resolve_colors(&spec, &view).row_color_hex.is_none());
    }

    #[test]
    fn interpolation_endpoints() {
        assert_eq!(interpolate_hex("#000000", "#ffffff", 0.0), "#000000");
        assert_eq!(interpolate_hex("#000000", "#ffffff", 1.0), "#ffffff");
        assert_eq!(interpolate_hex("#000000", "#ffffff", 2.0), "#ffffff");
        assert_eq!(interpolate_hex("#000000", "#ffffff", 0.5), "#808080");
    }
}
