//! Four-level access tree: chart root, encoding channels, category or range
//! groups, and one leaf per data row.
//!
//! Nodes live in an arena and are addressed by dot-separated, 1-based sibling
//! paths: the root is `1`, its second channel `1.2`, that channel's sixth
//! group `1.2.6`.

use std::collections::HashMap;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bins::{bin_intervals, Interval};
use crate::chart::{Channel, ChartSpec, EncodingChannel, ScaleDomain, Table, TransformedView};
use crate::value::{format_number, format_timestamp, DataValue, Field, FieldType};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("no node at address `{0}`")]
    UnknownAddress(String),
    #[error("node `{0}` is not a group node")]
    NotAGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Root,
    Channel,
    Group,
    Leaf,
}

/// What a group covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Span {
    Category { value: DataValue },
    Range { lo: DataValue, hi: DataValue, closed: bool },
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub address: String,
    pub level: usize,
    pub kind: NodeKind,
    pub label: String,
    pub field: Option<String>,
    pub span: Option<Span>,
    /// Arena ids of the children, in sibling order.
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    /// Rows of the view covered by this node (groups and leaves).
    pub row_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessTree {
    nodes: Vec<TreeNode>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    tree_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTable {
    pub columns: Vec<Field>,
    pub rows: Vec<Vec<DataValue>>,
    pub origin_address: String,
}

impl SnapshotTable {
    pub fn to_view(&self) -> TransformedView {
        TransformedView {
            table: Table {
                columns: self.columns.clone(),
                rows: self.rows.clone(),
            },
            row_color_hex: None,
        }
    }
}

impl AccessTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn id_of(&self, address: &str) -> Option<usize> {
        self.index.get(address.trim()).copied()
    }

    pub fn get(&self, address: &str) -> Option<&TreeNode> {
        self.id_of(address).map(|id| &self.nodes[id])
    }

    /// Full rendering at every level, as used in prompts.
    pub fn tree_text(&self) -> &str {
        &self.tree_text
    }

    /// Deepest level in the tree.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// 1-based position among siblings and the sibling count.
    pub fn sibling_position(&self, id: usize) -> (usize, usize) {
        match self.nodes[id].parent {
            Some(p) => {
                let sibs = &self.nodes[p].children;
                (sibs.iter().position(|&c| c == id).unwrap_or(0) + 1, sibs.len())
            }
            None => (1, 1),
        }
    }

    /// Ids from the root down to `id`, inclusive.
    pub fn ancestry(&self, id: usize) -> Vec<usize> {
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    /// Restores the address index after deserializing.
    pub fn reindex(mut self) -> AccessTree {
        self.index = self.nodes.iter().enumerate().map(|(i, n)| (n.address.clone(), i)).collect();
        self
    }

    /// Builds an unlabeled tree from a parent list: node 0 is the root and
    /// `parents[i - 1]` is the parent of node `i`, which must precede it.
    /// Used for structural tests of navigation.
    pub fn from_parents(parents: &[usize]) -> AccessTree {
        let mut nodes = vec![TreeNode {
            address: "1".into(),
            level: 1,
            kind: NodeKind::Root,
            label: "Root".into(),
            field: None,
            span: None,
            children: Vec::new(),
            parent: None,
            row_indices: Vec::new(),
        }];
        for (i, &p) in parents.iter().enumerate() {
            assert!(p <= i, "parent must precede child");
            let id = i + 1;
            let address = format!("{}.{}", nodes[p].address, nodes[p].children.len() + 1);
            let level = nodes[p].level + 1;
            nodes[p].children.push(id);
            nodes.push(TreeNode {
                label: format!("Node {address}"),
                address,
                level,
                kind: match level {
                    2 => NodeKind::Channel,
                    3 => NodeKind::Group,
                    _ => NodeKind::Leaf,
                },
                field: None,
                span: None,
                children: Vec::new(),
                parent: Some(p),
                row_indices: Vec::new(),
            });
        }
        finish(nodes)
    }
}

fn finish(nodes: Vec<TreeNode>) -> AccessTree {
    let index = nodes.iter().enumerate().map(|(i, n)| (n.address.clone(), i)).collect();
    let mut tree = AccessTree {
        nodes,
        index,
        tree_text: String::new(),
    };
    tree.tree_text = render_tree_text(&tree, usize::MAX);
    tree
}

/// Target bin count for a quantitative channel: 10 for percentage-like
/// fields (all values in [0, 100] and either a declared [0, 100] domain or a
/// name mentioning percent), otherwise 8.
pub fn target_bins(enc: &EncodingChannel, values: &[f64]) -> usize {
    let in_unit = values.iter().all(|v| (0.0..=100.0).contains(v));
    let declared = matches!(enc.scale_domain, Some(ScaleDomain::Numeric { min, max }) if min == 0.0 && max == 100.0);
    let named = {
        let t = format!("{} {}", enc.field, enc.display_title()).to_lowercase();
        t.contains("percent") || t.contains('%')
    };
    if in_unit && (declared || named) {
        10
    } else {
        8
    }
}

struct Group {
    span: Span,
    rows: Vec<usize>,
}

fn group_rows(enc: &EncodingChannel, view: &TransformedView) -> Vec<Group> {
    let Some(ci) = view.table.column_index(&enc.field) else {
        return Vec::new();
    };
    let rows = view.rows();
    if rows.is_empty() {
        return Vec::new();
    }
    let nulls: Vec<usize> = (0..rows.len()).filter(|&r| rows[r][ci].is_null()).collect();
    let mut groups = match enc.data_type {
        FieldType::Nominal => nominal_groups(enc, rows, ci),
        FieldType::Quantitative => quantitative_groups(enc, rows, ci),
        FieldType::Temporal => temporal_groups(rows, ci),
    };
    if !nulls.is_empty() {
        groups.push(Group {
            span: Span::Missing,
            rows: nulls,
        });
    }
    groups
}

fn nominal_groups(enc: &EncodingChannel, rows: &[Vec<DataValue>], ci: usize) -> Vec<Group> {
    let mut seen: Vec<DataValue> = Vec::new();
    for r in rows {
        if !r[ci].is_null() && !seen.contains(&r[ci]) {
            seen.push(r[ci].clone());
        }
    }
    let order: Vec<DataValue> = match &enc.scale_domain {
        Some(ScaleDomain::Categorical(declared)) => {
            let mut extra: Vec<DataValue> = seen.into_iter().filter(|v| !declared.contains(v)).collect();
            extra.sort_by(|a, b| a.sort_cmp(b));
            declared.iter().cloned().chain(extra).collect()
        }
        _ if enc.channel == Channel::Detail => seen,
        _ => {
            seen.sort_by(|a, b| a.sort_cmp(b));
            seen
        }
    };
    let mut by_value: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        if !r[ci].is_null() {
            by_value.entry(value_key(&r[ci])).or_default().push(i);
        }
    }
    order
        .into_iter()
        .map(|v| Group {
            rows: by_value.remove(&value_key(&v)).unwrap_or_default(),
            span: Span::Category { value: v },
        })
        .collect()
}

fn value_key(v: &DataValue) -> String {
    match v {
        DataValue::Number(n) => format!("n{}", n.to_bits()),
        DataValue::Text(s) => format!("s{s}"),
        DataValue::Timestamp(t) => format!("t{t}"),
        DataValue::Null => "null".into(),
    }
}

fn assign(intervals: &[Interval], rows: &[Vec<DataValue>], ci: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); intervals.len()];
    for (i, r) in rows.iter().enumerate() {
        if let Some(v) = r[ci].as_f64() {
            if let Some(b) = intervals.iter().position(|iv| iv.contains(v)) {
                members[b].push(i);
            }
        }
    }
    members
}

fn quantitative_groups(enc: &EncodingChannel, rows: &[Vec<DataValue>], ci: usize) -> Vec<Group> {
    let values: Vec<f64> = rows.iter().filter_map(|r| r[ci].as_f64()).collect();
    let target = target_bins(enc, &values);
    let mut extent = values.clone();
    // a declared domain widens the binned range so increments stay aligned to it
    if let Some(ScaleDomain::Numeric { min, max }) = enc.scale_domain {
        if values.iter().all(|v| (min..=max).contains(v)) {
            extent.extend([min, max]);
        }
    }
    let Ok(intervals) = bin_intervals(&extent, target) else {
        return Vec::new();
    };
    let members = assign(&intervals, rows, ci);
    intervals
        .iter()
        .zip(members)
        .map(|(iv, rows)| Group {
            span: Span::Range {
                lo: DataValue::Number(iv.lo),
                hi: DataValue::Number(iv.hi),
                closed: iv.closed,
            },
            rows,
        })
        .collect()
}

fn temporal_groups(rows: &[Vec<DataValue>], ci: usize) -> Vec<Group> {
    let stamps: Vec<i64> = rows
        .iter()
        .filter_map(|r| match r[ci] {
            DataValue::Timestamp(t) => Some(t),
            _ => None,
        })
        .collect();
    let (Some(&min), Some(&max)) = (stamps.iter().min(), stamps.iter().max()) else {
        return Vec::new();
    };
    let to_date = |ms: i64| DateTime::<Utc>::from_timestamp_millis(ms).map(|d| d.date_naive());
    let (Some(first), Some(last)) = (to_date(min), to_date(max)) else {
        return Vec::new();
    };
    let by_year = (max - min) as f64 > 2.0 * 365.25 * 86_400_000.0;
    let start_of = |d: NaiveDate| {
        if by_year {
            NaiveDate::from_ymd_opt(d.year(), 1, 1)
        } else {
            NaiveDate::from_ymd_opt(d.year(), d.month(), 1)
        }
    };
    let next = |d: NaiveDate| {
        if by_year || d.month() == 12 {
            NaiveDate::from_ymd_opt(d.year() + 1, 1, 1)
        } else {
            NaiveDate::from_ymd_opt(d.year(), d.month() + 1, 1)
        }
    };
    let ms = |d: NaiveDate| d.and_time(chrono::NaiveTime::MIN).and_utc().timestamp_millis();
    let mut bounds = Vec::new();
    let mut cur = start_of(first).expect("valid calendar date");
    while cur <= last {
        let end = next(cur).expect("valid calendar date");
        bounds.push((ms(cur), ms(end)));
        cur = end;
    }
    let mut members = vec![Vec::new(); bounds.len()];
    for (i, r) in rows.iter().enumerate() {
        if let DataValue::Timestamp(t) = r[ci] {
            if let Some(b) = bounds.iter().position(|(lo, hi)| t >= *lo && t < *hi) {
                members[b].push(i);
            }
        }
    }
    bounds
        .into_iter()
        .zip(members)
        .map(|((lo, hi), rows)| Group {
            span: Span::Range {
                lo: DataValue::Timestamp(lo),
                hi: DataValue::Timestamp(hi),
                closed: false,
            },
            rows,
        })
        .collect()
}

fn span_text(v: &DataValue) -> String {
    match v {
        DataValue::Number(n) => format_number(*n),
        DataValue::Timestamp(t) => format_timestamp(*t),
        other => other.to_string(),
    }
}

/// The predicate part of a group label, e.g. `Country equals Haiti` or
/// `Inventory is between 1400000 and 1600000`.
pub fn group_predicate(field: &str, span: &Span) -> String {
    match span {
        Span::Category { value } => format!("{field} equals {}", span_text(value)),
        Span::Range { lo, hi, .. } => format!("{field} is between {} and {}", span_text(lo), span_text(hi)),
        Span::Missing => format!("{field} has no value"),
    }
}

fn count_phrase(k: usize) -> String {
    if k == 1 {
        "1 value".to_string()
    } else {
        format!("{k} values")
    }
}

/// Screen-reader text for a node, given its 1-based sibling index and the
/// number of siblings. Root and channel labels depend only on the node.
pub fn render_node_label(node: &TreeNode, index: usize, sibling_count: usize) -> String {
    match node.kind {
        NodeKind::Group => match (&node.field, &node.span) {
            (Some(field), Some(span)) => format!(
                "{index} of {sibling_count}. {}. {}. Press t to open table.",
                group_predicate(field, span),
                count_phrase(node.row_indices.len())
            ),
            _ => node.label.clone(),
        },
        _ => node.label.clone(),
    }
}

fn root_label(spec: &ChartSpec) -> String {
    let mut parts = vec![format!("A {}.", spec.kind.noun())];
    let axes: Vec<&str> = [Channel::X, Channel::Y]
        .iter()
        .filter_map(|c| spec.encoding(*c))
        .map(EncodingChannel::display_title)
        .collect();
    match axes.as_slice() {
        [a, b] => parts.push(format!("With axes {a} and {b}")),
        [a] => parts.push(format!("With axis {a}")),
        _ => {}
    }
    if let Some(c) = spec.encoding(Channel::Color) {
        parts.push(format!("With a legend for {}", c.display_title()));
    }
    if let Some(d) = spec.encoding(Channel::Detail) {
        parts.push(format!("With detail {}", d.display_title()));
    }
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        if !out.ends_with('.') {
            out.push('.');
        }
        out.push(' ');
        out.push_str(p);
    }
    out
}

fn channel_label(enc: &EncodingChannel, groups: usize) -> String {
    let name = match enc.channel {
        Channel::X => "X-axis",
        Channel::Y => "Y-axis",
        Channel::Color => "Legend",
        Channel::Detail => "Detail channel",
    };
    let unit = if groups == 1 { "group" } else { "groups" };
    format!("{name} titled {}, field {}. {groups} {unit}.", enc.display_title(), enc.field)
}

fn leaf_label(spec: &ChartSpec, view: &TransformedView, row: usize, index: usize, count: usize) -> String {
    let mut fields: Vec<&str> = Vec::new();
    for e in &spec.encodings {
        if !fields.contains(&e.field.as_str()) {
            fields.push(&e.field);
        }
    }
    let mut out = format!("{index} of {count}.");
    for f in fields {
        if let Some(ci) = view.table.column_index(f) {
            let v = &view.rows()[row][ci];
            let text = if v.is_null() { "no value".to_string() } else { span_text(v) };
            out.push_str(&format!(" {f}: {text}."));
        }
    }
    out
}

/// Compiles the access tree for a chart and its materialized view.
pub fn build_tree(spec: &ChartSpec, view: &TransformedView) -> AccessTree {
    let mut nodes = vec![TreeNode {
        address: "1".into(),
        level: 1,
        kind: NodeKind::Root,
        label: root_label(spec),
        field: None,
        span: None,
        children: Vec::new(),
        parent: None,
        row_indices: (0..view.len()).collect(),
    }];
    let mut channels: Vec<&EncodingChannel> = spec.encodings.iter().collect();
    channels.sort_by_key(|e| e.channel);
    for enc in channels {
        let groups = group_rows(enc, view);
        let ch_id = nodes.len();
        let ch_addr = format!("1.{}", nodes[0].children.len() + 1);
        nodes[0].children.push(ch_id);
        nodes.push(TreeNode {
            address: ch_addr.clone(),
            level: 2,
            kind: NodeKind::Channel,
            label: channel_label(enc, groups.len()),
            field: Some(enc.field.clone()),
            span: None,
            children: Vec::new(),
            parent: Some(0),
            row_indices: (0..view.len()).collect(),
        });
        let n = groups.len();
        for (gi, g) in groups.into_iter().enumerate() {
            let g_id = nodes.len();
            let g_addr = format!("{ch_addr}.{}", gi + 1);
            nodes[ch_id].children.push(g_id);
            let mut node = TreeNode {
                address: g_addr.clone(),
                level: 3,
                kind: NodeKind::Group,
                label: String::new(),
                field: Some(enc.field.clone()),
                span: Some(g.span),
                children: Vec::new(),
                parent: Some(ch_id),
                row_indices: g.rows.clone(),
            };
            node.label = render_node_label(&node, gi + 1, n);
            nodes.push(node);
            let k = g.rows.len();
            for (li, &row) in g.rows.iter().enumerate() {
                let l_id = nodes.len();
                nodes[g_id].children.push(l_id);
                nodes.push(TreeNode {
                    address: format!("{g_addr}.{}", li + 1),
                    level: 4,
                    kind: NodeKind::Leaf,
                    label: leaf_label(spec, view, row, li + 1, k),
                    field: None,
                    span: None,
                    children: Vec::new(),
                    parent: Some(g_id),
                    row_indices: vec![row],
                });
            }
        }
    }
    finish(nodes)
}

/// Depth-first rendering; each line is the address, indentation by level,
/// then the label. Nodes deeper than `max_level` are omitted.
pub fn render_tree_text(tree: &AccessTree, max_level: usize) -> String {
    let mut out = String::new();
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let node = &tree.nodes[id];
        if node.level > max_level {
            continue;
        }
        out.push_str(&node.address);
        out.push(' ');
        for _ in 1..node.level {
            out.push_str("  ");
        }
        out.push_str(&node.label);
        out.push('\n');
        stack.extend(node.children.iter().rev());
    }
    out
}

/// The rows under a group node.
pub fn snapshot_table(tree: &AccessTree, address: &str, view: &TransformedView) -> Result<SnapshotTable, TreeError> {
    let node = tree.get(address).ok_or_else(|| TreeError::UnknownAddress(address.to_string()))?;
    if node.kind != NodeKind::Group {
        return Err(TreeError::NotAGroup(address.to_string()));
    }
    Ok(SnapshotTable {
        columns: view.columns().to_vec(),
        rows: node.row_indices.iter().map(|&r| view.rows()[r].clone()).collect(),
        origin_address: node.address.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{load_chart, parse_chart_spec, DataRef};
    use std::path::Path;

    fn chart(name: &str) -> (ChartSpec, TransformedView, AccessTree) {
        let (spec, view) = load_chart(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/charts").join(name)).unwrap();
        let tree = build_tree(&spec, &view);
        (spec, view, tree)
    }

    #[test]
    fn haiti_group_label() {
        let (_, _, tree) = chart("map.vl.json");
        let detail = tree.get("1.2").unwrap();
        assert_eq!(detail.children.len(), 180);
        assert_eq!(tree.get("1.2.3").unwrap().label, "3 of 180. Country equals Haiti. 1 value. Press t to open table.");
        assert_eq!(tree.get("1.2.1").unwrap().label, "1 of 180. Country equals Guam. 1 value. Press t to open table.");
    }

    #[test]
    fn map_legend_uses_ten_percent_steps() {
        let (_, view, tree) = chart("map.vl.json");
        let legend = tree.get("1.1").unwrap();
        assert_eq!(legend.children.len(), 10);
        let second = tree.node(legend.children[1]);
        assert!(second.label.starts_with("2 of 10. Percent Vaccinated is between 10 and 20."), "{}", second.label);
        // predicate-filter oracle
        let ci = view.table.column_index("Percent Vaccinated").unwrap();
        let want: Vec<usize> = (0..view.len())
            .filter(|&r| view.rows()[r][ci].as_f64().is_some_and(|v| (10.0..20.0).contains(&v)))
            .collect();
        assert_eq!(second.row_indices, want);
        let snap = snapshot_table(&tree, &second.address, &view).unwrap();
        assert_eq!(snap.rows.len(), want.len());
    }

    #[test]
    fn line_chart_root_and_inventory_range() {
        let (_, _, tree) = chart("line.vl.json");
        assert_eq!(tree.root().label, "A line chart. With axes Date and Number of Homes for Sale");
        let g = tree.get("1.2.6").unwrap();
        assert!(g.label.contains("Inventory is between 1400000 and 1600000"), "{}", g.label);
        assert_eq!(tree.get("1.2").unwrap().children.len(), 6);
        assert!(tree.get("1.1.1").unwrap().label.contains("Date is between 2017-01-01 and 2018-01-01"));
    }

    #[test]
    fn every_fixture_has_four_levels() {
        for f in ["bar.vl.json", "line.vl.json", "scatter.vl.json", "map.vl.json"] {
            let (_, _, tree) = chart(f);
            assert_eq!(tree.depth(), 4, "{f}");
        }
    }

    #[test]
    fn addresses_are_a_bijection_and_groups_partition() {
        for f in ["bar.vl.json", "line.vl.json", "scatter.vl.json", "map.vl.json"] {
            let (_, view, tree) = chart(f);
            for (id, n) in tree.nodes().iter().enumerate() {
                assert_eq!(tree.id_of(&n.address), Some(id));
                assert_eq!(n.level, n.address.split('.').count());
                for (i, &c) in n.children.iter().enumerate() {
                    assert_eq!(tree.node(c).address, format!("{}.{}", n.address, i + 1));
                }
            }
            for &ch in &tree.root().children {
                let mut seen = vec![0usize; view.len()];
                for &g in &tree.node(ch).children {
                    for &r in &tree.node(g).row_indices {
                        seen[r] += 1;
                    }
                }
                assert!(seen.iter().all(|&c| c == 1), "{f} channel {}", tree.node(ch).address);
            }
        }
    }

    #[test]
    fn tree_text_lines() {
        let (_, _, tree) = chart("bar.vl.json");
        assert_eq!(render_tree_text(&tree, 1).lines().count(), 1);
        let full = render_tree_text(&tree, 4);
        assert_eq!(full.lines().count(), tree.len());
        let addrs: Vec<&str> = tree.nodes().iter().map(|n| n.address.as_str()).collect();
        for line in full.lines() {
            let first = line.split(' ').next().unwrap();
            assert!(addrs.contains(&first), "{line}");
        }
        assert_eq!(full, tree.tree_text());
    }

    #[test]
    fn single_row_gives_one_group() {
        let spec = parse_chart_spec(
            r#"{"data": {"values": [{"k": "only"}]}, "mark": "bar", "encoding": {"x": {"field": "k", "type": "nominal"}}}"#,
        )
        .unwrap();
        let DataRef::Inline(t) = &spec.data else { unreachable!() };
        let view = crate::chart::materialize_view(&spec, t).unwrap();
        let tree = build_tree(&spec, &view);
        let ch = tree.get("1.1").unwrap();
        assert_eq!(ch.children.len(), 1);
        assert_eq!(tree.get("1.1.1").unwrap().label, "1 of 1. k equals only. 1 value. Press t to open table.");
    }

    #[test]
    fn empty_view_has_only_root_and_channels() {
        let spec = parse_chart_spec(
            r#"{"data": {"values": [{"k": "a", "v": 1}]}, "mark": "bar",
                "transform": [{"filter": "datum.v > 5"}],
                "encoding": {"x": {"field": "k", "type": "nominal"}, "y": {"field": "v", "type": "quantitative"}}}"#,
        )
        .unwrap();
        let DataRef::Inline(t) = &spec.data else { unreachable!() };
        let view = crate::chart::materialize_view(&spec, t).unwrap();
        let tree = build_tree(&spec, &view);
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.get("1.1").unwrap().label, "X-axis titled k, field k. 0 groups.");
    }

    #[test]
    fn snapshot_rejects_non_groups() {
        let (_, view, tree) = chart("map.vl.json");
        assert_eq!(snapshot_table(&tree, "1", &view), Err(TreeError::NotAGroup("1".into())));
        assert_eq!(snapshot_table(&tree, "9.9", &view), Err(TreeError::UnknownAddress("9.9".into())));
        let haiti = snapshot_table(&tree, "1.2.3", &view).unwrap();
        assert_eq!(haiti.rows.len(), 1);
        assert_eq!(haiti.rows[0][0], DataValue::text("Haiti"));
    }

    #[test]
    fn nulls_get_a_trailing_group() {
        let spec = parse_chart_spec(
            r#"{"data": {"values": [{"k": "a", "v": 1}, {"k": "b", "v": null}, {"k": null, "v": 3}]}, "mark": "bar",
                "encoding": {"x": {"field": "k", "type": "nominal"}, "y": {"field": "v", "type": "quantitative"}}}"#,
        )
        .unwrap();
        let DataRef::Inline(t) = &spec.data else { unreachable!() };
        let view = crate::chart::materialize_view(&spec, t).unwrap();
        let tree = build_tree(&spec, &view);
        let x = tree.get("1.1").unwrap();
        let last = tree.node(*x.children.last().unwrap());
        assert_eq!(last.label, "3 of 3. k has no value. 1 value. Press t to open table.");
    }
}
