//! Partial results shared by both twig evaluators.
//!
//! A row covers the output nodes of one query subtree, laid out in preorder:
//! `key` holds the labels of mandatory outputs, `groups` the witness sets of
//! optional outputs. A row set is *normalized* when it is sorted by key, keys
//! are unique, and every group is sorted and duplicate-free.

use crate::labeling::NodeLabel;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Row {
    pub key: Vec<NodeLabel>,
    pub groups: Vec<Vec<NodeLabel>>,
}

impl Row {
    pub fn empty(groups: usize) -> Self {
        Row {
            key: Vec::new(),
            groups: vec![Vec::new(); groups],
        }
    }

    /// Items this row contributes under count().
    pub fn items(&self) -> u64 {
        (self.key.len() + self.groups.iter().map(Vec::len).sum::<usize>()) as u64
    }
}

pub type Rows = Vec<Row>;

fn merge_sorted(a: &mut Vec<NodeLabel>, b: &[NodeLabel]) {
    if b.is_empty() {
        return;
    }
    if a.is_empty() {
        a.extend_from_slice(b);
        return;
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    *a = out;
}

/// Union of normalized row sets: equal keys merge their groups.
pub fn union<'a>(parts: impl IntoIterator<Item = &'a [Row]>) -> Rows {
    let mut parts = parts.into_iter();
    let Some(first) = parts.next() else {
        return Vec::new();
    };
    let mut all: Rows = first.to_vec();
    let mut single = true;
    for p in parts {
        single = false;
        all.extend_from_slice(p);
    }
    if single {
        return all;
    }
    all.sort_by(|a, b| a.key.cmp(&b.key));
    let mut out: Rows = Vec::with_capacity(all.len());
    for row in all {
        match out.last_mut() {
            Some(last) if last.key == row.key => {
                for (g, h) in last.groups.iter_mut().zip(&row.groups) {
                    merge_sorted(g, h);
                }
            }
            _ => out.push(row),
        }
    }
    out
}

/// Cartesian product of two normalized row sets over disjoint layouts.
pub fn product(a: &[Row], b: &[Row]) -> Rows {
    if b.len() == 1 && b[0].key.is_empty() && b[0].groups.is_empty() {
        return a.to_vec();
    }
    if a.len() == 1 && a[0].key.is_empty() && a[0].groups.is_empty() {
        return b.to_vec();
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let mut key = Vec::with_capacity(x.key.len() + y.key.len());
            key.extend_from_slice(&x.key);
            key.extend_from_slice(&y.key);
            let mut groups = Vec::with_capacity(x.groups.len() + y.groups.len());
            groups.extend(x.groups.iter().cloned());
            groups.extend(y.groups.iter().cloned());
            out.push(Row { key, groups });
        }
    }
    out
}

pub fn count(rows: &[Row]) -> u64 {
    rows.iter().map(Row::items).sum()
}
