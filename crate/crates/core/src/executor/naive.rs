//! Reference evaluator: interprets the query AST by navigating each
//! document's tree, rebuilt from a scan of the document index.
//!
//! It shares nothing with the twig evaluators except the value comparison
//! rule, so it serves as their oracle.

use std::collections::{BTreeMap, BTreeSet};

use super::{Binding, EvalOptions, IoStats, MatchTuple, ResultSummary, Result, Ticker};
use crate::frontend::ast::{Binding as Clause, BindingKind, Body, Condition, PathBase, PathExpr, QueryAst};
use crate::labeling::{NodeKind, NodeLabel};
use crate::query::{Axis, NameTest, ValuePredicate};
use crate::storage::Collection;

const DOC: usize = usize::MAX;

struct Node {
    label: NodeLabel,
    name: String,
    kind: NodeKind,
    value: Option<String>,
    children: Vec<usize>,
    /// index of the last node of this subtree
    last: usize,
}

struct Doc {
    nodes: Vec<Node>,
}

impl Doc {
    fn load(coll: &Collection, doc_id: u32) -> Result<Doc> {
        let records = coll.doc_scan(doc_id)?;
        let mut nodes: Vec<Node> = Vec::with_capacity(records.len());
        let mut open: Vec<usize> = Vec::new();
        for r in records {
            while open.last().is_some_and(|&o| nodes[o].label.end < r.label.start) {
                open.pop();
            }
            let value = match r.kind {
                NodeKind::Element => None,
                _ => r.value_ref.map(|at| coll.value(at)).transpose()?,
            };
            let idx = nodes.len();
            nodes.push(Node {
                label: r.label,
                name: coll.names().name(r.name_id).unwrap_or_default().to_owned(),
                kind: r.kind,
                value,
                children: Vec::new(),
                last: idx,
            });
            if let Some(&p) = open.last() {
                nodes[p].children.push(idx);
            }
            if r.kind == NodeKind::Element {
                open.push(idx);
            }
        }
        for i in (0..nodes.len()).rev() {
            if let Some(&c) = nodes[i].children.last() {
                nodes[i].last = nodes[c].last;
            }
        }
        // element value: its direct text children, concatenated
        for i in 0..nodes.len() {
            if nodes[i].kind != NodeKind::Element {
                continue;
            }
            let texts: Vec<&str> = nodes[i]
                .children
                .iter()
                .filter(|&&c| nodes[c].kind == NodeKind::Text)
                .filter_map(|&c| nodes[c].value.as_deref())
                .collect();
            if !texts.is_empty() {
                nodes[i].value = Some(texts.concat());
            }
        }
        Ok(Doc { nodes })
    }

    fn matches(&self, n: usize, test: &NameTest) -> bool {
        let node = &self.nodes[n];
        match test {
            NameTest::Name(name) => node.name == *name,
            NameTest::Wildcard => node.kind == NodeKind::Element,
        }
    }

    fn candidates(&self, from: usize, axis: Axis) -> Vec<usize> {
        if self.nodes.is_empty() {
            return Vec::new();
        }
        match (from, axis) {
            (DOC, Axis::Pc) => vec![0],
            (DOC, Axis::Ad) => (0..self.nodes.len()).collect(),
            (n, Axis::Pc) => self.nodes[n].children.clone(),
            (n, Axis::Ad) => (n + 1..=self.nodes[n].last).collect(),
        }
    }
}

#[derive(Clone)]
enum Val {
    One(usize),
    Seq(Vec<usize>),
}

struct Interp<'a> {
    doc: &'a Doc,
    ticker: &'a mut Ticker,
}

impl Interp<'_> {
    fn path(&mut self, p: &PathExpr, env: &[(String, Val)], ctx: Option<usize>) -> Result<Vec<usize>> {
        let mut cur: Vec<usize> = match &p.base {
            PathBase::Document => vec![DOC],
            PathBase::Context => vec![ctx.expect("context item inside a predicate")],
            PathBase::Var(v) => match &env.iter().rev().find(|(n, _)| n == v).expect("bound variable").1 {
                Val::One(n) => vec![*n],
                Val::Seq(s) => s.clone(),
            },
        };
        for step in &p.steps {
            let mut next = Vec::new();
            for &n in &cur {
                for c in self.doc.candidates(n, step.axis) {
                    self.ticker.tick()?;
                    if !self.doc.matches(c, &step.test) {
                        continue;
                    }
                    let mut keep = true;
                    for cond in &step.predicates {
                        if !self.condition(cond, env, Some(c))? {
                            keep = false;
                            break;
                        }
                    }
                    if keep {
                        next.push(c);
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            cur = next;
        }
        cur.retain(|&n| n != DOC);
        Ok(cur)
    }

    fn condition(&mut self, c: &Condition, env: &[(String, Val)], ctx: Option<usize>) -> Result<bool> {
        Ok(match c {
            Condition::Exists(p) => !self.path(p, env, ctx)?.is_empty(),
            Condition::Compare { path, op, literal } => {
                let pred = ValuePredicate::new(*op, literal.clone());
                self.path(path, env, ctx)?
                    .iter()
                    .any(|&n| self.doc.nodes[n].value.as_deref().is_some_and(|v| pred.matches(v)))
            }
        })
    }
}

struct Flat<'a> {
    clauses: &'a [Clause],
    conditions: &'a [Condition],
    /// returned for variables, then returned let variables, by binding position
    key_vars: Vec<&'a str>,
    group_vars: Vec<&'a str>,
    groups: BTreeMap<Vec<NodeLabel>, Vec<BTreeSet<NodeLabel>>>,
}

impl Flat<'_> {
    fn bind(&mut self, it: &mut Interp<'_>, i: usize, env: &mut Vec<(String, Val)>) -> Result<()> {
        if i == self.clauses.len() {
            for c in self.conditions {
                if !it.condition(c, env, None)? {
                    return Ok(());
                }
            }
            let lookup = |v: &str| &env.iter().rev().find(|(n, _)| n == v).unwrap().1;
            let key: Vec<NodeLabel> = self
                .key_vars
                .iter()
                .map(|v| match lookup(v) {
                    Val::One(n) => it.doc.nodes[*n].label,
                    Val::Seq(_) => unreachable!("for variables bind single nodes"),
                })
                .collect();
            let entry = self
                .groups
                .entry(key)
                .or_insert_with(|| vec![BTreeSet::new(); self.group_vars.len()]);
            for (slot, v) in self.group_vars.iter().enumerate() {
                if let Val::Seq(s) = lookup(v) {
                    entry[slot].extend(s.iter().map(|&n| it.doc.nodes[n].label));
                }
            }
            return Ok(());
        }
        let b = &self.clauses[i];
        let nodes = it.path(&b.path, env, None)?;
        match b.kind {
            BindingKind::For => {
                for n in nodes {
                    env.push((b.var.clone(), Val::One(n)));
                    let r = self.bind(it, i + 1, env);
                    env.pop();
                    r?;
                }
            }
            BindingKind::Let => {
                env.push((b.var.clone(), Val::Seq(nodes)));
                let r = self.bind(it, i + 1, env);
                env.pop();
                r?;
            }
        }
        Ok(())
    }
}

pub fn eval_naive(coll: &Collection, ast: &QueryAst, opts: EvalOptions) -> Result<ResultSummary> {
    let mut ticker = Ticker::new(opts.deadline);
    let mut records = 0u64;
    let mut tuples: Vec<MatchTuple> = Vec::new();
    match &ast.body {
        Body::Path(p) => {
            for d in coll.documents() {
                let doc = Doc::load(coll, d.doc_id)?;
                records += doc.nodes.len() as u64;
                let mut it = Interp {
                    doc: &doc,
                    ticker: &mut ticker,
                };
                for n in it.path(p, &[], None)? {
                    tuples.push(vec![Binding::Node(doc.nodes[n].label)]);
                }
            }
        }
        Body::Flwor(f) => {
            let position = |v: &str| f.bindings.iter().position(|b| b.var == v).unwrap();
            let mut returned: Vec<&str> = f.returns.iter().map(String::as_str).collect();
            returned.sort_by_key(|v| position(v));
            let kind = |v: &str| f.bindings[position(v)].kind;
            let mut flat = Flat {
                clauses: &f.bindings,
                conditions: &f.conditions,
                key_vars: returned.iter().copied().filter(|v| kind(v) == BindingKind::For).collect(),
                group_vars: returned.iter().copied().filter(|v| kind(v) == BindingKind::Let).collect(),
                groups: BTreeMap::new(),
            };
            for d in coll.documents() {
                let doc = Doc::load(coll, d.doc_id)?;
                records += doc.nodes.len() as u64;
                let mut it = Interp {
                    doc: &doc,
                    ticker: &mut ticker,
                };
                flat.bind(&mut it, 0, &mut Vec::new())?;
            }
            for (key, groups) in std::mem::take(&mut flat.groups) {
                let (mut k, mut g) = (key.into_iter(), groups.into_iter());
                tuples.push(
                    returned
                        .iter()
                        .map(|v| match kind(v) {
                            BindingKind::For => Binding::Node(k.next().unwrap()),
                            BindingKind::Let => Binding::Group(g.next().unwrap().into_iter().collect()),
                        })
                        .collect(),
                );
            }
        }
    }
    tuples.sort();
    let count = tuples.iter().flatten().map(Binding::items).sum();
    Ok(ResultSummary {
        count,
        tuples: opts.materialize.then_some(tuples),
        io: IoStats {
            records_scanned: records,
            joins_ordered: true,
            ..Default::default()
        },
    })
}
