//! Fully pipelined plans of binary structural joins.
//!
//! Each query node's children are joined one after another onto the node's
//! scan; the inner input of every join is the complete subplan of the child.
//! Every join emits its output ordered by the ancestor side, which is exactly
//! the order its consumer needs, so no operator ever sorts.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::rc::Rc;

use super::partial::{self, Rows};
use super::{summarize, EvalOptions, ExecError, IoStats, Layout, ResultSummary, Result, Ticker};
use crate::labeling::NodeLabel;
use crate::query::{Axis, Edge, NameTest, QueryNodeId, Tpq};
use crate::storage::{BoxedStream, StreamStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderTag {
    Ancestor,
    Descendant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructJoin {
    /// 1-based rank of the edge in depth-first order
    pub id: usize,
    pub edge: Edge,
    pub order: OrderTag,
    pub outer: PlanNode,
    pub inner: PlanNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanNode {
    Scan(QueryNodeId),
    Join(Box<StructJoin>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinPlan {
    pub tpq: Tpq,
    pub root: PlanNode,
    /// Query nodes whose bindings reach the top of the plan.
    pub survivors: Vec<QueryNodeId>,
}

fn build(tpq: &Tpq, q: QueryNodeId, rank: &[usize]) -> PlanNode {
    let mut node = PlanNode::Scan(q);
    for e in tpq.child_edges(q) {
        node = PlanNode::Join(Box::new(StructJoin {
            id: rank[e.child],
            edge: e,
            order: OrderTag::Ancestor,
            outer: node,
            inner: build(tpq, e.child, rank),
        }));
    }
    node
}

pub fn plan_binary(tpq: &Tpq) -> Result<JoinPlan> {
    tpq.validate()?;
    let mut rank = vec![0; tpq.len()];
    for (i, e) in tpq.dfs_edges().iter().enumerate() {
        rank[e.child] = i + 1;
    }
    Ok(JoinPlan {
        tpq: tpq.clone(),
        root: build(tpq, tpq.root, &rank),
        survivors: tpq.output_nodes(),
    })
}

impl JoinPlan {
    /// Joins in id order.
    pub fn joins(&self) -> Vec<&StructJoin> {
        fn walk<'a>(n: &'a PlanNode, out: &mut Vec<&'a StructJoin>) {
            if let PlanNode::Join(j) = n {
                out.push(j);
                walk(&j.outer, out);
                walk(&j.inner, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out.sort_by_key(|j| j.id);
        out
    }

    fn name(&self, q: QueryNodeId) -> String {
        self.tpq.node(q).name_test.to_string()
    }

    fn scan_source(&self, q: QueryNodeId) -> String {
        let node = self.tpq.node(q);
        let name = match &node.name_test {
            NameTest::Name(n) => n.clone(),
            NameTest::Wildcard => "*".into(),
        };
        let mut s = match &node.value_pred {
            Some(p) => format!("value({name} {} {})", p.op.symbol(), p.literal),
            None => format!("partition({name})"),
        };
        if q == self.tpq.root && self.tpq.anchored {
            s.push_str(" level=0");
        }
        s
    }

    fn render_node(&self, n: &PlanNode, indent: usize, role: &str, out: &mut String) {
        let pad = "  ".repeat(indent);
        match n {
            PlanNode::Scan(q) => {
                let _ = writeln!(out, "{pad}{role}Scan #{q} {} <- {}", self.name(*q), self.scan_source(*q));
            }
            PlanNode::Join(j) => {
                let order = match j.order {
                    OrderTag::Ancestor => format!("ancestor {}", self.name(j.edge.parent)),
                    OrderTag::Descendant => format!("descendant {}", self.name(j.edge.child)),
                };
                let _ = writeln!(
                    out,
                    "{pad}{role}StructJoin J{} {}{}{} [{}] order={order}",
                    j.id,
                    self.name(j.edge.parent),
                    j.edge.axis.symbol(),
                    self.name(j.edge.child),
                    j.edge.axis,
                );
                self.render_node(&j.outer, indent + 1, "outer: ", out);
                self.render_node(&j.inner, indent + 1, "inner: ", out);
            }
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = self.survivors.iter().map(|&q| format!("#{q} {}", self.name(q))).collect();
        let _ = writeln!(out, "outputs: {}", names.join(", "));
        self.render_node(&self.root, 0, "", &mut out);
        out
    }
}

type Item = (NodeLabel, Rows);

struct Entry {
    label: NodeLabel,
    rows: Rows,
    contribs: Vec<Rc<Rows>>,
    /// finished outputs of entries nested inside this one, in document order
    inherit: Vec<Item>,
}

struct JoinOp {
    axis: Axis,
    child: QueryNodeId,
    outer: Op,
    inner: Op,
    outer_head: Option<Item>,
    inner_head: Option<(NodeLabel, Rc<Rows>)>,
    outer_done: bool,
    inner_done: bool,
    stack: Vec<Entry>,
    out: VecDeque<Item>,
    last: Option<NodeLabel>,
    ordered: bool,
}

struct ScanOp {
    q: QueryNodeId,
    stream: BoxedStream,
}

enum Op {
    Scan(ScanOp),
    Join(Box<JoinOp>),
}

fn expired(f: &NodeLabel, next: &NodeLabel) -> bool {
    f.doc_id < next.doc_id || (f.doc_id == next.doc_id && f.end < next.start)
}

impl Op {
    fn next(&mut self, layout: &Layout, ticker: &mut Ticker) -> Result<Option<Item>> {
        match self {
            Op::Scan(s) => {
                let Some(h) = s.stream.head() else { return Ok(None) };
                s.stream.advance()?;
                Ok(Some((h, layout.own_rows(s.q, h))))
            }
            Op::Join(j) => j.next(layout, ticker),
        }
    }

    fn collect_stats(&self, out: &mut [StreamStats], ordered: &mut bool) {
        match self {
            Op::Scan(s) => out[s.q] = s.stream.stats(),
            Op::Join(j) => {
                *ordered &= j.ordered;
                j.outer.collect_stats(out, ordered);
                j.inner.collect_stats(out, ordered);
            }
        }
    }
}

impl JoinOp {
    fn pop_entry(&mut self, layout: &Layout) {
        let e = self.stack.pop().expect("non-empty stack");
        let mut list = Vec::with_capacity(1 + e.inherit.len());
        let u = if e.contribs.is_empty() {
            layout.optional[self.child].then(|| layout.absent(self.child))
        } else {
            Some(partial::union(e.contribs.iter().map(|r| r.as_slice())))
        };
        if let Some(u) = u {
            let rows = partial::product(&e.rows, &u);
            if !rows.is_empty() {
                list.push((e.label, rows));
            }
        }
        list.extend(e.inherit);
        match self.stack.last_mut() {
            Some(top) => top.inherit.extend(list),
            None => self.out.extend(list),
        }
    }

    fn pop_until(&mut self, next: Option<&NodeLabel>, layout: &Layout) {
        while let Some(top) = self.stack.last() {
            if next.is_some_and(|n| !expired(&top.label, n)) {
                break;
            }
            self.pop_entry(layout);
        }
    }

    fn next(&mut self, layout: &Layout, ticker: &mut Ticker) -> Result<Option<Item>> {
        loop {
            if let Some(item) = self.out.pop_front() {
                if self.last.is_some_and(|l| l >= item.0) {
                    self.ordered = false;
                }
                self.last = Some(item.0);
                return Ok(Some(item));
            }
            ticker.tick()?;
            if self.outer_head.is_none() && !self.outer_done {
                self.outer_head = self.outer.next(layout, ticker)?;
                self.outer_done = self.outer_head.is_none();
            }
            if self.outer_done && self.stack.is_empty() {
                return Ok(None);
            }
            if self.inner_head.is_none() && !self.inner_done {
                self.inner_head = self.inner.next(layout, ticker)?.map(|(l, r)| (l, Rc::new(r)));
                self.inner_done = self.inner_head.is_none();
            }
            let take_outer = match (&self.outer_head, &self.inner_head) {
                (Some(o), Some(i)) => o.0 <= i.0,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => {
                    self.pop_until(None, layout);
                    continue;
                }
            };
            if take_outer {
                let (label, rows) = self.outer_head.take().unwrap();
                self.pop_until(Some(&label), layout);
                self.stack.push(Entry {
                    label,
                    rows,
                    contribs: Vec::new(),
                    inherit: Vec::new(),
                });
            } else {
                let (label, rows) = self.inner_head.take().unwrap();
                self.pop_until(Some(&label), layout);
                match self.axis {
                    Axis::Ad => {
                        for e in self.stack.iter_mut() {
                            if e.label.is_ancestor_of(&label) {
                                e.contribs.push(Rc::clone(&rows));
                            }
                        }
                    }
                    Axis::Pc => {
                        if let Some(e) = self.stack.iter_mut().rev().find(|e| e.label.is_parent_of(&label)) {
                            e.contribs.push(rows);
                        }
                    }
                }
            }
        }
    }
}

fn instantiate(n: &PlanNode, streams: &mut [Option<BoxedStream>]) -> Op {
    match n {
        PlanNode::Scan(q) => Op::Scan(ScanOp {
            q: *q,
            stream: streams[*q].take().expect("each query node is scanned once"),
        }),
        PlanNode::Join(j) => Op::Join(Box::new(JoinOp {
            axis: j.edge.axis,
            child: j.edge.child,
            outer: instantiate(&j.outer, streams),
            inner: instantiate(&j.inner, streams),
            outer_head: None,
            inner_head: None,
            outer_done: false,
            inner_done: false,
            stack: Vec::new(),
            out: VecDeque::new(),
            last: None,
            ordered: true,
        })),
    }
}

pub fn eval_binary(plan: &JoinPlan, streams: Vec<BoxedStream>, opts: EvalOptions) -> Result<ResultSummary> {
    if streams.len() != plan.tpq.len() {
        return Err(ExecError::InvalidTpq(crate::query::TpqError::InvalidTpq(
            "stream count does not match the plan".into(),
        )));
    }
    let layout = Layout::new(&plan.tpq);
    let mut slots: Vec<Option<BoxedStream>> = streams.into_iter().map(Some).collect();
    let mut root = instantiate(&plan.root, &mut slots);
    let mut ticker = Ticker::new(opts.deadline);
    let mut parts: Vec<Rows> = Vec::new();
    let mut last: Option<NodeLabel> = None;
    let mut ordered = true;
    while let Some((label, rows)) = root.next(&layout, &mut ticker)? {
        ordered &= last.is_none_or(|l| l < label);
        last = Some(label);
        parts.push(rows);
    }
    let rows = partial::union(parts.iter().map(|r| r.as_slice()));
    let mut stats = vec![StreamStats::default(); plan.tpq.len()];
    root.collect_stats(&mut stats, &mut ordered);
    let io = IoStats {
        streams: stats,
        peak_stack_frames: 0,
        joins_ordered: ordered,
        records_scanned: 0,
    };
    Ok(summarize(&layout, &rows, &opts, io))
}
