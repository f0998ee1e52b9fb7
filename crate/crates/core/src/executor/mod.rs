//! Twig evaluation: holistic stack join, pipelined binary structural joins,
//! and a navigational reference evaluator.

mod binary;
mod holistic;
mod naive;
pub mod partial;

use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::frontend::{DetectionResult, QueryAst};
use crate::labeling::NodeLabel;
use crate::query::{Axis, NameTest, QueryNodeId, Tpq, TpqError};
use crate::storage::stream::FilterStream;
use crate::storage::{BoxedStream, Collection, StorageError, StreamStats};
use partial::Row;

pub use binary::{eval_binary, plan_binary, JoinPlan, OrderTag, PlanNode, StructJoin};
pub use holistic::eval_holistic;
pub use naive::eval_naive;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    InvalidTpq(#[from] TpqError),
    #[error("evaluation exceeded its deadline")]
    Timeout,
}

pub type Result<T, E = ExecError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Gtp,
    Fpbj,
    Naive,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Gtp => "gtp",
            Algo::Fpbj => "fpbj",
            Algo::Naive => "naive",
        }
    }

    fn header(self) -> &'static str {
        match self {
            Algo::Gtp => "GTP",
            Algo::Fpbj => "FP-BJ",
            Algo::Naive => "NAIVE",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gtp" => Ok(Algo::Gtp),
            "fpbj" => Ok(Algo::Fpbj),
            "naive" => Ok(Algo::Naive),
            other => Err(format!("unknown algorithm `{other}` (expected gtp, fpbj or naive)")),
        }
    }
}

/// What one output query node is bound to in a match.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Binding {
    Node(NodeLabel),
    /// Witnesses of an optional (let-bound) output; possibly empty.
    Group(Vec<NodeLabel>),
}

impl Binding {
    pub fn items(&self) -> u64 {
        match self {
            Binding::Node(_) => 1,
            Binding::Group(g) => g.len() as u64,
        }
    }
}

/// One match: a binding per output node, in ascending query-node order
/// (which is the binding order of the returned variables).
pub type MatchTuple = Vec<Binding>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IoStats {
    /// Per query node, the stream that fed it (empty for the naive evaluator).
    pub streams: Vec<StreamStats>,
    /// Largest number of frames stacked at once (holistic join only).
    pub peak_stack_frames: u64,
    /// Every structural join emitted its output in its declared order.
    pub joins_ordered: bool,
    /// Document-index records scanned (naive evaluator only).
    pub records_scanned: u64,
}

impl IoStats {
    pub fn total(&self) -> StreamStats {
        self.streams.iter().fold(StreamStats::default(), |a, b| a + *b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSummary {
    pub count: u64,
    /// Sorted match tuples, when requested.
    pub tuples: Option<Vec<MatchTuple>>,
    pub io: IoStats,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub materialize: bool,
    pub deadline: Option<Instant>,
}

impl EvalOptions {
    pub fn materialized() -> Self {
        EvalOptions {
            materialize: true,
            deadline: None,
        }
    }
}

/// Polls the deadline every few thousand steps.
pub(crate) struct Ticker {
    deadline: Option<Instant>,
    n: u32,
}

impl Ticker {
    pub fn new(deadline: Option<Instant>) -> Self {
        Ticker { deadline, n: 0 }
    }

    pub fn tick(&mut self) -> Result<()> {
        self.n = self.n.wrapping_add(1);
        if self.n.is_multiple_of(4096) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(ExecError::Timeout);
                }
            }
        }
        Ok(())
    }
}

/// Opens one document-order stream per query node: the value index for nodes
/// with a value predicate, the partition index otherwise.
pub fn open_streams(coll: &Collection, tpq: &Tpq) -> Result<Vec<BoxedStream>> {
    tpq.validate()?;
    let mut out = Vec::with_capacity(tpq.len());
    for (i, q) in tpq.nodes.iter().enumerate() {
        let NameTest::Name(name) = &q.name_test else {
            return Err(TpqError::InvalidTpq(format!("wildcard name test on node {i} is not supported by the evaluators")).into());
        };
        let mut s = match &q.value_pred {
            Some(p) => coll.value_stream_by_name(name, p)?,
            None => coll.partition_stream_by_name(name)?,
        };
        if i == tpq.root && tpq.anchored {
            s = Box::new(FilterStream::new(s, |l: &NodeLabel| l.level == 0)?);
        }
        out.push(s);
    }
    Ok(out)
}

/// What a query node puts into its own rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Own {
    Nothing,
    Key,
    Group,
}

/// Output layout of a TPQ, shared by the twig evaluators.
pub(crate) struct Layout {
    pub own: Vec<Own>,
    pub children: Vec<Vec<QueryNodeId>>,
    /// (parent, axis, index among the parent's children)
    pub parent: Vec<Option<(QueryNodeId, Axis, usize)>>,
    /// number of optional outputs in each node's subtree
    pub subtree_groups: Vec<usize>,
    pub optional: Vec<bool>,
    /// mandatory and optional outputs, each in preorder
    mandatory_outputs: Vec<QueryNodeId>,
    optional_outputs: Vec<QueryNodeId>,
}

impl Layout {
    pub fn new(tpq: &Tpq) -> Self {
        let n = tpq.len();
        let own = tpq
            .nodes
            .iter()
            .map(|q| match (q.is_output, q.is_optional) {
                (false, _) => Own::Nothing,
                (true, false) => Own::Key,
                (true, true) => Own::Group,
            })
            .collect::<Vec<_>>();
        let children: Vec<Vec<QueryNodeId>> = (0..n).map(|i| tpq.children(i)).collect();
        let mut parent = vec![None; n];
        for (p, kids) in children.iter().enumerate() {
            for (slot, &c) in kids.iter().enumerate() {
                let axis = tpq.parent_edge(c).expect("child has an edge").axis;
                parent[c] = Some((p, axis, slot));
            }
        }
        let pre = tpq.preorder();
        let mut subtree_groups = vec![0; n];
        for &q in pre.iter().rev() {
            subtree_groups[q] = usize::from(own[q] == Own::Group) + children[q].iter().map(|&c| subtree_groups[c]).sum::<usize>();
        }
        Layout {
            mandatory_outputs: pre.iter().copied().filter(|&q| own[q] == Own::Key).collect(),
            optional_outputs: pre.iter().copied().filter(|&q| own[q] == Own::Group).collect(),
            optional: tpq.nodes.iter().map(|q| q.is_optional).collect(),
            own,
            children,
            parent,
            subtree_groups,
        }
    }

    /// The node's own contribution for a matched label.
    pub fn own_rows(&self, q: QueryNodeId, label: NodeLabel) -> Vec<Row> {
        vec![match self.own[q] {
            Own::Nothing => Row::default(),
            Own::Key => Row {
                key: vec![label],
                groups: Vec::new(),
            },
            Own::Group => Row {
                key: Vec::new(),
                groups: vec![vec![label]],
            },
        }]
    }

    /// Stand-in for an optional child with no match.
    pub fn absent(&self, q: QueryNodeId) -> Vec<Row> {
        vec![Row::empty(self.subtree_groups[q])]
    }

    pub fn tuples(&self, rows: &[Row]) -> Vec<MatchTuple> {
        let mut order: Vec<(QueryNodeId, bool, usize)> = Vec::new();
        order.extend(self.mandatory_outputs.iter().enumerate().map(|(i, &q)| (q, true, i)));
        order.extend(self.optional_outputs.iter().enumerate().map(|(i, &q)| (q, false, i)));
        order.sort();
        let mut out: Vec<MatchTuple> = rows
            .iter()
            .map(|r| {
                order
                    .iter()
                    .map(|&(_, mandatory, i)| {
                        if mandatory {
                            Binding::Node(r.key[i])
                        } else {
                            Binding::Group(r.groups[i].clone())
                        }
                    })
                    .collect()
            })
            .collect();
        out.sort();
        out
    }
}

pub(crate) fn summarize(layout: &Layout, rows: &[Row], opts: &EvalOptions, io: IoStats) -> ResultSummary {
    ResultSummary {
        count: partial::count(rows),
        tuples: opts.materialize.then(|| layout.tuples(rows)),
        io,
    }
}

/// Deterministic plan description: a header naming the algorithm, the canonical
/// twig, and for FP-BJ the operator tree.
pub fn explain(tpq: &Tpq, algo: Algo) -> String {
    let mut s = format!("{}\ntpq: {}\n", algo.header(), tpq.render());
    if algo == Algo::Fpbj {
        match plan_binary(tpq) {
            Ok(plan) => s.push_str(&plan.render()),
            Err(e) => s.push_str(&format!("no plan: {e}\n")),
        }
    }
    s
}

/// Evaluates a compiled query with the chosen algorithm.
pub fn evaluate(
    coll: &Collection,
    ast: &QueryAst,
    det: &DetectionResult,
    algo: Algo,
    opts: EvalOptions,
) -> Result<ResultSummary> {
    match algo {
        Algo::Naive => eval_naive(coll, ast, opts),
        Algo::Gtp => {
            let streams = open_streams(coll, &det.tpq)?;
            eval_holistic(&det.tpq, streams, opts)
        }
        Algo::Fpbj => {
            let plan = plan_binary(&det.tpq)?;
            let streams = open_streams(coll, &det.tpq)?;
            eval_binary(&plan, streams, opts)
        }
    }
}
