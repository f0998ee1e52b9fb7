//! Twig pattern query model.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

pub type QueryNodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// parent-child, the `child` axis
    Pc,
    /// ancestor-descendant, the `descendant` axis
    Ad,
}

impl Axis {
    pub fn symbol(self) -> &'static str {
        match self {
            Axis::Pc => "/",
            Axis::Ad => "//",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Pc => "PC",
            Axis::Ad => "AD",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompOp::Eq => "=",
            CompOp::Ne => "!=",
            CompOp::Lt => "<",
            CompOp::Le => "<=",
            CompOp::Gt => ">",
            CompOp::Ge => ">=",
        }
    }

    /// Operator with its operands swapped: `lit < path` is `path > lit`.
    pub fn flipped(self) -> Self {
        match self {
            CompOp::Lt => CompOp::Gt,
            CompOp::Le => CompOp::Ge,
            CompOp::Gt => CompOp::Lt,
            CompOp::Ge => CompOp::Le,
            other => other,
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CompOp::Eq => ord == Ordering::Equal,
            CompOp::Ne => ord != Ordering::Equal,
            CompOp::Lt => ord == Ordering::Less,
            CompOp::Le => ord != Ordering::Greater,
            CompOp::Gt => ord == Ordering::Greater,
            CompOp::Ge => ord != Ordering::Less,
        }
    }
}

/// Comparison literal. Numbers keep their source text for rendering.
#[derive(Debug, Clone)]
pub enum Literal {
    String(String),
    Number { text: String, value: f64 },
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Literal::String(a), Literal::String(b)) => a == b,
            (Literal::Number { text: a, .. }, Literal::Number { text: b, .. }) => a == b,
            _ => false,
        }
    }
}

impl Eq for Literal {}

impl Literal {
    pub fn number(text: &str) -> Option<Self> {
        parse_decimal(text).map(|value| Literal::Number {
            text: text.trim().to_owned(),
            value,
        })
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::String(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Literal::Number { text, .. } => f.write_str(text),
        }
    }
}

/// Parses the decimal subset used for numeric comparison:
/// optional sign, digits, optional fraction. Surrounding whitespace is ignored.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let t = s.trim();
    let body = t.strip_prefix(['-', '+']).unwrap_or(t);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    let ok = match frac {
        None => !int.is_empty() && digits(int),
        Some(f) => (!int.is_empty() || !f.is_empty()) && digits(int) && digits(f),
    };
    if !ok {
        return None;
    }
    t.parse::<f64>().ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValuePredicate {
    pub op: CompOp,
    pub literal: Literal,
}

impl ValuePredicate {
    pub fn new(op: CompOp, literal: Literal) -> Self {
        ValuePredicate { op, literal }
    }

    /// Comparison semantics shared by the value index and navigational evaluation.
    ///
    /// Numeric literals compare numerically and never match values that are not
    /// decimals; string literals compare bytewise.
    pub fn matches(&self, value: &str) -> bool {
        match &self.literal {
            Literal::Number { value: lit, .. } => match parse_decimal(value) {
                Some(v) => v.partial_cmp(lit).is_some_and(|ord| self.op.holds(ord)),
                None => false,
            },
            Literal::String(lit) => self.op.holds(value.as_bytes().cmp(lit.as_bytes())),
        }
    }
}

impl fmt::Display for ValuePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} {}]", self.op.symbol(), self.literal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NameTest {
    Name(String),
    Wildcard,
}

impl NameTest {
    pub fn as_name(&self) -> Option<&str> {
        match self {
            NameTest::Name(n) => Some(n),
            NameTest::Wildcard => None,
        }
    }
}

impl fmt::Display for NameTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NameTest::Name(n) => f.write_str(n),
            NameTest::Wildcard => f.write_str("*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryNode {
    pub name_test: NameTest,
    pub is_output: bool,
    pub is_optional: bool,
    pub value_pred: Option<ValuePredicate>,
}

impl QueryNode {
    pub fn named(name: &str) -> Self {
        QueryNode {
            name_test: NameTest::Name(name.to_owned()),
            is_output: false,
            is_optional: false,
            value_pred: None,
        }
    }

    pub fn output(mut self) -> Self {
        self.is_output = true;
        self
    }

    pub fn optional(mut self) -> Self {
        self.is_optional = true;
        self
    }

    pub fn with_pred(mut self, pred: ValuePredicate) -> Self {
        self.value_pred = Some(pred);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub parent: QueryNodeId,
    pub child: QueryNodeId,
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TpqError {
    #[error("invalid TPQ: {0}")]
    InvalidTpq(String),
}

fn invalid(reason: impl Into<String>) -> TpqError {
    TpqError::InvalidTpq(reason.into())
}

/// A twig pattern query: a rooted tree of query nodes joined by PC/AD edges.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tpq {
    pub nodes: Vec<QueryNode>,
    pub edges: Vec<Edge>,
    pub root: QueryNodeId,
    /// The root must match a document root element (paths starting with a single `/`).
    pub anchored: bool,
}

impl Tpq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: QueryNode) -> QueryNodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, parent: QueryNodeId, child: QueryNodeId, axis: Axis) {
        self.edges.push(Edge {
            parent,
            child,
            axis,
        });
    }

    /// Adds `node` as a child of `parent`.
    pub fn add_child(&mut self, parent: QueryNodeId, axis: Axis, node: QueryNode) -> QueryNodeId {
        let id = self.add_node(node);
        self.add_edge(parent, id, axis);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: QueryNodeId) -> &QueryNode {
        &self.nodes[id]
    }

    pub fn parent_edge(&self, id: QueryNodeId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.child == id)
    }

    pub fn parent(&self, id: QueryNodeId) -> Option<QueryNodeId> {
        self.parent_edge(id).map(|e| e.parent)
    }

    /// Child edges of `id`, in creation order of the children.
    pub fn child_edges(&self, id: QueryNodeId) -> Vec<Edge> {
        let mut v: Vec<Edge> = self.edges.iter().filter(|e| e.parent == id).copied().collect();
        v.sort_by_key(|e| e.child);
        v
    }

    pub fn children(&self, id: QueryNodeId) -> Vec<QueryNodeId> {
        self.child_edges(id).into_iter().map(|e| e.child).collect()
    }

    /// Output nodes in ascending id order.
    pub fn output_nodes(&self) -> Vec<QueryNodeId> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_output).collect()
    }

    /// Nodes in preorder (children by creation index).
    pub fn preorder(&self) -> Vec<QueryNodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            let mut kids = self.children(n);
            kids.reverse();
            stack.extend(kids);
        }
        out
    }

    /// Edges in depth-first order from the root.
    pub fn dfs_edges(&self) -> Vec<Edge> {
        self.preorder()
            .into_iter()
            .filter_map(|n| self.parent_edge(n).copied())
            .collect()
    }

    pub fn depth_of(&self, id: QueryNodeId) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            d += 1;
            cur = p;
        }
        d
    }

    pub fn validate(&self) -> Result<(), TpqError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(invalid("empty query"));
        }
        if self.root >= n {
            return Err(invalid("root index out of range"));
        }
        let mut incoming = vec![0usize; n];
        for e in &self.edges {
            if e.parent >= n || e.child >= n {
                return Err(invalid("edge endpoint out of range"));
            }
            if e.parent == e.child {
                return Err(invalid("self loop"));
            }
            incoming[e.child] += 1;
        }
        if incoming[self.root] != 0 {
            return Err(invalid("root has an incoming edge"));
        }
        for (i, &c) in incoming.iter().enumerate() {
            if i != self.root && c != 1 {
                return Err(if c == 0 {
                    invalid(format!("disconnected: node {i} has no incoming edge"))
                } else {
                    invalid(format!("node {i} has {c} incoming edges"))
                });
            }
        }
        // n-1 edges with one parent each: reachability from the root rules out cycles
        let reached = self.preorder();
        if reached.len() != n {
            return Err(invalid("disconnected: cycle or unreachable nodes"));
        }
        if !self.nodes.iter().any(|q| q.is_output) {
            return Err(invalid("no output node"));
        }
        for e in &self.edges {
            if self.nodes[e.parent].is_optional && !self.nodes[e.child].is_optional {
                return Err(invalid(format!(
                    "optional node {} has mandatory descendant {}",
                    e.parent, e.child
                )));
            }
        }
        for (i, q) in self.nodes.iter().enumerate() {
            if q.value_pred.is_some() && q.name_test == NameTest::Wildcard {
                return Err(invalid(format!("node {i} has a value predicate but no name")));
            }
        }
        Ok(())
    }

    /// Canonical one-line form, e.g. `r(/a*(/b(//c*),//d*(/e,//f)))`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        if self.anchored {
            s.push('/');
        }
        self.render_node(self.root, &mut s);
        s
    }

    fn render_node(&self, id: QueryNodeId, out: &mut String) {
        let q = &self.nodes[id];
        out.push_str(&q.name_test.to_string());
        if let Some(p) = &q.value_pred {
            out.push_str(&p.to_string());
        }
        if q.is_optional {
            out.push('?');
        }
        if q.is_output {
            out.push('*');
        }
        let kids = self.child_edges(id);
        if !kids.is_empty() {
            out.push('(');
            for (i, e) in kids.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(e.axis.symbol());
                self.render_node(e.child, out);
            }
            out.push(')');
        }
    }

    /// The sample twig `r(/a*(/b(//c*),//d*(/e,//f)))`.
    pub fn sample() -> Tpq {
        let mut t = Tpq::new();
        let r = t.add_node(QueryNode::named("r"));
        let a = t.add_child(r, Axis::Pc, QueryNode::named("a").output());
        let b = t.add_child(a, Axis::Pc, QueryNode::named("b"));
        t.add_child(b, Axis::Ad, QueryNode::named("c").output());
        let d = t.add_child(a, Axis::Ad, QueryNode::named("d").output());
        t.add_child(d, Axis::Pc, QueryNode::named("e"));
        t.add_child(d, Axis::Ad, QueryNode::named("f"));
        t
    }
}

impl fmt::Display for Tpq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
