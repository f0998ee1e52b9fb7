//! Twig detection: grafts every binding, condition and predicate path of a
//! parsed query onto a single TPQ.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::QueryError;
use crate::query::{Axis, QueryNode, QueryNodeId, Tpq, ValuePredicate};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionResult {
    pub tpq: Tpq,
    pub var_to_node: BTreeMap<String, QueryNodeId>,
    pub count_wrapped: bool,
}

fn unsupported(what: impl Into<String>) -> QueryError {
    QueryError::UnsupportedConstruct(what.into())
}

#[derive(Default)]
struct Detector {
    tpq: Tpq,
    has_root: bool,
    vars: HashMap<String, (QueryNodeId, BindingKind)>,
}

impl Detector {
    /// Grafts `path` and returns the node of its last step (or its base node if it has no steps).
    fn graft_path(
        &mut self,
        path: &PathExpr,
        optional: bool,
        context: Option<QueryNodeId>,
    ) -> Result<QueryNodeId, QueryError> {
        let mut steps = path.steps.iter();
        let mut cur = match &path.base {
            PathBase::Document => {
                let first = steps.next().expect("absolute paths have a first step");
                if self.has_root {
                    return Err(QueryError::NotSingleTwig(
                        "a second absolute path starts an independent twig".into(),
                    ));
                }
                if optional {
                    return Err(unsupported("a let binding as the twig root (bind the root with for)"));
                }
                self.has_root = true;
                self.tpq.root = self.tpq.add_node(node_for(first, false));
                self.tpq.anchored = first.axis == Axis::Pc;
                let root = self.tpq.root;
                self.graft_predicates(first, root, optional)?;
                root
            }
            PathBase::Var(v) => {
                let (node, kind) = self.vars[v];
                if kind == BindingKind::Let {
                    return Err(unsupported(format!(
                        "paths, for bindings or conditions on let variable ${v}"
                    )));
                }
                node
            }
            PathBase::Context => context.expect("context paths occur inside step predicates"),
        };
        for step in steps {
            cur = self.tpq.add_child(cur, step.axis, node_for(step, optional));
            self.graft_predicates(step, cur, optional)?;
        }
        Ok(cur)
    }

    fn graft_predicates(&mut self, step: &Step, node: QueryNodeId, optional: bool) -> Result<(), QueryError> {
        if optional && !step.predicates.is_empty() {
            return Err(unsupported("step predicates inside a let binding"));
        }
        for cond in &step.predicates {
            self.graft_condition(cond, Some(node), optional)?;
        }
        Ok(())
    }

    fn graft_condition(
        &mut self,
        cond: &Condition,
        context: Option<QueryNodeId>,
        optional: bool,
    ) -> Result<(), QueryError> {
        match cond {
            Condition::Exists(path) => {
                self.graft_path(path, optional, context)?;
            }
            Condition::Compare { path, op, literal } => {
                let node = self.graft_path(path, optional, context)?;
                let slot = &mut self.tpq.nodes[node].value_pred;
                if slot.is_some() {
                    return Err(unsupported(
                        "a second comparison on the same node (compare through separate paths)",
                    ));
                }
                *slot = Some(ValuePredicate::new(*op, literal.clone()));
            }
        }
        Ok(())
    }
}

fn node_for(step: &Step, optional: bool) -> QueryNode {
    QueryNode {
        name_test: step.test.clone(),
        is_output: false,
        is_optional: optional,
        value_pred: None,
    }
}

pub fn detect_tpq(ast: &QueryAst) -> Result<DetectionResult, QueryError> {
    let mut d = Detector::default();
    let mut var_to_node = BTreeMap::new();
    match &ast.body {
        Body::Path(path) => {
            let last = d.graft_path(path, false, None)?;
            d.tpq.nodes[last].is_output = true;
        }
        Body::Flwor(f) => {
            for b in &f.bindings {
                if b.path.steps.is_empty() {
                    return Err(unsupported(format!("binding ${} to another variable without a step", b.var)));
                }
                let optional = b.kind == BindingKind::Let;
                let node = d.graft_path(&b.path, optional, None)?;
                d.vars.insert(b.var.clone(), (node, b.kind));
                var_to_node.insert(b.var.clone(), node);
            }
            for cond in &f.conditions {
                d.graft_condition(cond, None, false)?;
            }
            for (i, v) in f.returns.iter().enumerate() {
                if f.returns[..i].contains(v) {
                    return Err(unsupported(format!("variable ${v} returned twice")));
                }
                let node = var_to_node[v];
                d.tpq.nodes[node].is_output = true;
            }
        }
    }
    d.tpq
        .validate()
        .map_err(|e| QueryError::NotSingleTwig(e.to_string()))?;
    Ok(DetectionResult {
        tpq: d.tpq,
        var_to_node,
        count_wrapped: ast.count_wrapped,
    })
}
