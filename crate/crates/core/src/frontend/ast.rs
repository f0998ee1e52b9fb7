//! Syntax tree of the supported XQuery subset.

use crate::query::{Axis, CompOp, Literal, NameTest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub count_wrapped: bool,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Flwor(Flwor),
    Path(PathExpr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BindingKind {
    For,
    Let,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub kind: BindingKind,
    pub var: String,
    pub path: PathExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flwor {
    /// for and let clauses in source order
    pub bindings: Vec<Binding>,
    /// conjuncts of the where clause; empty when absent
    pub conditions: Vec<Condition>,
    pub returns: Vec<String>,
}

impl Flwor {
    pub fn binding(&self, var: &str) -> Option<&Binding> {
        self.bindings.iter().find(|b| b.var == var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathBase {
    /// The document node; the first step's axis says whether the path was `/x` or `//x`.
    Document,
    Var(String),
    /// The context item of an enclosing step predicate (`.` or a relative path).
    Context,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub axis: Axis,
    /// Attribute steps carry an `@`-prefixed name.
    pub test: NameTest,
    pub predicates: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathExpr {
    pub base: PathBase,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Exists(PathExpr),
    /// `path op literal`; literal-first comparisons are stored flipped.
    Compare { path: PathExpr, op: CompOp, literal: Literal },
}
