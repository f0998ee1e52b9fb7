#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use rxdb_core::executor::{evaluate, Algo, EvalOptions, ResultSummary};
use rxdb_core::frontend::compile;
use rxdb_core::labeling::NodeKind;
use rxdb_core::storage::{Collection, CollectionBuilder};

pub const NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
pub const ATTRS: [&str; 2] = ["v", "w"];

/// One node of a generated document, in document order.
#[derive(Debug, Clone)]
pub struct GenNode {
    pub name: String,
    pub kind: NodeKind,
    pub parent: Option<usize>,
    pub depth: u32,
}

#[derive(Debug, Clone)]
pub struct GenDoc {
    pub xml: String,
    pub nodes: Vec<GenNode>,
}

impl GenDoc {
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = self.nodes[b].parent;
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.nodes[p].parent;
        }
        false
    }

    pub fn is_parent(&self, a: usize, b: usize) -> bool {
        self.nodes[b].parent == Some(a)
    }
}

fn value(rng: &mut StdRng) -> String {
    match rng.gen_range(0..10) {
        0 => "x".into(),
        1 => "1.5".into(),
        _ => rng.gen_range(0..5).to_string(),
    }
}

/// Early names are more frequent, so random twigs often find matches.
fn skewed_name<'n>(rng: &mut StdRng, names: &[&'n str]) -> &'n str {
    let i = rng.gen_range(0..names.len() * 2);
    names[if i < names.len() { i / 2 } else { i - names.len() }]
}

struct DocGen<'a> {
    rng: &'a mut StdRng,
    names: &'a [&'a str],
    attrs: &'a [&'a str],
    budget: usize,
    max_depth: u32,
    xml: String,
    nodes: Vec<GenNode>,
}

impl DocGen<'_> {
    fn push(&mut self, name: String, kind: NodeKind, parent: Option<usize>, depth: u32) -> usize {
        self.nodes.push(GenNode {
            name,
            kind,
            parent,
            depth,
        });
        self.budget = self.budget.saturating_sub(1);
        self.nodes.len() - 1
    }

    fn element(&mut self, parent: Option<usize>, depth: u32) {
        let name = skewed_name(self.rng, self.names);
        let me = self.push(name.into(), NodeKind::Element, parent, depth);
        let _ = write!(self.xml, "<{name}");
        for &a in self.attrs {
            if self.budget > 0 && self.rng.gen_bool(0.2) {
                let v = value(self.rng);
                let _ = write!(self.xml, " {a}=\"{v}\"");
                self.push(format!("@{a}"), NodeKind::Attribute, Some(me), depth + 1);
            }
        }
        self.xml.push('>');
        let mut last_text = false;
        let kids = if depth + 1 >= self.max_depth { 0 } else { self.rng.gen_range(0..5) };
        for _ in 0..kids {
            if self.budget == 0 {
                break;
            }
            if !last_text && self.rng.gen_bool(0.25) {
                let v = value(self.rng);
                self.xml.push_str(&v);
                self.push("#text".into(), NodeKind::Text, Some(me), depth + 1);
                last_text = true;
            } else {
                self.element(Some(me), depth + 1);
                last_text = false;
            }
        }
        if !last_text && self.budget > 0 && self.rng.gen_bool(0.5) {
            let v = value(self.rng);
            self.xml.push_str(&v);
            self.push("#text".into(), NodeKind::Text, Some(me), depth + 1);
        }
        let _ = write!(self.xml, "</{name}>");
    }
}

/// A random document with at most `max_nodes` nodes and depth at most `max_depth`.
pub fn random_doc(rng: &mut StdRng, max_nodes: usize, max_depth: u32) -> GenDoc {
    random_doc_with(rng, &NAMES, &ATTRS, max_nodes, max_depth)
}

/// Like [`random_doc`], over a caller-chosen vocabulary (attribute names without `@`).
pub fn random_doc_with(rng: &mut StdRng, names: &[&str], attrs: &[&str], max_nodes: usize, max_depth: u32) -> GenDoc {
    let mut g = DocGen {
        budget: rng.gen_range(1..=max_nodes),
        rng,
        names,
        attrs,
        max_depth,
        xml: String::new(),
        nodes: Vec::new(),
    };
    if g.rng.gen_bool(0.2) {
        g.xml.push_str("<?xml version=\"1.0\"?>\n<!-- generated -->\n");
    }
    g.element(None, 0);
    GenDoc {
        xml: g.xml,
        nodes: g.nodes,
    }
}

pub fn build_collection(path: &Path, docs: &[String]) -> Collection {
    let mut b = CollectionBuilder::create(path).unwrap();
    for (i, d) in docs.iter().enumerate() {
        b.load_document(&format!("doc{i}.xml"), d.as_bytes()).unwrap();
    }
    b.commit().unwrap()
}

struct QueryGen<'a> {
    rng: &'a mut StdRng,
    budget: usize,
}

impl QueryGen<'_> {
    fn literal(&mut self) -> String {
        match self.rng.gen_range(0..8) {
            0 => "\"x\"".into(),
            1 => format!("\"{}\"", self.rng.gen_range(0..5)),
            _ => self.rng.gen_range(0..5).to_string(),
        }
    }

    fn op(&mut self) -> &'static str {
        ["=", "!=", "<", "<=", ">", ">="][self.rng.gen_range(0..6)]
    }

    fn axis(&mut self) -> &'static str {
        if self.rng.gen_bool(0.5) {
            "/"
        } else {
            "//"
        }
    }

    fn name(&mut self, allow_attr: bool) -> (String, bool) {
        if allow_attr && self.rng.gen_bool(0.15) {
            (format!("@{}", ATTRS[self.rng.gen_range(0..ATTRS.len())]), true)
        } else {
            (skewed_name(self.rng, &NAMES).to_string(), false)
        }
    }

    /// `[...]` with one or two conjuncts, or nothing.
    fn predicate(&mut self, self_cmp: &mut bool) -> String {
        if self.budget == 0 || !self.rng.gen_bool(0.35) {
            return String::new();
        }
        let mut atoms = Vec::new();
        for _ in 0..self.rng.gen_range(1..=2) {
            if !*self_cmp && self.rng.gen_bool(0.2) {
                *self_cmp = true;
                let (op, lit) = (self.op(), self.literal());
                atoms.push(if self.rng.gen_bool(0.3) {
                    format!("{lit} {op} .")
                } else {
                    format!(". {op} {lit}")
                });
                continue;
            }
            if self.budget == 0 {
                break;
            }
            self.budget -= 1;
            let (name, _) = self.name(true);
            let prefix = match self.rng.gen_range(0..3) {
                0 => "./".to_string(),
                1 => ".//".to_string(),
                _ => String::new(),
            };
            let mut inner_self = false;
            let nested = if name.starts_with('@') { String::new() } else { self.predicate(&mut inner_self) };
            let path = format!("{prefix}{name}{nested}");
            if !inner_self && self.rng.gen_bool(0.5) {
                let (op, lit) = (self.op(), self.literal());
                atoms.push(format!("{path} {op} {lit}"));
            } else {
                atoms.push(path);
            }
        }
        if atoms.is_empty() {
            return String::new();
        }
        format!("[{}]", atoms.join(" and "))
    }

    /// A chain of steps; returns the text, whether the last node already
    /// carries a self comparison, and whether it ended at an attribute.
    fn steps(&mut self, n: usize, with_preds: bool) -> (String, bool, bool) {
        let mut s = String::new();
        let mut self_cmp = false;
        let mut attr = false;
        for i in 0..n {
            if self.budget == 0 || attr {
                break;
            }
            self.budget -= 1;
            let (name, is_attr) = self.name(i + 1 == n);
            attr = is_attr;
            self_cmp = false;
            s.push_str(self.axis());
            s.push_str(&name);
            if with_preds && !is_attr {
                s.push_str(&self.predicate(&mut self_cmp));
            }
        }
        (s, self_cmp, attr)
    }
}

/// A random query of the supported subset with at most six query nodes.
pub fn random_query(rng: &mut StdRng) -> String {
    let mut g = QueryGen { rng, budget: 6 };
    let wrap = g.rng.gen_bool(0.5);
    let body = if g.rng.gen_bool(0.3) {
        let len = g.rng.gen_range(1..=3);
        let (mut s, _, _) = g.steps(len, true);
        if g.rng.gen_bool(0.1) && s.starts_with("//") {
            s.remove(0);
        }
        s
    } else {
        // (name, is_for, has_self_cmp, is_attr)
        let mut vars: Vec<(String, bool, bool, bool)> = Vec::new();
        let mut clauses = Vec::new();
        let len = g.rng.gen_range(1..=2);
        let (mut p, sc, at) = g.steps(len, true);
        if g.rng.gen_bool(0.1) && p.starts_with("//") {
            p.remove(0);
        }
        clauses.push(format!("for $v0 in {p}"));
        vars.push(("v0".into(), true, sc, at));
        while g.budget > 0 && g.rng.gen_bool(0.6) {
            let bases: Vec<usize> = (0..vars.len()).filter(|&i| vars[i].1 && !vars[i].3).collect();
            let Some(&base) = bases.choose(g.rng) else { break };
            let is_for = g.rng.gen_bool(0.7);
            let n = g.rng.gen_range(1..=2);
            let (steps, sc, at) = g.steps(n, is_for);
            if steps.is_empty() {
                break;
            }
            let v = format!("v{}", vars.len());
            clauses.push(if is_for {
                format!("for ${v} in ${}{steps}", vars[base].0)
            } else {
                format!("let ${v} := ${}{steps}", vars[base].0)
            });
            vars.push((v, is_for, sc, at));
        }
        let mut conds = Vec::new();
        for _ in 0..g.rng.gen_range(0..=2) {
            let fors: Vec<usize> = (0..vars.len()).filter(|&i| vars[i].1).collect();
            let &i = fors.choose(g.rng).unwrap();
            if !vars[i].2 && g.rng.gen_bool(0.25) {
                vars[i].2 = true;
                let (op, lit) = (g.op(), g.literal());
                conds.push(format!("${} {op} {lit}", vars[i].0));
                continue;
            }
            if g.budget == 0 || vars[i].3 {
                continue;
            }
            let (steps, sc, _) = g.steps(1, true);
            if !sc && g.rng.gen_bool(0.5) {
                let (op, lit) = (g.op(), g.literal());
                conds.push(format!("${}{steps} {op} {lit}", vars[i].0));
            } else {
                conds.push(format!("${}{steps}", vars[i].0));
            }
        }
        let mut ret: Vec<&str> = vars.iter().map(|v| v.0.as_str()).filter(|_| g.rng.gen_bool(0.6)).collect();
        if ret.is_empty() {
            ret.push(&vars[vars.len() - 1].0);
        }
        ret.shuffle(g.rng);
        let ret: Vec<String> = ret.iter().map(|v| format!("${v}")).collect();
        let mut q = clauses.join(" ");
        if !conds.is_empty() {
            q.push_str(" where ");
            q.push_str(&conds.join(" and "));
        }
        if ret.len() == 1 && g.rng.gen_bool(0.5) {
            let _ = write!(q, " return {}", ret[0]);
        } else {
            let _ = write!(q, " return ({})", ret.join(", "));
        }
        q
    };
    if wrap {
        format!("count({body})")
    } else {
        body
    }
}

/// Draws queries until one compiles.
pub fn random_supported_query(rng: &mut StdRng) -> String {
    loop {
        let q = random_query(rng);
        if compile(&q).is_ok() {
            return q;
        }
    }
}

pub fn run(coll: &Collection, q: &str, algo: Algo) -> ResultSummary {
    let (ast, det) = compile(q).unwrap_or_else(|e| panic!("{q}: {e}"));
    evaluate(coll, &ast, &det, algo, EvalOptions::materialized()).unwrap_or_else(|e| panic!("{q}: {e}"))
}

/// Runs all three evaluators; returns a description of the first disagreement.
pub fn cross_check(coll: &Collection, q: &str) -> Result<[ResultSummary; 3], String> {
    let naive = run(coll, q, Algo::Naive);
    let gtp = run(coll, q, Algo::Gtp);
    let fpbj = run(coll, q, Algo::Fpbj);
    for (name, r) in [("gtp", &gtp), ("fpbj", &fpbj)] {
        if r.count != naive.count || r.tuples != naive.tuples {
            return Err(format!(
                "{q}: {name} count {} vs naive {}\n{name}: {:?}\nnaive: {:?}",
                r.count, naive.count, r.tuples, naive.tuples
            ));
        }
    }
    Ok([gtp, fpbj, naive])
}
