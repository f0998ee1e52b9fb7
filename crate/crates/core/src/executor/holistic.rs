//! Holistic twig join: one stack per query node over document-order streams.
//!
//! Labels are consumed in global document order from the streams that can
//! still contribute. A label is pushed only while its parent's stack is
//! non-empty, linked to that stack's top. When a frame expires it combines
//! its own label with whatever its child frames handed up, and passes the
//! result to every linked parent frame that satisfies the edge (containment,
//! plus the level check for PC edges).

use std::rc::Rc;

use super::partial::{self, Row, Rows};
use super::{summarize, EvalOptions, IoStats, Layout, ResultSummary, Result, Ticker};
use crate::labeling::NodeLabel;
use crate::query::{Axis, QueryNodeId, Tpq};
use crate::storage::BoxedStream;

struct Frame {
    label: NodeLabel,
    /// index of the parent stack's top at push time
    link: usize,
    /// per child slot, the row sets handed up by child frames
    contribs: Vec<Vec<Rc<Rows>>>,
}

struct Join<'a> {
    layout: &'a Layout,
    depth: Vec<usize>,
    preorder: Vec<QueryNodeId>,
    streams: Vec<BoxedStream>,
    stacks: Vec<Vec<Frame>>,
    results: Vec<Rc<Rows>>,
    live: u64,
    peak: u64,
}

fn expired(f: &NodeLabel, next: &NodeLabel) -> bool {
    f.doc_id < next.doc_id || (f.doc_id == next.doc_id && f.end < next.start)
}

impl Join<'_> {
    /// Streams that can still extend a solution, in preorder.
    fn worth_reading(&self) -> Vec<bool> {
        let mut worth = vec![false; self.streams.len()];
        for &q in &self.preorder {
            let has_head = self.streams[q].head().is_some();
            worth[q] = has_head
                && match self.layout.parent[q] {
                    None => true,
                    Some((p, _, _)) => !self.stacks[p].is_empty() || worth[p],
                };
        }
        worth
    }

    /// Pops the expired top with the largest start (deepest query node on ties)
    /// until none is left; `None` pops everything.
    fn pop_expired(&mut self, next: Option<&NodeLabel>) {
        loop {
            let mut pick: Option<(NodeLabel, usize, QueryNodeId)> = None;
            for (q, st) in self.stacks.iter().enumerate() {
                let Some(top) = st.last() else { continue };
                if next.is_some_and(|n| !expired(&top.label, n)) {
                    continue;
                }
                let cand = (top.label, self.depth[q], q);
                if pick.as_ref().is_none_or(|p| (cand.0, cand.1) > (p.0, p.1)) {
                    pick = Some(cand);
                }
            }
            match pick {
                Some((_, _, q)) => self.pop(q),
                None => return,
            }
        }
    }

    fn frame_rows(&self, q: QueryNodeId, f: &Frame) -> Option<Rows> {
        let mut acc = self.layout.own_rows(q, f.label);
        for (slot, &c) in self.layout.children[q].iter().enumerate() {
            let parts = &f.contribs[slot];
            let u = if parts.is_empty() {
                if !self.layout.optional[c] {
                    return None;
                }
                self.layout.absent(c)
            } else {
                partial::union(parts.iter().map(|r| r.as_slice()))
            };
            acc = partial::product(&acc, &u);
            if acc.is_empty() {
                return None;
            }
        }
        Some(acc)
    }

    fn pop(&mut self, q: QueryNodeId) {
        let f = self.stacks[q].pop().expect("pop from a non-empty stack");
        self.live -= 1;
        let Some(rows) = self.frame_rows(q, &f) else { return };
        let rows = Rc::new(rows);
        match self.layout.parent[q] {
            None => self.results.push(rows),
            Some((p, axis, slot)) => {
                let st = &mut self.stacks[p];
                let upto = f.link.min(st.len().saturating_sub(1));
                for pf in st.iter_mut().take(upto + 1) {
                    if pf.label.is_ancestor_of(&f.label) && (axis == Axis::Ad || pf.label.level + 1 == f.label.level) {
                        pf.contribs[slot].push(Rc::clone(&rows));
                    }
                }
            }
        }
    }

    fn run(&mut self, ticker: &mut Ticker) -> Result<()> {
        loop {
            ticker.tick()?;
            let worth = self.worth_reading();
            let mut best: Option<(NodeLabel, QueryNodeId)> = None;
            for (q, &w) in worth.iter().enumerate() {
                if !w {
                    continue;
                }
                let h = self.streams[q].head().unwrap();
                if best.is_none_or(|(b, bq)| (h, self.depth[q]) < (b, self.depth[bq])) {
                    best = Some((h, q));
                }
            }
            let Some((label, q)) = best else { break };
            self.pop_expired(Some(&label));
            let parent = self.layout.parent[q];
            let pushable = match parent {
                None => true,
                Some((p, _, _)) => !self.stacks[p].is_empty(),
            };
            if pushable {
                let link = parent.map_or(0, |(p, _, _)| self.stacks[p].len() - 1);
                self.stacks[q].push(Frame {
                    label,
                    link,
                    contribs: vec![Vec::new(); self.layout.children[q].len()],
                });
                self.live += 1;
                self.peak = self.peak.max(self.live);
            }
            self.streams[q].advance()?;
        }
        self.pop_expired(None);
        Ok(())
    }
}

pub fn eval_holistic(tpq: &Tpq, streams: Vec<BoxedStream>, opts: EvalOptions) -> Result<ResultSummary> {
    tpq.validate()?;
    assert_eq!(streams.len(), tpq.len(), "one stream per query node");
    let layout = Layout::new(tpq);
    let mut join = Join {
        layout: &layout,
        depth: (0..tpq.len()).map(|q| tpq.depth_of(q)).collect(),
        preorder: tpq.preorder(),
        stacks: (0..tpq.len()).map(|_| Vec::new()).collect(),
        streams,
        results: Vec::new(),
        live: 0,
        peak: 0,
    };
    join.run(&mut Ticker::new(opts.deadline))?;
    let rows: Vec<Row> = partial::union(join.results.iter().map(|r| r.as_slice()));
    let io = IoStats {
        streams: join.streams.iter().map(|s| s.stats()).collect(),
        peak_stack_frames: join.peak,
        joins_ordered: true,
        records_scanned: 0,
    };
    Ok(summarize(&layout, &rows, &opts, io))
}
