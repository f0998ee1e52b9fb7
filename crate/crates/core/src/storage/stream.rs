//! Document-order label streams over posting lists.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use super::paged_array::{ByteHeap, RecordCursor, ValueRef};
use super::Result;
use crate::labeling::NodeLabel;
use crate::query::ValuePredicate;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    /// Posting entries materialized from storage.
    pub elements_read: u64,
    /// Total length of the posting lists backing the stream.
    pub posting_len: u64,
    pub pages_touched: u64,
}

impl std::ops::Add for StreamStats {
    type Output = StreamStats;

    fn add(self, o: StreamStats) -> StreamStats {
        StreamStats {
            elements_read: self.elements_read + o.elements_read,
            posting_len: self.posting_len + o.posting_len,
            pages_touched: self.pages_touched + o.pages_touched,
        }
    }
}

/// Single-pass cursor yielding labels in strictly increasing document order.
pub trait LabelStream: Send {
    fn head(&self) -> Option<NodeLabel>;
    fn advance(&mut self) -> Result<()>;
    fn stats(&self) -> StreamStats;
}

pub type BoxedStream = Box<dyn LabelStream>;

pub const LABEL_RECORD: usize = 16;
pub const VALUE_POSTING_RECORD: usize = 24;

pub fn encode_label(l: &NodeLabel) -> [u8; LABEL_RECORD] {
    let mut b = [0u8; LABEL_RECORD];
    b[0..4].copy_from_slice(&l.doc_id.to_le_bytes());
    b[4..8].copy_from_slice(&l.start.to_le_bytes());
    b[8..12].copy_from_slice(&l.end.to_le_bytes());
    b[12..16].copy_from_slice(&l.level.to_le_bytes());
    b
}

pub fn decode_label(b: &[u8]) -> NodeLabel {
    let u = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
    NodeLabel::new(u(0), u(4), u(8), u(12))
}

pub fn encode_value_posting(l: &NodeLabel, at: ValueRef) -> [u8; VALUE_POSTING_RECORD] {
    let mut b = [0u8; VALUE_POSTING_RECORD];
    b[..LABEL_RECORD].copy_from_slice(&encode_label(l));
    b[LABEL_RECORD..].copy_from_slice(&at.to_le_bytes());
    b
}

fn decode_value_posting(b: &[u8]) -> (NodeLabel, ValueRef) {
    (decode_label(b), u64::from_le_bytes(b[LABEL_RECORD..VALUE_POSTING_RECORD].try_into().unwrap()))
}

/// Re-checks a posting's full value; used for keys truncated in the value index.
pub struct Verifier {
    pub heap: Arc<ByteHeap>,
    pub pred: ValuePredicate,
}

/// Stream over one posting extent of a record file.
pub struct PostingStream {
    cursor: RecordCursor,
    head: Option<NodeLabel>,
    posting_len: u64,
    read: u64,
    value_postings: bool,
    verify: Option<Verifier>,
}

impl PostingStream {
    pub fn labels(cursor: RecordCursor) -> Result<Self> {
        Self::build(cursor, false, None)
    }

    pub fn values(cursor: RecordCursor, verify: Option<Verifier>) -> Result<Self> {
        Self::build(cursor, true, verify)
    }

    fn build(cursor: RecordCursor, value_postings: bool, verify: Option<Verifier>) -> Result<Self> {
        let mut s = PostingStream {
            posting_len: cursor.remaining(),
            cursor,
            head: None,
            read: 0,
            value_postings,
            verify,
        };
        s.advance()?;
        Ok(s)
    }
}

impl LabelStream for PostingStream {
    fn head(&self) -> Option<NodeLabel> {
        self.head
    }

    fn advance(&mut self) -> Result<()> {
        loop {
            let next = if self.value_postings {
                self.cursor.next_with(decode_value_posting)?
            } else {
                self.cursor.next_with(|b| (decode_label(b), 0))?
            };
            let Some((label, at)) = next else {
                self.head = None;
                return Ok(());
            };
            self.read += 1;
            if let Some(v) = &self.verify {
                let value = v.heap.get_string(at)?;
                if !v.pred.matches(&value) {
                    continue;
                }
            }
            self.head = Some(label);
            return Ok(());
        }
    }

    fn stats(&self) -> StreamStats {
        StreamStats {
            elements_read: self.read,
            posting_len: self.posting_len,
            pages_touched: self.cursor.pages_touched(),
        }
    }
}

pub struct EmptyStream;

impl LabelStream for EmptyStream {
    fn head(&self) -> Option<NodeLabel> {
        None
    }
    fn advance(&mut self) -> Result<()> {
        Ok(())
    }
    fn stats(&self) -> StreamStats {
        StreamStats::default()
    }
}

/// In-memory stream, for tests and derived inputs.
pub struct VecStream {
    labels: Vec<NodeLabel>,
    pos: usize,
}

impl VecStream {
    pub fn new(mut labels: Vec<NodeLabel>) -> Self {
        labels.sort();
        labels.dedup();
        VecStream { labels, pos: 0 }
    }
}

impl LabelStream for VecStream {
    fn head(&self) -> Option<NodeLabel> {
        self.labels.get(self.pos).copied()
    }
    fn advance(&mut self) -> Result<()> {
        self.pos = (self.pos + 1).min(self.labels.len());
        Ok(())
    }
    fn stats(&self) -> StreamStats {
        StreamStats {
            elements_read: self.pos.min(self.labels.len()) as u64 + u64::from(self.pos < self.labels.len()),
            posting_len: self.labels.len() as u64,
            pages_touched: 0,
        }
    }
}

/// K-way merge of document-order streams into one document-order stream.
pub struct MergeStream {
    inputs: Vec<BoxedStream>,
    heap: BinaryHeap<Reverse<(NodeLabel, usize)>>,
}

impl MergeStream {
    pub fn new(inputs: Vec<BoxedStream>) -> Self {
        let heap = inputs
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.head().map(|h| Reverse((h, i))))
            .collect();
        MergeStream { inputs, heap }
    }
}

impl LabelStream for MergeStream {
    fn head(&self) -> Option<NodeLabel> {
        self.heap.peek().map(|Reverse((l, _))| *l)
    }

    fn advance(&mut self) -> Result<()> {
        if let Some(Reverse((_, i))) = self.heap.pop() {
            self.inputs[i].advance()?;
            if let Some(h) = self.inputs[i].head() {
                self.heap.push(Reverse((h, i)));
            }
        }
        Ok(())
    }

    fn stats(&self) -> StreamStats {
        self.inputs.iter().map(|s| s.stats()).fold(StreamStats::default(), |a, b| a + b)
    }
}

/// Labels of `left` that do not occur in `right`.
pub struct DifferenceStream {
    left: BoxedStream,
    right: BoxedStream,
}

impl DifferenceStream {
    pub fn new(left: BoxedStream, right: BoxedStream) -> Result<Self> {
        let mut s = DifferenceStream { left, right };
        s.settle()?;
        Ok(s)
    }

    fn settle(&mut self) -> Result<()> {
        while let Some(l) = self.left.head() {
            while self.right.head().is_some_and(|r| r < l) {
                self.right.advance()?;
            }
            if self.right.head() == Some(l) {
                self.left.advance()?;
            } else {
                break;
            }
        }
        Ok(())
    }
}

impl LabelStream for DifferenceStream {
    fn head(&self) -> Option<NodeLabel> {
        self.left.head()
    }

    fn advance(&mut self) -> Result<()> {
        self.left.advance()?;
        self.settle()
    }

    fn stats(&self) -> StreamStats {
        self.left.stats() + self.right.stats()
    }
}

/// Drops labels rejected by a predicate.
pub struct FilterStream<F> {
    inner: BoxedStream,
    keep: F,
}

impl<F: Fn(&NodeLabel) -> bool + Send> FilterStream<F> {
    pub fn new(inner: BoxedStream, keep: F) -> Result<Self> {
        let mut s = FilterStream { inner, keep };
        s.skip()?;
        Ok(s)
    }

    fn skip(&mut self) -> Result<()> {
        while let Some(h) = self.inner.head() {
            if (self.keep)(&h) {
                break;
            }
            self.inner.advance()?;
        }
        Ok(())
    }
}

impl<F: Fn(&NodeLabel) -> bool + Send> LabelStream for FilterStream<F> {
    fn head(&self) -> Option<NodeLabel> {
        self.inner.head()
    }

    fn advance(&mut self) -> Result<()> {
        self.inner.advance()?;
        self.skip()
    }

    fn stats(&self) -> StreamStats {
        self.inner.stats()
    }
}

/// Drains a stream into a vector.
pub fn collect_stream(s: &mut dyn LabelStream) -> Result<Vec<NodeLabel>> {
    let mut out = Vec::new();
    while let Some(h) = s.head() {
        out.push(h);
        s.advance()?;
    }
    Ok(out)
}
