//! XML event parsing and containment labeling.
//!
//! Every element, attribute and text node receives a [`NodeLabel`]: an
//! interval `[start, end]` drawn from a per-document counter plus the node's
//! depth. Ancestorship is strict interval containment, so structural axis
//! tests are constant time and never touch the document itself.

use std::cmp::Ordering;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

/// Reserved node name used for text nodes.
pub const TEXT_NAME: &str = "#text";

/// Prefix that distinguishes attribute names from element names.
pub const ATTRIBUTE_PREFIX: char = '@';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XmlError {
    #[error("malformed XML at offset {offset}: {message}")]
    MalformedXml { offset: usize, message: String },
}

impl XmlError {
    fn at(offset: usize, message: impl Into<String>) -> Self {
        XmlError::MalformedXml {
            offset,
            message: message.into(),
        }
    }

    pub fn offset(&self) -> usize {
        match self {
            XmlError::MalformedXml { offset, .. } => *offset,
        }
    }
}

/// Containment label of one XML node.
///
/// Field order matters: the derived ordering is document order, since
/// `start` is unique within a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeLabel {
    pub doc_id: u32,
    pub start: u32,
    pub end: u32,
    pub level: u32,
}

impl NodeLabel {
    pub const fn new(doc_id: u32, start: u32, end: u32, level: u32) -> Self {
        NodeLabel {
            doc_id,
            start,
            end,
            level,
        }
    }

    /// True iff `self` is a proper ancestor of `other`.
    #[inline]
    pub fn is_ancestor_of(&self, other: &NodeLabel) -> bool {
        self.doc_id == other.doc_id && self.start < other.start && other.end < self.end
    }

    /// True iff `self` is the parent of `other`.
    #[inline]
    pub fn is_parent_of(&self, other: &NodeLabel) -> bool {
        self.is_ancestor_of(other) && self.level + 1 == other.level
    }

    /// True iff `self` ends before `other` starts (or lives in an earlier document).
    #[inline]
    pub fn precedes_disjoint(&self, other: &NodeLabel) -> bool {
        self.doc_id < other.doc_id || (self.doc_id == other.doc_id && self.end < other.start)
    }
}

/// Document order: `(doc_id, start)` ascending.
pub fn doc_order_compare(a: &NodeLabel, b: &NodeLabel) -> Ordering {
    (a.doc_id, a.start).cmp(&(b.doc_id, b.start))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Element,
    Attribute,
    Text,
}

impl NodeKind {
    pub fn as_u8(self) -> u8 {
        match self {
            NodeKind::Element => 0,
            NodeKind::Attribute => 1,
            NodeKind::Text => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(NodeKind::Element),
            1 => Some(NodeKind::Attribute),
            2 => Some(NodeKind::Text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseEvent {
    StartElement(String),
    EndElement(String),
    Attribute(String, String),
    Text(String),
}

/// Streaming XML event source.
///
/// Comments, processing instructions, the XML declaration and the doctype
/// are dropped. Adjacent character data (including CDATA sections and text
/// split by comments) is merged into one [`ParseEvent::Text`]; merged text
/// consisting only of whitespace is dropped.
pub struct XmlEvents<'a> {
    reader: Reader<&'a [u8]>,
    input_len: usize,
    pending: std::collections::VecDeque<ParseEvent>,
    text: String,
    text_offset: usize,
    open: Vec<String>,
    seen_root: bool,
    finished: bool,
}

impl<'a> XmlEvents<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        let mut reader = Reader::from_reader(bytes);
        let config = reader.config_mut();
        config.trim_text(false);
        config.check_end_names = true;
        config.expand_empty_elements = true;
        XmlEvents {
            reader,
            input_len: bytes.len(),
            pending: Default::default(),
            text: String::new(),
            text_offset: 0,
            open: Vec::new(),
            seen_root: false,
            finished: false,
        }
    }

    fn byte_offset(&self) -> usize {
        self.reader.buffer_position() as usize
    }

    fn flush_text(&mut self) -> Result<(), XmlError> {
        if self.text.is_empty() {
            return Ok(());
        }
        let text = std::mem::take(&mut self.text);
        if text.chars().all(char::is_whitespace) {
            return Ok(());
        }
        if self.open.is_empty() {
            return Err(XmlError::at(self.text_offset, "text outside the root element"));
        }
        self.pending.push_back(ParseEvent::Text(text));
        Ok(())
    }

    fn push_text(&mut self, offset: usize, s: &str) {
        if self.text.is_empty() {
            self.text_offset = offset;
        }
        self.text.push_str(s);
    }

    fn start_element(&mut self, e: &BytesStart<'_>, offset: usize) -> Result<(), XmlError> {
        if self.open.is_empty() {
            if self.seen_root {
                return Err(XmlError::at(offset, "more than one root element"));
            }
            self.seen_root = true;
        }
        let name = utf8(e.name().as_ref(), offset)?.to_owned();
        self.pending.push_back(ParseEvent::StartElement(name.clone()));
        for attr in e.attributes() {
            let attr = attr.map_err(|err| XmlError::at(offset, err.to_string()))?;
            let key = utf8(attr.key.as_ref(), offset)?.to_owned();
            let value = attr
                .unescape_value()
                .map_err(|err| XmlError::at(offset, err.to_string()))?
                .into_owned();
            self.pending.push_back(ParseEvent::Attribute(key, value));
        }
        self.open.push(name);
        Ok(())
    }

    fn step(&mut self) -> Result<(), XmlError> {
        let offset = self.byte_offset();
        let event = self
            .reader
            .read_event()
            .map_err(|err| XmlError::at(self.reader.error_position() as usize, err.to_string()))?;
        match event {
            Event::Start(e) => {
                self.flush_text()?;
                self.start_element(&e, offset)?;
            }
            Event::Empty(e) => {
                // unreachable with expand_empty_elements, kept for completeness
                self.flush_text()?;
                self.start_element(&e, offset)?;
                let name = self.open.pop().unwrap_or_default();
                self.pending.push_back(ParseEvent::EndElement(name));
            }
            Event::End(e) => {
                self.flush_text()?;
                let name = utf8(e.name().as_ref(), offset)?.to_owned();
                match self.open.pop() {
                    Some(open) if open == name => {
                        self.pending.push_back(ParseEvent::EndElement(name));
                    }
                    Some(open) => {
                        return Err(XmlError::at(
                            offset,
                            format!("expected </{open}>, found </{name}>"),
                        ))
                    }
                    None => return Err(XmlError::at(offset, format!("unexpected </{name}>"))),
                }
            }
            Event::Text(t) => {
                let s = t
                    .unescape()
                    .map_err(|err| XmlError::at(offset, err.to_string()))?;
                self.push_text(offset, &s);
            }
            Event::CData(c) => {
                let raw = c.into_inner();
                let s = utf8(&raw, offset)?.to_owned();
                self.push_text(offset, &s);
            }
            Event::Comment(_) | Event::PI(_) | Event::Decl(_) | Event::DocType(_) => {}
            Event::Eof => {
                self.flush_text()?;
                if let Some(open) = self.open.last() {
                    return Err(XmlError::at(self.input_len, format!("unclosed element <{open}>")));
                }
                if !self.seen_root {
                    return Err(XmlError::at(self.input_len, "document has no root element"));
                }
                self.finished = true;
            }
        }
        Ok(())
    }
}

impl Iterator for XmlEvents<'_> {
    type Item = Result<ParseEvent, XmlError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(ev) = self.pending.pop_front() {
                return Some(Ok(ev));
            }
            if self.finished {
                return None;
            }
            if let Err(err) = self.step() {
                self.finished = true;
                self.pending.clear();
                return Some(Err(err));
            }
        }
    }
}

fn utf8(bytes: &[u8], offset: usize) -> Result<&str, XmlError> {
    std::str::from_utf8(bytes).map_err(|_| XmlError::at(offset, "invalid UTF-8"))
}

/// Parses a complete document into its event sequence.
pub fn parse_xml(bytes: &[u8]) -> Result<Vec<ParseEvent>, XmlError> {
    XmlEvents::new(bytes).collect()
}

/// One labeled node, in document order, before dictionary encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledNode {
    pub label: NodeLabel,
    pub kind: NodeKind,
    /// Element name, `@`-prefixed attribute name, or [`TEXT_NAME`].
    pub name: String,
    /// Attribute value or text content; `None` for elements.
    pub value: Option<String>,
}

/// Assigns containment labels to a well-nested event sequence.
///
/// Errors carry the index of the offending event as their offset.
pub fn assign_labels<I>(doc_id: u32, events: I) -> Result<Vec<LabeledNode>, XmlError>
where
    I: IntoIterator<Item = ParseEvent>,
{
    label_events(doc_id, events.into_iter().map(Ok))
}

/// Parses and labels a document in one pass.
pub fn label_document(doc_id: u32, bytes: &[u8]) -> Result<Vec<LabeledNode>, XmlError> {
    label_events(doc_id, XmlEvents::new(bytes))
}

fn label_events<I>(doc_id: u32, events: I) -> Result<Vec<LabeledNode>, XmlError>
where
    I: Iterator<Item = Result<ParseEvent, XmlError>>,
{
    let mut out: Vec<LabeledNode> = Vec::new();
    // indexes into `out` of currently open elements
    let mut open: Vec<usize> = Vec::new();
    let mut counter: u32 = 1;
    let mut roots = 0usize;
    // attributes are legal only directly after their owner's start tag
    let mut attrs_allowed = false;

    for (idx, event) in events.enumerate() {
        match event? {
            ParseEvent::StartElement(name) => {
                if open.is_empty() {
                    roots += 1;
                    if roots > 1 {
                        return Err(XmlError::at(idx, "more than one root element"));
                    }
                }
                out.push(LabeledNode {
                    label: NodeLabel::new(doc_id, counter, 0, open.len() as u32),
                    kind: NodeKind::Element,
                    name,
                    value: None,
                });
                counter += 1;
                open.push(out.len() - 1);
                attrs_allowed = true;
            }
            ParseEvent::EndElement(name) => {
                let Some(pos) = open.pop() else {
                    return Err(XmlError::at(idx, format!("unexpected end of <{name}>")));
                };
                if out[pos].name != name {
                    return Err(XmlError::at(
                        idx,
                        format!("expected end of <{}>, found <{name}>", out[pos].name),
                    ));
                }
                out[pos].label.end = counter;
                counter += 1;
                attrs_allowed = false;
            }
            ParseEvent::Attribute(name, value) => {
                if !attrs_allowed || open.is_empty() {
                    return Err(XmlError::at(idx, format!("attribute {name} outside a start tag")));
                }
                let level = open.len() as u32;
                out.push(LabeledNode {
                    label: NodeLabel::new(doc_id, counter, counter + 1, level),
                    kind: NodeKind::Attribute,
                    name: format!("{ATTRIBUTE_PREFIX}{name}"),
                    value: Some(value),
                });
                counter += 2;
            }
            ParseEvent::Text(value) => {
                if open.is_empty() {
                    return Err(XmlError::at(idx, "text outside the root element"));
                }
                let level = open.len() as u32;
                out.push(LabeledNode {
                    label: NodeLabel::new(doc_id, counter, counter + 1, level),
                    kind: NodeKind::Text,
                    name: TEXT_NAME.to_owned(),
                    value: Some(value),
                });
                counter += 2;
                attrs_allowed = false;
            }
        }
    }
    if let Some(&pos) = open.last() {
        return Err(XmlError::at(usize::MAX, format!("unclosed element <{}>", out[pos].name)));
    }
    if roots == 0 {
        return Err(XmlError::at(0, "document has no root element"));
    }
    Ok(out)
}
