//! Collection directory: build, commit, open, and index access.
//!
//! Files: `names.dict`, `doc.idx`, `doc.val`, `part.idx`, `part.post`,
//! `value.idx`, `value.post`, `meta`. The meta file records the length of
//! every other file and a CRC over itself, so truncation or tampering is
//! detected at open.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::btree::BTree;
use super::dict::NameDictionary;
use super::pager::{cache_pages_from_env, DEFAULT_PAGE_SIZE};
use super::paged_array::{ByteHeap, ByteHeapWriter, RecordCursor, RecordFile, RecordFileWriter, ValueRef};
use super::stream::{
    encode_label, encode_value_posting, BoxedStream, DifferenceStream, EmptyStream, MergeStream, PostingStream,
    Verifier, LABEL_RECORD, VALUE_POSTING_RECORD,
};
use super::value_key::{self, MAX_VALUE_KEY, NUMBER_FAMILY, STRING_FAMILY};
use super::{Result, StorageError};
use crate::labeling::{label_document, NodeKind, NodeLabel};
use crate::query::{parse_decimal, CompOp, Literal, ValuePredicate};

const META_MAGIC: &[u8; 5] = b"RXDB1";
const FORMAT_VERSION: u32 = 1;

pub const NAMES_FILE: &str = "names.dict";
pub const DOC_INDEX_FILE: &str = "doc.idx";
pub const DOC_VALUES_FILE: &str = "doc.val";
pub const PART_INDEX_FILE: &str = "part.idx";
pub const PART_POSTINGS_FILE: &str = "part.post";
pub const VALUE_INDEX_FILE: &str = "value.idx";
pub const VALUE_POSTINGS_FILE: &str = "value.post";
pub const META_FILE: &str = "meta";

const DATA_FILES: [&str; 7] = [
    NAMES_FILE,
    DOC_INDEX_FILE,
    DOC_VALUES_FILE,
    PART_INDEX_FILE,
    PART_POSTINGS_FILE,
    VALUE_INDEX_FILE,
    VALUE_POSTINGS_FILE,
];

/// Entry of the document index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRecord {
    pub label: NodeLabel,
    pub name_id: u32,
    pub kind: NodeKind,
    pub value_ref: Option<ValueRef>,
}

const DOC_ENTRY_LEN: usize = 22;

fn doc_key(doc_id: u32, start: u32) -> [u8; 8] {
    let mut k = [0u8; 8];
    k[..4].copy_from_slice(&doc_id.to_be_bytes());
    k[4..].copy_from_slice(&start.to_be_bytes());
    k
}

impl NodeRecord {
    fn encode_entry(&self) -> [u8; DOC_ENTRY_LEN] {
        let mut b = [0u8; DOC_ENTRY_LEN];
        b[0..4].copy_from_slice(&self.label.end.to_le_bytes());
        b[4..8].copy_from_slice(&self.label.level.to_le_bytes());
        b[8..12].copy_from_slice(&self.name_id.to_le_bytes());
        b[12] = self.kind.as_u8();
        if let Some(v) = self.value_ref {
            b[13] = 1;
            b[14..22].copy_from_slice(&v.to_le_bytes());
        }
        b
    }

    fn decode(key: &[u8], entry: &[u8]) -> Result<Self> {
        if key.len() != 8 || entry.len() != DOC_ENTRY_LEN {
            return Err(StorageError::Corrupt("malformed document index entry".into()));
        }
        let u = |b: &[u8], i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let doc_id = u32::from_be_bytes(key[..4].try_into().unwrap());
        let start = u32::from_be_bytes(key[4..].try_into().unwrap());
        let kind = NodeKind::from_u8(entry[12]).ok_or_else(|| StorageError::Corrupt("bad node kind".into()))?;
        let value_ref = (entry[13] == 1).then(|| u64::from_le_bytes(entry[14..22].try_into().unwrap()));
        Ok(NodeRecord {
            label: NodeLabel::new(doc_id, start, u(entry, 0), u(entry, 4)),
            name_id: u(entry, 8),
            kind,
            value_ref,
        })
    }
}

/// A document-index record together with its resolved value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredNode {
    pub record: NodeRecord,
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DocStats {
    pub doc_id: u32,
    pub source: String,
    pub root: NodeLabel,
    pub elements: u64,
    pub attributes: u64,
    pub texts: u64,
    /// Nodes on the longest root-to-node path, attribute and text leaves included.
    pub max_depth: u32,
}

impl DocStats {
    /// Element and attribute nodes.
    pub fn nodes(&self) -> u64 {
        self.elements + self.attributes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CollectionStats {
    pub documents: u64,
    pub elements: u64,
    pub attributes: u64,
    pub texts: u64,
    pub max_depth: u32,
    pub distinct_names: u64,
    pub size_on_disk: u64,
}

impl CollectionStats {
    /// Element and attribute nodes, the convention used by the usual dataset tables.
    pub fn nodes(&self) -> u64 {
        self.elements + self.attributes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Meta {
    page_size: u32,
    docs: Vec<DocStats>,
    file_lens: Vec<(String, u64)>,
    names_crc: u32,
}

impl Meta {
    fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(META_MAGIC);
        b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        b.extend_from_slice(&self.page_size.to_le_bytes());
        b.extend_from_slice(&(self.docs.len() as u32).to_le_bytes());
        for d in &self.docs {
            b.extend_from_slice(&d.doc_id.to_le_bytes());
            b.extend_from_slice(&d.root.start.to_le_bytes());
            b.extend_from_slice(&d.root.end.to_le_bytes());
            b.extend_from_slice(&d.elements.to_le_bytes());
            b.extend_from_slice(&d.attributes.to_le_bytes());
            b.extend_from_slice(&d.texts.to_le_bytes());
            b.extend_from_slice(&d.max_depth.to_le_bytes());
            b.extend_from_slice(&(d.source.len() as u32).to_le_bytes());
            b.extend_from_slice(d.source.as_bytes());
        }
        b.extend_from_slice(&(self.file_lens.len() as u32).to_le_bytes());
        for (name, len) in &self.file_lens {
            b.push(name.len() as u8);
            b.extend_from_slice(name.as_bytes());
            b.extend_from_slice(&len.to_le_bytes());
        }
        b.extend_from_slice(&self.names_crc.to_le_bytes());
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        b
    }

    fn decode(bytes: &[u8]) -> Result<Meta> {
        let corrupt = |m: &str| StorageError::Corrupt(format!("meta: {m}"));
        if bytes.len() < META_MAGIC.len() + 4 || &bytes[..META_MAGIC.len()] != META_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader {
            buf: body,
            pos: META_MAGIC.len(),
        };
        if r.u32()? != FORMAT_VERSION {
            return Err(corrupt("unsupported format version"));
        }
        let page_size = r.u32()?;
        let ndocs = r.u32()?;
        let mut docs = Vec::with_capacity(ndocs as usize);
        for _ in 0..ndocs {
            let doc_id = r.u32()?;
            let start = r.u32()?;
            let end = r.u32()?;
            let elements = r.u64()?;
            let attributes = r.u64()?;
            let texts = r.u64()?;
            let max_depth = r.u32()?;
            let n = r.u32()? as usize;
            let source = String::from_utf8(r.bytes(n)?.to_vec()).map_err(|_| corrupt("bad source name"))?;
            docs.push(DocStats {
                doc_id,
                source,
                root: NodeLabel::new(doc_id, start, end, 0),
                elements,
                attributes,
                texts,
                max_depth,
            });
        }
        let nfiles = r.u32()?;
        let mut file_lens = Vec::new();
        for _ in 0..nfiles {
            let n = r.bytes(1)?[0] as usize;
            let name = String::from_utf8(r.bytes(n)?.to_vec()).map_err(|_| corrupt("bad file name"))?;
            file_lens.push((name, r.u64()?));
        }
        let names_crc = r.u32()?;
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Meta {
            page_size,
            docs,
            file_lens,
            names_crc,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .buf
            .get(self.pos..self.pos + n)
            .ok_or_else(|| StorageError::Corrupt("meta: truncated".into()))?;
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

fn extent_entry(offset: u64, count: u64) -> Vec<u8> {
    let mut v = Vec::with_capacity(16);
    v.extend_from_slice(&offset.to_le_bytes());
    v.extend_from_slice(&count.to_le_bytes());
    v
}

fn decode_extent(entry: &[u8]) -> Result<(u64, u64)> {
    if entry.len() != 16 {
        return Err(StorageError::Corrupt("malformed posting extent".into()));
    }
    Ok((
        u64::from_le_bytes(entry[..8].try_into().unwrap()),
        u64::from_le_bytes(entry[8..].try_into().unwrap()),
    ))
}

fn staging_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

struct OpenElement {
    label: NodeLabel,
    name_id: u32,
    first_text: Option<ValueRef>,
    content: String,
    text_count: u32,
}

/// Single-writer loader. Nothing becomes visible at the target path until
/// [`CollectionBuilder::commit`]; dropping an uncommitted builder removes its staging directory.
pub struct CollectionBuilder {
    target: PathBuf,
    staging: PathBuf,
    page_size: usize,
    names: NameDictionary,
    values: Option<ByteHeapWriter>,
    records: Vec<NodeRecord>,
    partitions: Vec<Vec<NodeLabel>>,
    value_postings: BTreeMap<Vec<u8>, Vec<(NodeLabel, ValueRef)>>,
    docs: Vec<DocStats>,
    committed: bool,
}

impl CollectionBuilder {
    pub fn create(path: &Path) -> Result<Self> {
        Self::create_with_page_size(path, DEFAULT_PAGE_SIZE)
    }

    pub fn create_with_page_size(path: &Path, page_size: usize) -> Result<Self> {
        if path.exists() {
            return Err(StorageError::AlreadyExists(path.display().to_string()));
        }
        let staging = staging_path(path);
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        let values = ByteHeapWriter::create(&staging.join(DOC_VALUES_FILE), page_size)?;
        Ok(CollectionBuilder {
            target: path.to_path_buf(),
            staging,
            page_size,
            names: NameDictionary::new(),
            values: Some(values),
            records: Vec::new(),
            partitions: Vec::new(),
            value_postings: BTreeMap::new(),
            docs: Vec::new(),
            committed: false,
        })
    }

    pub fn documents(&self) -> &[DocStats] {
        &self.docs
    }

    /// Parses, labels and stages one document. A malformed document leaves the builder unchanged.
    pub fn load_document(&mut self, source: &str, bytes: &[u8]) -> Result<DocStats> {
        let doc_id = self.docs.len() as u32;
        let nodes = label_document(doc_id, bytes)?;
        let values = self.values.as_mut().expect("builder already committed");
        let mut stats = DocStats {
            doc_id,
            source: source.to_owned(),
            root: nodes[0].label,
            ..Default::default()
        };
        let mut open: Vec<OpenElement> = Vec::new();

        for node in nodes {
            while open.last().is_some_and(|e| e.label.end < node.label.start) {
                let e = open.pop().unwrap();
                close_element(e, values, &mut self.value_postings)?;
            }
            let name_id = self.names.intern(&node.name);
            if self.partitions.len() <= name_id as usize {
                self.partitions.resize_with(name_id as usize + 1, Vec::new);
            }
            self.partitions[name_id as usize].push(node.label);
            stats.max_depth = stats.max_depth.max(node.label.level + 1);
            let value_ref = match (&node.kind, &node.value) {
                (NodeKind::Element, _) => {
                    stats.elements += 1;
                    open.push(OpenElement {
                        label: node.label,
                        name_id,
                        first_text: None,
                        content: String::new(),
                        text_count: 0,
                    });
                    None
                }
                (NodeKind::Attribute, Some(v)) => {
                    stats.attributes += 1;
                    let at = values.append(v.as_bytes())?;
                    add_value_postings(&mut self.value_postings, name_id, v, node.label, at);
                    Some(at)
                }
                (NodeKind::Text, Some(v)) => {
                    stats.texts += 1;
                    let at = values.append(v.as_bytes())?;
                    if let Some(owner) = open.last_mut() {
                        owner.first_text.get_or_insert(at);
                        owner.content.push_str(v);
                        owner.text_count += 1;
                    }
                    Some(at)
                }
                _ => unreachable!("attribute and text nodes carry values"),
            };
            self.records.push(NodeRecord {
                label: node.label,
                name_id,
                kind: node.kind,
                value_ref,
            });
        }
        while let Some(e) = open.pop() {
            close_element(e, values, &mut self.value_postings)?;
        }
        self.docs.push(stats.clone());
        Ok(stats)
    }

    /// Writes all indexes, publishes the collection at its path, and opens it.
    pub fn commit(mut self) -> Result<Collection> {
        let dir = self.staging.clone();
        let ps = self.page_size;
        self.values.take().expect("builder already committed").finish()?;

        let records = std::mem::take(&mut self.records);
        BTree::bulk_load(
            &dir.join(DOC_INDEX_FILE),
            ps,
            64,
            records
                .iter()
                .map(|r| (doc_key(r.label.doc_id, r.label.start).to_vec(), r.encode_entry().to_vec())),
        )?;
        drop(records);

        let mut post = RecordFileWriter::create(&dir.join(PART_POSTINGS_FILE), ps, LABEL_RECORD)?;
        let mut part_idx = BTree::create(&dir.join(PART_INDEX_FILE), ps, 64)?;
        for (name_id, labels) in std::mem::take(&mut self.partitions).into_iter().enumerate() {
            if labels.is_empty() {
                continue;
            }
            let offset = post.len();
            for l in &labels {
                post.push(&encode_label(l))?;
            }
            part_idx.insert(&(name_id as u32).to_be_bytes(), &extent_entry(offset, labels.len() as u64))?;
        }
        post.finish()?;
        part_idx.flush()?;

        let mut vpost = RecordFileWriter::create(&dir.join(VALUE_POSTINGS_FILE), ps, VALUE_POSTING_RECORD)?;
        let mut entries = Vec::with_capacity(self.value_postings.len());
        for (key, mut postings) in std::mem::take(&mut self.value_postings) {
            postings.sort_by_key(|p| p.0);
            let offset = vpost.len();
            for (l, at) in &postings {
                vpost.push(&encode_value_posting(l, *at))?;
            }
            entries.push((key, extent_entry(offset, postings.len() as u64)));
        }
        vpost.finish()?;
        BTree::bulk_load(&dir.join(VALUE_INDEX_FILE), ps, 64, entries)?;

        let names = self.names.encode();
        fs::write(dir.join(NAMES_FILE), &names)?;

        let mut file_lens = Vec::new();
        for f in DATA_FILES {
            file_lens.push((f.to_owned(), fs::metadata(dir.join(f))?.len()));
        }
        let meta = Meta {
            page_size: ps as u32,
            docs: std::mem::take(&mut self.docs),
            file_lens,
            names_crc: crc32fast::hash(&names),
        };
        fs::write(dir.join(META_FILE), meta.encode())?;
        fs::File::open(dir.join(META_FILE))?.sync_all()?;

        fs::rename(&self.staging, &self.target)?;
        self.committed = true;
        Collection::open(&self.target)
    }

    /// Discards everything staged so far.
    pub fn abort(self) {}
}

impl Drop for CollectionBuilder {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

fn add_value_postings(
    postings: &mut BTreeMap<Vec<u8>, Vec<(NodeLabel, ValueRef)>>,
    name_id: u32,
    value: &str,
    label: NodeLabel,
    at: ValueRef,
) {
    let (key, _) = value_key::string_key(name_id, value.as_bytes());
    postings.entry(key).or_default().push((label, at));
    if let Some(n) = parse_decimal(value) {
        postings
            .entry(value_key::number_key(name_id, n))
            .or_default()
            .push((label, at));
    }
}

fn close_element(
    e: OpenElement,
    values: &mut ByteHeapWriter,
    postings: &mut BTreeMap<Vec<u8>, Vec<(NodeLabel, ValueRef)>>,
) -> Result<()> {
    let at = match (e.text_count, e.first_text) {
        (0, _) => return Ok(()),
        (1, Some(at)) => at,
        _ => values.append(e.content.as_bytes())?,
    };
    add_value_postings(postings, e.name_id, &e.content, e.label, at);
    Ok(())
}

/// A committed, read-only collection. Safe to share between threads.
pub struct Collection {
    path: PathBuf,
    meta: Meta,
    names: NameDictionary,
    doc_index: BTree,
    doc_values: Arc<ByteHeap>,
    part_index: BTree,
    part_post: Arc<RecordFile>,
    value_index: BTree,
    value_post: Arc<RecordFile>,
}

enum KeyChoice {
    Skip,
    Take,
    Verify,
}

impl Collection {
    pub fn open(path: &Path) -> Result<Self> {
        Self::open_with_cache(path, cache_pages_from_env())
    }

    pub fn open_with_cache(path: &Path, cache_pages: usize) -> Result<Self> {
        let meta_bytes = fs::read(path.join(META_FILE)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => StorageError::Corrupt(format!("{}: missing meta file", path.display())),
            _ => e.into(),
        })?;
        let meta = Meta::decode(&meta_bytes)?;
        for (name, len) in &meta.file_lens {
            let actual = fs::metadata(path.join(name))
                .map_err(|_| StorageError::Corrupt(format!("missing {name}")))?
                .len();
            if actual != *len {
                return Err(StorageError::Corrupt(format!("{name}: expected {len} bytes, found {actual}")));
            }
        }
        if meta.file_lens.len() != DATA_FILES.len() {
            return Err(StorageError::Corrupt("meta: incomplete file table".into()));
        }
        let names_bytes = fs::read(path.join(NAMES_FILE))?;
        if crc32fast::hash(&names_bytes) != meta.names_crc {
            return Err(StorageError::Corrupt("names.dict: checksum mismatch".into()));
        }
        let names = NameDictionary::decode(&names_bytes)?;
        let ps = meta.page_size as usize;
        Ok(Collection {
            path: path.to_path_buf(),
            names,
            doc_index: BTree::open(&path.join(DOC_INDEX_FILE), ps, cache_pages)?,
            doc_values: Arc::new(ByteHeap::open(&path.join(DOC_VALUES_FILE), ps, cache_pages)?),
            part_index: BTree::open(&path.join(PART_INDEX_FILE), ps, cache_pages)?,
            part_post: Arc::new(RecordFile::open(&path.join(PART_POSTINGS_FILE), ps, LABEL_RECORD, cache_pages)?),
            value_index: BTree::open(&path.join(VALUE_INDEX_FILE), ps, cache_pages)?,
            value_post: Arc::new(RecordFile::open(
                &path.join(VALUE_POSTINGS_FILE),
                ps,
                VALUE_POSTING_RECORD,
                cache_pages,
            )?),
            meta,
        })
    }

    pub fn close(self) {}

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn names(&self) -> &NameDictionary {
        &self.names
    }

    pub fn name_id(&self, name: &str) -> Option<u32> {
        self.names.id(name)
    }

    pub fn documents(&self) -> &[DocStats] {
        &self.meta.docs
    }

    pub fn stats(&self) -> CollectionStats {
        let mut s = CollectionStats {
            documents: self.meta.docs.len() as u64,
            distinct_names: self.names.len() as u64,
            ..Default::default()
        };
        for d in &self.meta.docs {
            s.elements += d.elements;
            s.attributes += d.attributes;
            s.texts += d.texts;
            s.max_depth = s.max_depth.max(d.max_depth);
        }
        s.size_on_disk = DATA_FILES
            .iter()
            .chain(std::iter::once(&META_FILE))
            .filter_map(|f| fs::metadata(self.path.join(f)).ok())
            .map(|m| m.len())
            .sum();
        s
    }

    /// Point query on the document index, with the value resolved.
    pub fn doc_get(&self, label: &NodeLabel) -> Result<StoredNode> {
        let key = doc_key(label.doc_id, label.start);
        let entry = self
            .doc_index
            .get(&key)?
            .ok_or_else(|| StorageError::NotFound(format!("node ({}, {})", label.doc_id, label.start)))?;
        let record = NodeRecord::decode(&key, &entry)?;
        let value = record.value_ref.map(|at| self.doc_values.get_string(at)).transpose()?;
        Ok(StoredNode { record, value })
    }

    /// All descendants of `label`, in document order.
    pub fn doc_subtree(&self, label: &NodeLabel) -> Result<Vec<NodeRecord>> {
        let node = self.doc_get(label)?.record;
        if node.label.start + 1 >= node.label.end {
            return Ok(Vec::new());
        }
        self.doc_range(label.doc_id, node.label.start + 1, node.label.end - 1)
    }

    /// Every record of one document, root first.
    pub fn doc_scan(&self, doc_id: u32) -> Result<Vec<NodeRecord>> {
        self.doc_range(doc_id, 0, u32::MAX)
    }

    fn doc_range(&self, doc_id: u32, lo: u32, hi: u32) -> Result<Vec<NodeRecord>> {
        self.doc_index
            .range(&doc_key(doc_id, lo), &doc_key(doc_id, hi))?
            .map(|r| r.and_then(|(k, v)| NodeRecord::decode(&k, &v)))
            .collect()
    }

    pub fn value(&self, at: ValueRef) -> Result<String> {
        self.doc_values.get_string(at)
    }

    /// Posting length of a name in the partition index (0 for unknown names).
    pub fn partition_len(&self, name_id: u32) -> Result<u64> {
        Ok(match self.part_index.get(&name_id.to_be_bytes())? {
            Some(e) => decode_extent(&e)?.1,
            None => 0,
        })
    }

    pub fn partition_stream(&self, name_id: u32) -> Result<BoxedStream> {
        let Some(entry) = self.part_index.get(&name_id.to_be_bytes())? else {
            return Ok(Box::new(EmptyStream));
        };
        let (offset, count) = decode_extent(&entry)?;
        let cursor = RecordCursor::new(Arc::clone(&self.part_post), offset, offset + count)?;
        Ok(Box::new(PostingStream::labels(cursor)?))
    }

    pub fn partition_stream_by_name(&self, name: &str) -> Result<BoxedStream> {
        match self.name_id(name) {
            Some(id) => self.partition_stream(id),
            None => Ok(Box::new(EmptyStream)),
        }
    }

    /// Owners (attributes, or elements by their direct text) whose value satisfies `pred`.
    pub fn value_stream(&self, name_id: u32, pred: &ValuePredicate) -> Result<BoxedStream> {
        if pred.op == CompOp::Ne {
            let all = self.value_scan(name_id, pred, |_| KeyChoice::Take)?;
            let eq = self.value_stream(name_id, &ValuePredicate::new(CompOp::Eq, pred.literal.clone()))?;
            return Ok(Box::new(DifferenceStream::new(all, eq)?));
        }
        match &pred.literal {
            Literal::Number { value: lit, .. } => {
                let lit = *lit;
                let op = pred.op;
                self.value_scan(name_id, pred, move |payload| {
                    let v = value_key::decode_ordered_f64(payload);
                    match v.partial_cmp(&lit) {
                        Some(ord) if op.holds(ord) => KeyChoice::Take,
                        _ => KeyChoice::Skip,
                    }
                })
            }
            Literal::String(_) => {
                let pred_c = pred.clone();
                self.value_scan(name_id, pred, move |payload| {
                    if payload.len() >= MAX_VALUE_KEY {
                        return KeyChoice::Verify;
                    }
                    match std::str::from_utf8(payload) {
                        Ok(v) if pred_c.matches(v) => KeyChoice::Take,
                        _ => KeyChoice::Skip,
                    }
                })
            }
        }
    }

    pub fn value_stream_by_name(&self, name: &str, pred: &ValuePredicate) -> Result<BoxedStream> {
        match self.name_id(name) {
            Some(id) => self.value_stream(id, pred),
            None => Ok(Box::new(EmptyStream)),
        }
    }

    /// Scans the key range implied by `pred` (the whole family for `!=`) and
    /// merges the postings of every key `choose` accepts.
    fn value_scan(
        &self,
        name_id: u32,
        pred: &ValuePredicate,
        choose: impl Fn(&[u8]) -> KeyChoice,
    ) -> Result<BoxedStream> {
        let (family, point) = match &pred.literal {
            Literal::Number { value, .. } => (NUMBER_FAMILY, value_key::number_key(name_id, *value)),
            Literal::String(s) => (STRING_FAMILY, value_key::string_key(name_id, s.as_bytes()).0),
        };
        let (lo, hi) = value_key::family_bounds(name_id, family);
        let (low, high) = match pred.op {
            CompOp::Eq => (point.clone(), point),
            CompOp::Lt | CompOp::Le => (lo, point),
            CompOp::Gt | CompOp::Ge => (point, hi),
            CompOp::Ne => (lo, hi),
        };
        let mut inputs: Vec<BoxedStream> = Vec::new();
        for item in self.value_index.range(&low, &high)? {
            let (key, entry) = item?;
            let verify = match choose(value_key::payload(&key)) {
                KeyChoice::Skip => continue,
                KeyChoice::Take => None,
                KeyChoice::Verify => Some(Verifier {
                    heap: Arc::clone(&self.doc_values),
                    pred: pred.clone(),
                }),
            };
            let (offset, count) = decode_extent(&entry)?;
            let cursor = RecordCursor::new(Arc::clone(&self.value_post), offset, offset + count)?;
            inputs.push(Box::new(PostingStream::values(cursor, verify)?));
        }
        Ok(match inputs.len() {
            0 => Box::new(EmptyStream),
            1 => inputs.pop().unwrap(),
            _ => Box::new(MergeStream::new(inputs)),
        })
    }
}
