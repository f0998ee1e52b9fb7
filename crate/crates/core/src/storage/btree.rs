//! Paged B+-tree over byte-string keys and entries.
//!
//! ```text
//! page 0   header: magic "RXBT" | version u32 | page_size u32 | root u32 | height u32 | len u64
//! leaf     kind=1 u8 | count u16 | next u32 | (klen u16, vlen u16, key, value)*
//! internal kind=2 u8 | count u16 | first_child u32 | (klen u16, key, child u32)*
//! ```
//! Keys compare bytewise. Child `i` of an internal node holds keys in
//! `[key_i, key_{i+1})`; `first_child` holds keys below `key_1`. All leaves
//! sit at the same depth and are chained left to right through `next`.

use std::path::Path;
use std::sync::Arc;

use super::pager::{PageRef, Pager};
use super::{Result, StorageError};

const MAGIC: &[u8; 4] = b"RXBT";
const VERSION: u32 = 1;
const LEAF: u8 = 1;
const INTERNAL: u8 = 2;
const NODE_HEADER: usize = 7;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        entries: Vec<(Vec<u8>, Vec<u8>)>,
        next: u32,
    },
    Internal {
        first: u32,
        entries: Vec<(Vec<u8>, u32)>,
    },
}

impl Node {
    fn encoded_len(&self) -> usize {
        NODE_HEADER
            + match self {
                Node::Leaf { entries, .. } => entries.iter().map(|(k, v)| 4 + k.len() + v.len()).sum::<usize>(),
                Node::Internal { entries, .. } => entries.iter().map(|(k, _)| 6 + k.len()).sum::<usize>(),
            }
    }

    fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        match self {
            Node::Leaf { entries, next } => {
                buf.push(LEAF);
                buf.extend_from_slice(&(entries.len() as u16).to_le_bytes());
                buf.extend_from_slice(&next.to_le_bytes());
                for (k, v) in entries {
                    buf.extend_from_slice(&(k.len() as u16).to_le_bytes());
                    buf.extend_from_slice(&(v.len() as u16).to_le_bytes());
                    buf.extend_from_slice(k);
                    buf.extend_from_slice(v);
                }
            }
            Node::Internal { first, entries } => {
                buf.push(INTERNAL);
                buf.extend_from_slice(&(entries.len() as u16).to_le_bytes());
                buf.extend_from_slice(&first.to_le_bytes());
                for (k, c) in entries {
                    buf.extend_from_slice(&(k.len() as u16).to_le_bytes());
                    buf.extend_from_slice(k);
                    buf.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        buf
    }

    fn decode(page: &[u8]) -> Result<Node> {
        let corrupt = || StorageError::Corrupt("malformed B+-tree node".into());
        let count = u16::from_le_bytes([page[1], page[2]]) as usize;
        let link = u32::from_le_bytes(page[3..7].try_into().unwrap());
        let mut pos = NODE_HEADER;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = page.get(pos..pos + n).ok_or_else(corrupt)?;
            pos += n;
            Ok(s)
        };
        match page[0] {
            LEAF => {
                let mut entries = Vec::with_capacity(count);
                for _ in 0..count {
                    let kl = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
                    let vl = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
                    let k = take(kl)?.to_vec();
                    let v = take(vl)?.to_vec();
                    entries.push((k, v));
                }
                Ok(Node::Leaf { entries, next: link })
            }
            INTERNAL => {
                let mut entries = Vec::with_capacity(count);
                for _ in 0..count {
                    let kl = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
                    let k = take(kl)?.to_vec();
                    let c = u32::from_le_bytes(take(4)?.try_into().unwrap());
                    entries.push((k, c));
                }
                Ok(Node::Internal { first: link, entries })
            }
            _ => Err(corrupt()),
        }
    }
}

/// Child page to follow for `key`, reading the internal node in place.
fn route(page: &[u8], key: &[u8]) -> Result<u32> {
    let count = u16::from_le_bytes([page[1], page[2]]) as usize;
    let mut child = u32::from_le_bytes(page[3..7].try_into().unwrap());
    let mut pos = NODE_HEADER;
    for _ in 0..count {
        let kl = u16::from_le_bytes([page[pos], page[pos + 1]]) as usize;
        let k = page
            .get(pos + 2..pos + 2 + kl)
            .ok_or_else(|| StorageError::Corrupt("malformed internal node".into()))?;
        if k > key {
            break;
        }
        child = u32::from_le_bytes(page[pos + 2 + kl..pos + 6 + kl].try_into().unwrap());
        pos += 6 + kl;
    }
    Ok(child)
}

pub struct BTree {
    pager: Arc<Pager>,
    root: u32,
    height: u32,
    len: u64,
}

impl BTree {
    /// Largest key + entry payload accepted; guarantees every split leaves both halves non-empty.
    pub fn max_entry_len(page_size: usize) -> usize {
        (page_size - NODE_HEADER) / 4
    }

    pub fn create(path: &Path, page_size: usize, cache_pages: usize) -> Result<Self> {
        let pager = Arc::new(Pager::create(path, page_size, cache_pages)?);
        let header = pager.allocate();
        debug_assert_eq!(header, 0);
        let root = pager.allocate();
        pager.write(root, &Node::Leaf { entries: vec![], next: 0 }.encode())?;
        let tree = BTree {
            pager,
            root,
            height: 1,
            len: 0,
        };
        tree.write_header()?;
        Ok(tree)
    }

    pub fn open(path: &Path, page_size: usize, cache_pages: usize) -> Result<Self> {
        let pager = Arc::new(Pager::open(path, page_size, cache_pages)?);
        let h = pager.read(0)?;
        if &h[0..4] != MAGIC
            || u32::from_le_bytes(h[4..8].try_into().unwrap()) != VERSION
            || u32::from_le_bytes(h[8..12].try_into().unwrap()) as usize != page_size
        {
            return Err(StorageError::Corrupt(format!("{}: bad B+-tree header", path.display())));
        }
        let root = u32::from_le_bytes(h[12..16].try_into().unwrap());
        let height = u32::from_le_bytes(h[16..20].try_into().unwrap());
        let len = u64::from_le_bytes(h[20..28].try_into().unwrap());
        if root == 0 || root >= pager.page_count() || height == 0 {
            return Err(StorageError::Corrupt(format!("{}: bad B+-tree root", path.display())));
        }
        Ok(BTree {
            pager,
            root,
            height,
            len,
        })
    }

    /// Builds a tree from strictly ascending keys, packing leaves left to right.
    pub fn bulk_load<I>(path: &Path, page_size: usize, cache_pages: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, Vec<u8>)>,
    {
        let pager = Arc::new(Pager::create(path, page_size, cache_pages)?);
        pager.allocate();
        let max = Self::max_entry_len(page_size);

        let mut level: Vec<(Vec<u8>, u32)> = Vec::new();
        let mut leaf: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
        let mut leaf_bytes = NODE_HEADER;
        let mut leaf_page = pager.allocate();
        let mut len = 0u64;
        let mut last: Option<Vec<u8>> = None;

        for (k, v) in entries {
            if k.len() + v.len() > max {
                return Err(StorageError::EntryTooLarge(k.len() + v.len()));
            }
            if let Some(prev) = &last {
                if k <= *prev {
                    return Err(if k == *prev {
                        StorageError::DuplicateKey
                    } else {
                        StorageError::Unsorted
                    });
                }
            }
            last = Some(k.clone());
            let need = 4 + k.len() + v.len();
            if leaf_bytes + need > page_size && !leaf.is_empty() {
                let next = pager.allocate();
                level.push((leaf[0].0.clone(), leaf_page));
                pager.write(leaf_page, &Node::Leaf { entries: std::mem::take(&mut leaf), next }.encode())?;
                leaf_page = next;
                leaf_bytes = NODE_HEADER;
            }
            leaf_bytes += need;
            leaf.push((k, v));
            len += 1;
        }
        let first_key = leaf.first().map(|e| e.0.clone()).unwrap_or_default();
        level.push((first_key, leaf_page));
        pager.write(leaf_page, &Node::Leaf { entries: leaf, next: 0 }.encode())?;

        let mut height = 1;
        while level.len() > 1 {
            let mut upper: Vec<(Vec<u8>, u32)> = Vec::new();
            let mut iter = level.into_iter().peekable();
            while let Some((first_key, first)) = iter.next() {
                let mut entries: Vec<(Vec<u8>, u32)> = Vec::new();
                let mut bytes = NODE_HEADER;
                while let Some((k, _)) = iter.peek() {
                    if bytes + 6 + k.len() > page_size {
                        break;
                    }
                    bytes += 6 + k.len();
                    entries.push(iter.next().unwrap());
                }
                let page = pager.allocate();
                pager.write(page, &Node::Internal { first, entries }.encode())?;
                upper.push((first_key, page));
            }
            level = upper;
            height += 1;
        }
        let tree = BTree {
            pager,
            root: level[0].1,
            height,
            len,
        };
        tree.write_header()?;
        tree.pager.sync()?;
        Ok(tree)
    }

    fn write_header(&self) -> Result<()> {
        let mut h = Vec::with_capacity(28);
        h.extend_from_slice(MAGIC);
        h.extend_from_slice(&VERSION.to_le_bytes());
        h.extend_from_slice(&(self.pager.page_size() as u32).to_le_bytes());
        h.extend_from_slice(&self.root.to_le_bytes());
        h.extend_from_slice(&self.height.to_le_bytes());
        h.extend_from_slice(&self.len.to_le_bytes());
        self.pager.write(0, &h)
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pager(&self) -> &Arc<Pager> {
        &self.pager
    }

    /// Writes the header and forces pages to disk.
    pub fn flush(&self) -> Result<()> {
        self.write_header()?;
        self.pager.sync()
    }

    pub fn insert(&mut self, key: &[u8], entry: &[u8]) -> Result<()> {
        let page_size = self.pager.page_size();
        if key.len() + entry.len() > Self::max_entry_len(page_size) {
            return Err(StorageError::EntryTooLarge(key.len() + entry.len()));
        }
        if let Some((sep, right)) = self.insert_rec(self.root, key, entry)? {
            let new_root = self.pager.allocate();
            let node = Node::Internal {
                first: self.root,
                entries: vec![(sep, right)],
            };
            self.pager.write(new_root, &node.encode())?;
            self.root = new_root;
            self.height += 1;
        }
        self.len += 1;
        self.write_header()
    }

    fn insert_rec(&mut self, page_id: u32, key: &[u8], entry: &[u8]) -> Result<Option<(Vec<u8>, u32)>> {
        let page_size = self.pager.page_size();
        let page = self.pager.read(page_id)?;
        match Node::decode(&page)? {
            Node::Leaf { mut entries, next } => {
                let pos = match entries.binary_search_by(|(k, _)| k.as_slice().cmp(key)) {
                    Ok(_) => return Err(StorageError::DuplicateKey),
                    Err(p) => p,
                };
                entries.insert(pos, (key.to_vec(), entry.to_vec()));
                let node = Node::Leaf { entries, next };
                if node.encoded_len() <= page_size {
                    self.pager.write(page_id, &node.encode())?;
                    return Ok(None);
                }
                let Node::Leaf { mut entries, next } = node else { unreachable!() };
                let split = split_point(entries.iter().map(|(k, v)| 4 + k.len() + v.len()));
                let right_entries = entries.split_off(split);
                let right_id = self.pager.allocate();
                let sep = right_entries[0].0.clone();
                self.pager.write(right_id, &Node::Leaf { entries: right_entries, next }.encode())?;
                self.pager.write(page_id, &Node::Leaf { entries, next: right_id }.encode())?;
                Ok(Some((sep, right_id)))
            }
            Node::Internal { first, mut entries } => {
                let idx = entries.partition_point(|(k, _)| k.as_slice() <= key);
                let child = if idx == 0 { first } else { entries[idx - 1].1 };
                let Some((sep, right)) = self.insert_rec(child, key, entry)? else {
                    return Ok(None);
                };
                entries.insert(idx, (sep, right));
                let node = Node::Internal { first, entries };
                if node.encoded_len() <= page_size {
                    self.pager.write(page_id, &node.encode())?;
                    return Ok(None);
                }
                let Node::Internal { first, mut entries } = node else { unreachable!() };
                let mid = split_point(entries.iter().map(|(k, _)| 6 + k.len())).min(entries.len() - 1);
                let mut right_entries = entries.split_off(mid);
                let (promoted, right_first) = right_entries.remove(0);
                let right_id = self.pager.allocate();
                self.pager.write(
                    right_id,
                    &Node::Internal {
                        first: right_first,
                        entries: right_entries,
                    }
                    .encode(),
                )?;
                self.pager.write(page_id, &Node::Internal { first, entries }.encode())?;
                Ok(Some((promoted, right_id)))
            }
        }
    }

    fn find_leaf(&self, key: &[u8]) -> Result<(u32, PageRef)> {
        let mut id = self.root;
        loop {
            let page = self.pager.read(id)?;
            match page[0] {
                LEAF => return Ok((id, page)),
                INTERNAL => id = route(&page, key)?,
                _ => return Err(StorageError::Corrupt(format!("page {id}: unknown node kind"))),
            }
        }
    }

    pub fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        let (_, page) = self.find_leaf(key)?;
        let Node::Leaf { entries, .. } = Node::decode(&page)? else { unreachable!() };
        Ok(entries
            .binary_search_by(|(k, _)| k.as_slice().cmp(key))
            .ok()
            .map(|i| entries[i].1.clone()))
    }

    /// All entries with `low <= key <= high`, ascending.
    pub fn range(&self, low: &[u8], high: &[u8]) -> Result<RangeIter> {
        let (_, page) = self.find_leaf(low)?;
        let Node::Leaf { entries, next } = Node::decode(&page)? else { unreachable!() };
        let pos = entries.partition_point(|(k, _)| k.as_slice() < low);
        Ok(RangeIter {
            pager: Arc::clone(&self.pager),
            entries: entries.into_iter().skip(pos).collect::<Vec<_>>().into_iter(),
            next,
            high: high.to_vec(),
            done: false,
        })
    }

    /// Depth of every leaf, left to right; used to check balance.
    pub fn leaf_depths(&self) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        self.collect_depths(self.root, 1, &mut out)?;
        Ok(out)
    }

    fn collect_depths(&self, id: u32, depth: u32, out: &mut Vec<u32>) -> Result<()> {
        let page = self.pager.read(id)?;
        match Node::decode(&page)? {
            Node::Leaf { .. } => out.push(depth),
            Node::Internal { first, entries } => {
                self.collect_depths(first, depth + 1, out)?;
                for (_, c) in entries {
                    self.collect_depths(c, depth + 1, out)?;
                }
            }
        }
        Ok(())
    }
}

/// Index that splits weighted items into two halves of roughly equal byte size.
fn split_point(sizes: impl Iterator<Item = usize>) -> usize {
    let sizes: Vec<usize> = sizes.collect();
    let total: usize = sizes.iter().sum();
    let mut acc = 0;
    for (i, s) in sizes.iter().enumerate() {
        acc += s;
        if acc * 2 >= total {
            return (i + 1).clamp(1, sizes.len() - 1);
        }
    }
    sizes.len() / 2
}

pub struct RangeIter {
    pager: Arc<Pager>,
    entries: std::vec::IntoIter<(Vec<u8>, Vec<u8>)>,
    next: u32,
    high: Vec<u8>,
    done: bool,
}

impl Iterator for RangeIter {
    type Item = Result<(Vec<u8>, Vec<u8>)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            if let Some((k, v)) = self.entries.next() {
                if k > self.high {
                    self.done = true;
                    return None;
                }
                return Some(Ok((k, v)));
            }
            if self.next == 0 {
                self.done = true;
                return None;
            }
            let page = match self.pager.read(self.next) {
                Ok(p) => p,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            match Node::decode(&page) {
                Ok(Node::Leaf { entries, next }) => {
                    self.entries = entries.into_iter();
                    self.next = next;
                }
                Ok(Node::Internal { .. }) => {
                    self.done = true;
                    return Some(Err(StorageError::Corrupt("leaf chain points at internal node".into())));
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}
