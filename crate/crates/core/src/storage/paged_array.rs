//! Paged arrays: a byte heap of length-prefixed values and a fixed-size record file.
//!
//! Both keep a header in page 0; payload starts at page 1.

use std::path::Path;
use std::sync::Arc;

use super::pager::{PageRef, Pager};
use super::{Result, StorageError};

const HEAP_MAGIC: &[u8; 4] = b"RXPA";
const RECORD_MAGIC: &[u8; 4] = b"RXRF";

/// Address of a value inside a [`ByteHeap`]: byte offset of its length prefix.
pub type ValueRef = u64;

pub struct ByteHeapWriter {
    pager: Pager,
    buf: Vec<u8>,
    next_page: u32,
    len: u64,
}

impl ByteHeapWriter {
    pub fn create(path: &Path, page_size: usize) -> Result<Self> {
        let pager = Pager::create(path, page_size, 4)?;
        pager.allocate();
        Ok(ByteHeapWriter {
            pager,
            buf: Vec::with_capacity(page_size),
            next_page: 1,
            len: 0,
        })
    }

    fn write_bytes(&mut self, mut bytes: &[u8]) -> Result<()> {
        let ps = self.pager.page_size();
        while !bytes.is_empty() {
            let room = ps - self.buf.len();
            let n = room.min(bytes.len());
            self.buf.extend_from_slice(&bytes[..n]);
            bytes = &bytes[n..];
            if self.buf.len() == ps {
                self.pager.write(self.next_page, &self.buf)?;
                self.next_page += 1;
                self.buf.clear();
            }
        }
        Ok(())
    }

    pub fn append(&mut self, value: &[u8]) -> Result<ValueRef> {
        let at = self.len;
        let len = u32::try_from(value.len()).map_err(|_| StorageError::EntryTooLarge(value.len()))?;
        self.write_bytes(&len.to_le_bytes())?;
        self.write_bytes(value)?;
        self.len += 4 + value.len() as u64;
        Ok(at)
    }

    pub fn finish(self) -> Result<()> {
        if !self.buf.is_empty() {
            self.pager.write(self.next_page, &self.buf)?;
        }
        let mut h = Vec::new();
        h.extend_from_slice(HEAP_MAGIC);
        h.extend_from_slice(&(self.pager.page_size() as u32).to_le_bytes());
        h.extend_from_slice(&self.len.to_le_bytes());
        self.pager.write(0, &h)?;
        self.pager.sync()
    }
}

pub struct ByteHeap {
    pager: Pager,
    len: u64,
}

impl ByteHeap {
    pub fn open(path: &Path, page_size: usize, cache_pages: usize) -> Result<Self> {
        let pager = Pager::open(path, page_size, cache_pages)?;
        let h = pager.read(0)?;
        if &h[0..4] != HEAP_MAGIC || u32::from_le_bytes(h[4..8].try_into().unwrap()) as usize != page_size {
            return Err(StorageError::Corrupt(format!("{}: bad value heap header", path.display())));
        }
        let len = u64::from_le_bytes(h[8..16].try_into().unwrap());
        let capacity = (pager.page_count() as u64 - 1) * page_size as u64;
        if len > capacity {
            return Err(StorageError::Corrupt(format!("{}: truncated value heap", path.display())));
        }
        Ok(ByteHeap { pager, len })
    }

    fn read_at(&self, offset: u64, out: &mut [u8]) -> Result<()> {
        let ps = self.pager.page_size() as u64;
        if offset + out.len() as u64 > self.len {
            return Err(StorageError::Corrupt(format!("value reference {offset} out of range")));
        }
        let mut done = 0usize;
        while done < out.len() {
            let pos = offset + done as u64;
            let page = self.pager.read(1 + (pos / ps) as u32)?;
            let within = (pos % ps) as usize;
            let n = (ps as usize - within).min(out.len() - done);
            out[done..done + n].copy_from_slice(&page[within..within + n]);
            done += n;
        }
        Ok(())
    }

    pub fn get(&self, at: ValueRef) -> Result<Vec<u8>> {
        let mut len = [0u8; 4];
        self.read_at(at, &mut len)?;
        let mut value = vec![0u8; u32::from_le_bytes(len) as usize];
        self.read_at(at + 4, &mut value)?;
        Ok(value)
    }

    pub fn get_string(&self, at: ValueRef) -> Result<String> {
        String::from_utf8(self.get(at)?).map_err(|_| StorageError::Corrupt("value is not UTF-8".into()))
    }
}

/// Fixed-size records packed into pages; records never straddle pages.
pub struct RecordFileWriter {
    pager: Pager,
    record_size: usize,
    per_page: usize,
    buf: Vec<u8>,
    next_page: u32,
    count: u64,
}

impl RecordFileWriter {
    pub fn create(path: &Path, page_size: usize, record_size: usize) -> Result<Self> {
        let pager = Pager::create(path, page_size, 4)?;
        pager.allocate();
        Ok(RecordFileWriter {
            pager,
            record_size,
            per_page: page_size / record_size,
            buf: Vec::with_capacity(page_size),
            next_page: 1,
            count: 0,
        })
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, record: &[u8]) -> Result<u64> {
        assert_eq!(record.len(), self.record_size, "record size mismatch");
        self.buf.extend_from_slice(record);
        let idx = self.count;
        self.count += 1;
        if self.buf.len() == self.per_page * self.record_size {
            self.pager.write(self.next_page, &self.buf)?;
            self.next_page += 1;
            self.buf.clear();
        }
        Ok(idx)
    }

    pub fn finish(self) -> Result<()> {
        if !self.buf.is_empty() {
            self.pager.write(self.next_page, &self.buf)?;
        }
        let mut h = Vec::new();
        h.extend_from_slice(RECORD_MAGIC);
        h.extend_from_slice(&(self.pager.page_size() as u32).to_le_bytes());
        h.extend_from_slice(&(self.record_size as u32).to_le_bytes());
        h.extend_from_slice(&self.count.to_le_bytes());
        self.pager.write(0, &h)?;
        self.pager.sync()
    }
}

pub struct RecordFile {
    pager: Pager,
    record_size: usize,
    per_page: usize,
    count: u64,
}

impl RecordFile {
    pub fn open(path: &Path, page_size: usize, record_size: usize, cache_pages: usize) -> Result<Self> {
        let pager = Pager::open(path, page_size, cache_pages)?;
        let h = pager.read(0)?;
        if &h[0..4] != RECORD_MAGIC
            || u32::from_le_bytes(h[4..8].try_into().unwrap()) as usize != page_size
            || u32::from_le_bytes(h[8..12].try_into().unwrap()) as usize != record_size
        {
            return Err(StorageError::Corrupt(format!("{}: bad record file header", path.display())));
        }
        let count = u64::from_le_bytes(h[12..20].try_into().unwrap());
        let per_page = page_size / record_size;
        let pages_needed = count.div_ceil(per_page as u64) + 1;
        if (pager.page_count() as u64) < pages_needed {
            return Err(StorageError::Corrupt(format!("{}: truncated record file", path.display())));
        }
        Ok(RecordFile {
            pager,
            record_size,
            per_page,
            count,
        })
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn record_size(&self) -> usize {
        self.record_size
    }

    /// Page holding record `idx` and the record's byte offset within it.
    pub fn locate(&self, idx: u64) -> (u32, usize) {
        let page = 1 + (idx / self.per_page as u64) as u32;
        let within = (idx % self.per_page as u64) as usize * self.record_size;
        (page, within)
    }

    pub fn page(&self, id: u32) -> Result<PageRef> {
        self.pager.read(id)
    }
}

/// Sequential reader over records `[begin, end)` that counts the pages it touches.
pub struct RecordCursor {
    file: Arc<RecordFile>,
    pos: u64,
    end: u64,
    page: Option<(u32, PageRef)>,
    pages_touched: u64,
}

impl RecordCursor {
    pub fn new(file: Arc<RecordFile>, begin: u64, end: u64) -> Result<Self> {
        if begin > end || end > file.len() {
            return Err(StorageError::Corrupt(format!(
                "posting extent {begin}..{end} outside record file of {}",
                file.len()
            )));
        }
        Ok(RecordCursor {
            file,
            pos: begin,
            end,
            page: None,
            pages_touched: 0,
        })
    }

    pub fn remaining(&self) -> u64 {
        self.end - self.pos
    }

    pub fn pages_touched(&self) -> u64 {
        self.pages_touched
    }

    /// Calls `f` on the next record's bytes, or returns `None` at the end.
    pub fn next_with<T>(&mut self, f: impl FnOnce(&[u8]) -> T) -> Result<Option<T>> {
        if self.pos >= self.end {
            return Ok(None);
        }
        let (pid, within) = self.file.locate(self.pos);
        let fresh = !matches!(&self.page, Some((id, _)) if *id == pid);
        if fresh {
            self.page = Some((pid, self.file.page(pid)?));
            self.pages_touched += 1;
        }
        let page = &self.page.as_ref().unwrap().1;
        let rs = self.file.record_size();
        let out = f(&page[within..within + rs]);
        self.pos += 1;
        Ok(Some(out))
    }
}
