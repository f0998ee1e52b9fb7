//! Fixed-size page file with an LRU page cache.

use std::fs::{File, OpenOptions};
use std::num::NonZeroUsize;
use std::os::unix::fs::FileExt;
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;

use super::{Result, StorageError};

pub const DEFAULT_PAGE_SIZE: usize = 4096;
pub const DEFAULT_CACHE_PAGES: usize = 4096;
pub const CACHE_ENV: &str = "RXDB_CACHE_PAGES";

pub type PageRef = Arc<[u8]>;

/// Page-cache capacity, honoring `RXDB_CACHE_PAGES`.
pub fn cache_pages_from_env() -> usize {
    std::env::var(CACHE_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(DEFAULT_CACHE_PAGES)
}

pub struct Pager {
    file: File,
    page_size: usize,
    page_count: AtomicU32,
    cache: Mutex<LruCache<u32, PageRef>>,
    disk_reads: AtomicU64,
}

impl Pager {
    pub fn create(path: &Path, page_size: usize, cache_pages: usize) -> Result<Self> {
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create_new(true)
            .open(path)?;
        Ok(Self::with_file(file, page_size, 0, cache_pages))
    }

    /// Opens an existing page file; its length must be a whole number of pages.
    pub fn open(path: &Path, page_size: usize, cache_pages: usize) -> Result<Self> {
        let file = OpenOptions::new().read(true).open(path)?;
        let len = file.metadata()?.len();
        if len % page_size as u64 != 0 || len == 0 {
            return Err(StorageError::Corrupt(format!(
                "{}: length {len} is not a positive multiple of the page size",
                path.display()
            )));
        }
        let pages = u32::try_from(len / page_size as u64)
            .map_err(|_| StorageError::Corrupt(format!("{}: too many pages", path.display())))?;
        Ok(Self::with_file(file, page_size, pages, cache_pages))
    }

    fn with_file(file: File, page_size: usize, pages: u32, cache_pages: usize) -> Self {
        let cap = NonZeroUsize::new(cache_pages.max(1)).expect("non-zero");
        Pager {
            file,
            page_size,
            page_count: AtomicU32::new(pages),
            cache: Mutex::new(LruCache::new(cap)),
            disk_reads: AtomicU64::new(0),
        }
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    pub fn page_count(&self) -> u32 {
        self.page_count.load(Ordering::Acquire)
    }

    /// Pages fetched from disk (cache misses) since open.
    pub fn disk_reads(&self) -> u64 {
        self.disk_reads.load(Ordering::Relaxed)
    }

    pub fn read(&self, id: u32) -> Result<PageRef> {
        if id >= self.page_count() {
            return Err(StorageError::Corrupt(format!("page {id} beyond end of file")));
        }
        if let Some(p) = self.cache.lock().expect("page cache poisoned").get(&id) {
            return Ok(Arc::clone(p));
        }
        let mut buf = vec![0u8; self.page_size];
        self.file
            .read_exact_at(&mut buf, id as u64 * self.page_size as u64)?;
        self.disk_reads.fetch_add(1, Ordering::Relaxed);
        let page: PageRef = buf.into();
        self.cache
            .lock()
            .expect("page cache poisoned")
            .put(id, Arc::clone(&page));
        Ok(page)
    }

    /// Reserves a fresh page id at the end of the file.
    pub fn allocate(&self) -> u32 {
        self.page_count.fetch_add(1, Ordering::AcqRel)
    }

    pub fn write(&self, id: u32, data: &[u8]) -> Result<()> {
        if data.len() > self.page_size {
            return Err(StorageError::Corrupt(format!(
                "page payload of {} bytes exceeds page size",
                data.len()
            )));
        }
        let mut buf = vec![0u8; self.page_size];
        buf[..data.len()].copy_from_slice(data);
        self.file.write_all_at(&buf, id as u64 * self.page_size as u64)?;
        self.page_count.fetch_max(id + 1, Ordering::AcqRel);
        self.cache
            .lock()
            .expect("page cache poisoned")
            .put(id, buf.into());
        Ok(())
    }

    pub fn sync(&self) -> Result<()> {
        self.file.sync_all()?;
        Ok(())
    }
}
