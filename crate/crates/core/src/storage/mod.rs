//! On-disk collections: document, partition and value indexes over paged files.

pub mod btree;
pub mod collection;
pub mod dict;
pub mod pager;
pub mod paged_array;
pub mod stream;
mod value_key;

use thiserror::Error;

use crate::labeling::XmlError;

pub use btree::BTree;
pub use collection::{Collection, CollectionBuilder, CollectionStats, DocStats, NodeRecord, StoredNode};
pub use dict::NameDictionary;
pub use stream::{BoxedStream, LabelStream, StreamStats};

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("duplicate key")]
    DuplicateKey,
    #[error("bulk load input is not sorted")]
    Unsorted,
    #[error("entry of {0} bytes is too large")]
    EntryTooLarge(usize),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("corrupt collection: {0}")]
    Corrupt(String),
    #[error("collection path already exists: {0}")]
    AlreadyExists(String),
}

pub type Result<T, E = StorageError> = std::result::Result<T, E>;
