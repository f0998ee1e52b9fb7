pub mod labeling;
pub mod query;
pub mod storage;
pub mod frontend;
pub mod executor;
