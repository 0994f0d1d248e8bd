//! On-disk and in-memory matrix formats, auxiliary per-partition files and
//! the framed compression layer.

use std::io;

use thiserror::Error;

pub mod files;
pub mod frame;
pub mod isq;
pub mod meta;
pub mod partition;

pub use files::{FileKind, IoSnapshot, IoStats, PartitionStore, SeqReader, SeqWriter};
pub use frame::{frame_compress, frame_decompress, Codec, FrameReader, FrameWriter, FRAME_SIZE};
pub use isq::{decode_stream, encode_record, BranchEntry, IsqReader, IsqRecord, IsqWriter};
pub use meta::{Meta, PartitionMeta};
pub use partition::{
    load_partition, store_partition, RandomAccessPartition, StateEntry, TransitionEntry,
};

/// Malformed file contents.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("truncated record at byte {offset}")]
    Truncated { offset: u64 },
    #[error("unknown record tag 0x{tag:02x} at byte {offset}")]
    UnknownTag { offset: u64, tag: u8 },
    #[error("invalid target flag {byte} at byte {offset}")]
    BadFlag { offset: u64, byte: u8 },
    #[error("preliminary index {index} in final matrix (state {state})")]
    PreliminaryIndex { state: usize, index: i32 },
    #[error("stream ends inside an unterminated state at byte {offset}")]
    Unterminated { offset: u64 },
    #[error("inconsistent {what} range at entry {index}")]
    InconsistentRanges { what: &'static str, index: usize },
    #[error("preliminary index {index} refers past the {available} resolved entries of partition {partition}")]
    DanglingIndex {
        partition: u32,
        index: i32,
        available: usize,
    },
    #[error("branch refers to partition {partition}, which has no resolved entries")]
    MissingUpdates { partition: u32 },
    #[error("corrupt frame at byte {offset}: {reason}")]
    CorruptFrame { offset: u64, reason: String },
    #[error("length {len} is not a multiple of the record width {width}")]
    RecordWidth { len: u64, width: usize },
    #[error("expected {expected} records, found {found}")]
    RecordCount { expected: usize, found: usize },
    #[error("malformed metadata: {0}")]
    Meta(String),
    #[error("{message}")]
    Io { kind: io::ErrorKind, message: String },
}

impl FormatError {
    /// Unwraps a format error carried inside an I/O error, or wraps the
    /// I/O error itself.
    pub fn from_io(e: io::Error) -> FormatError {
        if let Some(inner) = e.get_ref().and_then(|r| r.downcast_ref::<FormatError>()) {
            return inner.clone();
        }
        FormatError::Io {
            kind: e.kind(),
            message: e.to_string(),
        }
    }

    pub fn into_io(self) -> io::Error {
        match self {
            FormatError::Io { kind, message } => io::Error::new(kind, message),
            other => io::Error::new(io::ErrorKind::InvalidData, other),
        }
    }
}
