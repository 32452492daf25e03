//! File formats: event records, pixmaps, parameter containers and episode
//! manifests. All binary layouts are little-endian.

mod events;
mod manifest;
mod params;
mod pnm;

pub use events::{decode_events, encode_events, read_events, read_events_file, write_events, write_events_file, HEADER_LEN, RECORD_LEN};
pub use manifest::{append_manifest, read_manifest, write_manifest, ActionRecord, EpisodeManifest, FrameRecord};
pub use params::{decode_params, encode_params, read_params, write_params};
pub use pnm::{decode_pnm, encode_pgm, encode_ppm, read_gray, read_image, write_gray, write_image, Pixmap};

use std::path::PathBuf;

use crate::event::EventError;

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("file truncated at byte offset {offset}")]
    TruncatedFile { offset: u64 },
    #[error("{extra} unexpected bytes after the last record at offset {offset}")]
    TrailingBytes { offset: u64, extra: u64 },
    #[error("record {index}: {reason}")]
    InvalidRecord { index: u64, reason: String },
    #[error(transparent)]
    Invalid(#[from] EventError),
    #[error("write failed: {0}")]
    SinkFailure(#[source] std::io::Error),
    #[error("read failed: {0}")]
    Source(#[source] std::io::Error),
    #[error("malformed pixmap header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("parameter container: {0}")]
    BadParams(String),
    #[error("manifest line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("manifest line {line}: frame {index} timestamp does not increase")]
    NonMonotoneFrames { line: usize, index: usize },
    #[error("manifest line {line}: referenced file {path} does not exist")]
    MissingFile { line: usize, path: PathBuf },
}

fn read_all(mut source: impl std::io::Read) -> Result<Vec<u8>, StorageError> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf).map_err(StorageError::Source)?;
    Ok(buf)
}
