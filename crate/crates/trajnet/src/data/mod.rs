//! Dataset handling: sequence files, dataset manifests, the synthetic
//! motion generator, and checkpoint persistence.
//!
//! On-disk formats (all written atomically via a temp file and rename):
//!
//! * **`trajseq` text** — a human-readable motion sequence: a version
//!   header, `key=value` metadata, then one CSV row of coordinates per
//!   frame. See [`sequence_io`].
//! * **`TRJB` binary** — the same sequence payload in little-endian binary
//!   for bulk data. Readers auto-detect the two by the leading magic.
//! * **`trajman` text** — a manifest listing sequence files with their
//!   train/eval split and the windowing used to cut training samples. See
//!   [`manifest`].
//! * **`TRJN` binary** — a complete training checkpoint (configs, named
//!   parameters, optimizer moments, generator position) guarded by a
//!   SHA-256 trailer. See [`checkpoint_io`].

pub mod checkpoint_io;
pub mod manifest;
pub mod sequence_io;
pub mod synth;

pub use checkpoint_io::{load_checkpoint, save_checkpoint};
pub use manifest::{read_manifest, write_manifest, LoadedSplit, Manifest, ManifestEntry, Windowing};
pub use sequence_io::{read_sequence, write_sequence_binary, write_sequence_text};
pub use synth::{generate_dataset, write_synthetic_dataset, SynthConfig, SynthSummary};

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use crate::skeleton::SkeletonError;

/// Errors raised by dataset and checkpoint I/O.
#[derive(Debug)]
pub enum DataError {
    /// An underlying filesystem operation failed.
    Io { path: PathBuf, source: io::Error },
    /// A text file failed to parse; `line` is 1-based.
    Parse { path: PathBuf, line: usize, what: String },
    /// A binary or structural format violation (bad magic, truncation,
    /// checksum mismatch, inconsistent dataset, ...).
    Format { path: PathBuf, what: String },
    /// The parsed data violates skeleton invariants.
    Skeleton { path: PathBuf, source: SkeletonError },
    /// A generator configuration value is out of range.
    Config { what: String },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            DataError::Parse { path, line, what } => {
                write!(f, "{}:{line}: {what}", path.display())
            }
            DataError::Format { path, what } => write!(f, "{}: {what}", path.display()),
            DataError::Skeleton { path, source } => write!(f, "{}: {source}", path.display()),
            DataError::Config { what } => write!(f, "bad generator config: {what}"),
        }
    }
}

impl std::error::Error for DataError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            DataError::Io { source, .. } => Some(source),
            DataError::Skeleton { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl DataError {
    fn io(path: &Path, source: io::Error) -> DataError {
        DataError::Io { path: path.to_path_buf(), source }
    }

    fn parse(path: &Path, line: usize, what: impl Into<String>) -> DataError {
        DataError::Parse { path: path.to_path_buf(), line, what: what.into() }
    }

    fn format(path: &Path, what: impl Into<String>) -> DataError {
        DataError::Format { path: path.to_path_buf(), what: what.into() }
    }

    fn skeleton(path: &Path, source: SkeletonError) -> DataError {
        DataError::Skeleton { path: path.to_path_buf(), source }
    }
}

/// Writes a file atomically: the content lands under a temporary name in
/// the target directory and is renamed into place, so readers never observe
/// a half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| DataError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| DataError::io(path, e))
}

/// Cursor over a little-endian binary buffer with truncation-aware errors.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> ByteReader<'a> {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, path: &Path, what: &str) -> Result<&'a [u8], DataError> {
        if n > self.remaining() {
            return Err(DataError::format(
                path,
                format!("truncated while reading {what} (need {n} bytes at offset {})", self.pos),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub(crate) fn u8(&mut self, path: &Path, what: &str) -> Result<u8, DataError> {
        Ok(self.take(1, path, what)?[0])
    }

    pub(crate) fn u32(&mut self, path: &Path, what: &str) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4, path, what)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self, path: &Path, what: &str) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8, path, what)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn u128(&mut self, path: &Path, what: &str) -> Result<u128, DataError> {
        Ok(u128::from_le_bytes(self.take(16, path, what)?.try_into().expect("16 bytes")))
    }

    pub(crate) fn f64(&mut self, path: &Path, what: &str) -> Result<f64, DataError> {
        Ok(f64::from_le_bytes(self.take(8, path, what)?.try_into().expect("8 bytes")))
    }

    /// A `u64` length prefix followed by that many `f64`s.
    pub(crate) fn f64_vec(&mut self, path: &Path, what: &str) -> Result<Vec<f64>, DataError> {
        let len = self.u64(path, what)? as usize;
        let raw = self.take(len * 8, path, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    /// A `u32` length prefix followed by that many UTF-8 bytes.
    pub(crate) fn string(&mut self, path: &Path, what: &str) -> Result<String, DataError> {
        let len = self.u32(path, what)? as usize;
        let raw = self.take(len, path, what)?;
        std::str::from_utf8(raw)
            .map(str::to_string)
            .map_err(|_| DataError::format(path, format!("{what} is not UTF-8")))
    }
}

/// Little-endian binary writer counterpart of [`ByteReader`].
pub(crate) struct ByteWriter(pub(crate) Vec<u8>);

impl ByteWriter {
    pub(crate) fn new() -> ByteWriter {
        ByteWriter(Vec::new())
    }

    pub(crate) fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    pub(crate) fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u128(&mut self, v: u128) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64_vec(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for v in vs {
            self.f64(*v);
        }
    }

    pub(crate) fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}
