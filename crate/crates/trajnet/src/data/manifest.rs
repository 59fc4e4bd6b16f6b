//! Dataset manifests: which sequence files belong to which split, and how
//! windows are cut from them.
//!
//! # Format (`trajman 1`)
//!
//! ```text
//! trajman 1
//! windowing 10 10 5
//! walk_01.trajseq train walking
//! walk_02.trajseq eval walking
//! ```
//!
//! The `windowing` line fixes the observed frames, predicted frames, and the
//! stride between window starts. Each following line names a sequence file
//! (relative paths resolve against the manifest's directory), its split, and
//! an optional free-form label. Blank lines and `#` comments are ignored.
//!
//! Loading a split reads every sequence, checks that the whole split agrees
//! on skeleton preset, units, and frame rate, and enumerates windows: a
//! sequence of `T` frames yields observed/future pairs starting at
//! `0, stride, 2 * stride, ...` while the full `input + output` frames still
//! fit. Sequences too short for a single window are skipped and counted.

use std::path::{Path, PathBuf};

use crate::skeleton::{MotionSequence, SkeletonSpec, Units};

use super::{sequence_io, write_atomic, DataError};

const MAGIC: &str = "trajman 1";

/// How windows are cut from sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Windowing {
    pub input_frames: usize,
    pub output_frames: usize,
    pub stride: usize,
}

impl Windowing {
    /// Start offsets of every window in a sequence of `len` frames.
    pub fn starts(&self, len: usize) -> Vec<usize> {
        let need = self.input_frames + self.output_frames;
        if len < need {
            return Vec::new();
        }
        (0..=len - need).step_by(self.stride.max(1)).collect()
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path as written in the manifest (possibly relative).
    pub path: PathBuf,
    pub split: String,
    pub label: String,
}

/// A parsed manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory relative paths resolve against.
    pub dir: PathBuf,
    pub windowing: Windowing,
    pub entries: Vec<ManifestEntry>,
}

/// A split loaded into memory, with windows already cut.
#[derive(Debug, Clone)]
pub struct LoadedSplit {
    /// (observed, future) window pairs in manifest order.
    pub windows: Vec<(MotionSequence, MotionSequence)>,
    /// Sequences skipped because they are shorter than one window.
    pub skipped_sequences: usize,
    pub spec: SkeletonSpec,
    pub units: Units,
    pub frame_interval_ms: f64,
}

/// Renders a manifest (entry paths are written as given).
pub fn manifest_to_text(windowing: Windowing, entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!(
        "windowing {} {} {}\n",
        windowing.input_frames, windowing.output_frames, windowing.stride
    ));
    for e in entries {
        out.push_str(&format!("{} {}", e.path.display(), e.split));
        if !e.label.is_empty() {
            out.push_str(&format!(" {}", e.label));
        }
        out.push('\n');
    }
    out
}

/// Writes a manifest atomically.
pub fn write_manifest(path: &Path, windowing: Windowing, entries: &[ManifestEntry]) -> Result<(), DataError> {
    write_atomic(path, manifest_to_text(windowing, entries).as_bytes())
}

/// Parses a manifest from a string (`path` supplies the base directory and
/// appears in errors).
pub fn manifest_from_text(path: &Path, content: &str) -> Result<Manifest, DataError> {
    let mut lines = content.lines().enumerate();
    let (_, magic) = lines.next().ok_or_else(|| DataError::parse(path, 1, "empty file"))?;
    if magic.trim_end() != MAGIC {
        return Err(DataError::parse(path, 1, format!("expected '{MAGIC}' header, got '{magic}'")));
    }
    let (idx, wline) = lines.next().ok_or_else(|| DataError::parse(path, 2, "missing windowing line"))?;
    let fields: Vec<&str> = wline.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "windowing" {
        return Err(DataError::parse(
            path,
            idx + 1,
            format!("expected 'windowing <input> <output> <stride>', got '{wline}'"),
        ));
    }
    let parse_count = |s: &str, what: &str| -> Result<usize, DataError> {
        let v = s
            .parse::<usize>()
            .map_err(|_| DataError::parse(path, idx + 1, format!("bad {what} '{s}'")))?;
        if v == 0 {
            return Err(DataError::parse(path, idx + 1, format!("{what} must be positive")));
        }
        Ok(v)
    };
    let windowing = Windowing {
        input_frames: parse_count(fields[1], "input frame count")?,
        output_frames: parse_count(fields[2], "output frame count")?,
        stride: parse_count(fields[3], "stride")?,
    };

    let mut entries = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let file = fields.next().expect("non-empty line has a first field");
        let split = fields
            .next()
            .ok_or_else(|| DataError::parse(path, idx + 1, format!("missing split after '{file}'")))?;
        let label = fields.collect::<Vec<&str>>().join(" ");
        entries.push(ManifestEntry { path: PathBuf::from(file), split: split.to_string(), label });
    }
    let dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok(Manifest { dir, windowing, entries })
}

/// Reads a manifest file.
pub fn read_manifest(path: &Path) -> Result<Manifest, DataError> {
    let content = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    manifest_from_text(path, &content)
}

impl Manifest {
    /// Resolves an entry's path against the manifest directory.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.dir.join(&entry.path)
        }
    }

    /// The distinct split names, in first-appearance order.
    pub fn splits(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for e in &self.entries {
            if !seen.contains(&e.split) {
                seen.push(e.split.clone());
            }
        }
        seen
    }

    /// Loads every sequence of `split` and cuts windows per the manifest's
    /// windowing. Fails if the split has no entries, mixes presets, units,
    /// or frame rates, or produces zero windows.
    pub fn load_split(&self, manifest_path: &Path, split: &str) -> Result<LoadedSplit, DataError> {
        let selected: Vec<&ManifestEntry> = self.entries.iter().filter(|e| e.split == split).collect();
        if selected.is_empty() {
            return Err(DataError::format(
                manifest_path,
                format!("no entries in split '{split}' (available: {})", self.splits().join(", ")),
            ));
        }
        let mut windows = Vec::new();
        let mut skipped = 0usize;
        let mut convention: Option<(SkeletonSpec, f64)> = None;
        for entry in selected {
            let file = self.resolve(entry);
            let seq = sequence_io::read_sequence(&file)?;
            match &convention {
                None => convention = Some((seq.spec.clone(), seq.frame_interval_ms)),
                Some((spec, interval)) => {
                    if seq.spec != *spec || seq.frame_interval_ms != *interval {
                        return Err(DataError::format(
                            manifest_path,
                            format!(
                                "split '{split}' is inconsistent: {} has preset '{}' ({}, {} ms) but the split started with '{}' ({}, {} ms)",
                                file.display(),
                                seq.spec.name,
                                seq.spec.units.label(),
                                seq.frame_interval_ms,
                                spec.name,
                                spec.units.label(),
                                interval
                            ),
                        ));
                    }
                }
            }
            let starts = self.windowing.starts(seq.len());
            if starts.is_empty() {
                skipped += 1;
                continue;
            }
            for s in starts {
                let observed = seq.window(s, self.windowing.input_frames);
                let future = seq.window(s + self.windowing.input_frames, self.windowing.output_frames);
                windows.push((observed, future));
            }
        }
        if windows.is_empty() {
            return Err(DataError::format(
                manifest_path,
                format!("split '{split}' yields no windows (all {skipped} sequences are too short)"),
            ));
        }
        let (spec, frame_interval_ms) = convention.expect("at least one sequence loaded");
        let units = spec.units;
        Ok(LoadedSplit { windows, skipped_sequences: skipped, spec, units, frame_interval_ms })
    }
}
