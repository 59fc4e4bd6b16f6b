//! Reading and writing motion sequences.
//!
//! # Text format (`trajseq 1`)
//!
//! ```text
//! trajseq 1
//! skeleton=h36m-22
//! units=mm
//! frame_interval_ms=40
//! frames=3
//! 12.5,0,-3.25,...      one CSV row per frame: n_joints * dim values,
//! 12.5,0.5,-3.25,...    joints in the skeleton's source order
//! 12.5,1,-3.25,...
//! ```
//!
//! Values are printed with enough digits to round-trip `f64` exactly. The
//! `skeleton` value must name a registered preset.
//!
//! # Binary format (`TRJB`)
//!
//! Little-endian throughout: magic `TRJB`, version `u32` (currently 1), the
//! preset name (`u32` length + UTF-8 bytes), units (`u8`: 0 = mm, 1 = m),
//! frame interval (`f64`), frame count (`u64`), joint count and coordinate
//! dimension (`u32` each), then `frames * n_joints * dim` coordinates as
//! `f64` bit patterns. No padding, no trailing bytes.
//!
//! [`read_sequence`] auto-detects the two formats by the leading magic.

use std::path::Path;

use crate::skeleton::{MotionSequence, Pose, SkeletonSpec, Units};

use super::{write_atomic, ByteReader, DataError};

const TEXT_MAGIC: &str = "trajseq 1";
const BINARY_MAGIC: &[u8; 4] = b"TRJB";
const BINARY_VERSION: u32 = 1;

/// Renders a sequence in the text format.
pub fn sequence_to_text(seq: &MotionSequence) -> String {
    let mut out = String::new();
    out.push_str(TEXT_MAGIC);
    out.push('\n');
    out.push_str(&format!("skeleton={}\n", seq.spec.name));
    out.push_str(&format!("units={}\n", seq.spec.units.label()));
    out.push_str(&format!("frame_interval_ms={}\n", seq.frame_interval_ms));
    out.push_str(&format!("frames={}\n", seq.len()));
    for pose in seq.poses() {
        let row: Vec<String> = pose.coords().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes the text format atomically.
pub fn write_sequence_text(path: &Path, seq: &MotionSequence) -> Result<(), DataError> {
    write_atomic(path, sequence_to_text(seq).as_bytes())
}

/// Parses the text format from a string (`path` is used in errors only).
pub fn sequence_from_text(path: &Path, content: &str) -> Result<MotionSequence, DataError> {
    let mut lines = content.lines().enumerate();
    let (_, magic) = lines.next().ok_or_else(|| DataError::parse(path, 1, "empty file"))?;
    if magic.trim_end() != TEXT_MAGIC {
        return Err(DataError::parse(path, 1, format!("expected '{TEXT_MAGIC}' header, got '{magic}'")));
    }

    let mut skeleton = None;
    let mut units = None;
    let mut frame_interval_ms = None;
    let mut frames = None;
    for _ in 0..4 {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| DataError::parse(path, 1, "file ends inside the metadata block"))?;
        let lineno = idx + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| DataError::parse(path, lineno, format!("expected key=value, got '{line}'")))?;
        match key {
            "skeleton" => skeleton = Some(value.to_string()),
            "units" => {
                units = Some(Units::parse(value).ok_or_else(|| {
                    DataError::parse(path, lineno, format!("unknown units '{value}' (expected mm or m)"))
                })?)
            }
            "frame_interval_ms" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| DataError::parse(path, lineno, format!("bad frame interval '{value}'")))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(DataError::parse(path, lineno, format!("frame interval must be positive, got {v}")));
                }
                frame_interval_ms = Some(v);
            }
            "frames" => {
                frames = Some(value.parse::<usize>().map_err(|_| {
                    DataError::parse(path, lineno, format!("bad frame count '{value}'"))
                })?)
            }
            other => {
                return Err(DataError::parse(path, lineno, format!("unknown metadata key '{other}'")));
            }
        }
    }
    let preset = skeleton.ok_or_else(|| DataError::parse(path, 2, "missing skeleton= line"))?;
    let units = units.ok_or_else(|| DataError::parse(path, 3, "missing units= line"))?;
    let interval = frame_interval_ms.ok_or_else(|| DataError::parse(path, 4, "missing frame_interval_ms= line"))?;
    let frames = frames.ok_or_else(|| DataError::parse(path, 5, "missing frames= line"))?;

    let mut spec = SkeletonSpec::preset(&preset).map_err(|e| DataError::skeleton(path, e))?;
    spec.units = units;
    let coords_per_frame = spec.n_joints() * spec.dim;
    let dim = spec.dim;
    let mut seq = MotionSequence::new(spec, interval);
    let mut parsed = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if parsed == frames {
            return Err(DataError::parse(path, lineno, format!("more than the declared {frames} frames")));
        }
        let mut coords = Vec::with_capacity(coords_per_frame);
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| DataError::parse(path, lineno, format!("bad coordinate '{field}'")))?;
            coords.push(v);
        }
        if coords.len() != coords_per_frame {
            return Err(DataError::parse(
                path,
                lineno,
                format!("expected {coords_per_frame} coordinates, got {}", coords.len()),
            ));
        }
        seq.push_pose(Pose::from_vec(dim, coords)).map_err(|e| DataError::skeleton(path, e))?;
        parsed += 1;
    }
    if parsed != frames {
        return Err(DataError::format(
            path,
            format!("declared {frames} frames but the file ends after {parsed}"),
        ));
    }
    Ok(seq)
}

/// Reads the text format.
pub fn read_sequence_text(path: &Path) -> Result<MotionSequence, DataError> {
    let content = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    sequence_from_text(path, &content)
}

/// Renders a sequence in the binary format.
pub fn sequence_to_binary(seq: &MotionSequence) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    let name = seq.spec.name.as_bytes();
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name);
    out.push(match seq.spec.units {
        Units::Millimeters => 0,
        Units::Meters => 1,
    });
    out.extend_from_slice(&seq.frame_interval_ms.to_le_bytes());
    out.extend_from_slice(&(seq.len() as u64).to_le_bytes());
    out.extend_from_slice(&(seq.spec.n_joints() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.spec.dim as u32).to_le_bytes());
    for pose in seq.poses() {
        for v in pose.coords() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Writes the binary format atomically.
pub fn write_sequence_binary(path: &Path, seq: &MotionSequence) -> Result<(), DataError> {
    write_atomic(path, &sequence_to_binary(seq))
}

/// Parses the binary format from bytes (`path` is used in errors only).
pub fn sequence_from_binary(path: &Path, bytes: &[u8]) -> Result<MotionSequence, DataError> {
    let mut r = ByteReader::new(bytes);
    if r.take(4, path, "magic")? != BINARY_MAGIC {
        return Err(DataError::format(path, "not a TRJB sequence file (bad magic)".to_string()));
    }
    let version = r.u32(path, "version")?;
    if version != BINARY_VERSION {
        return Err(DataError::format(path, format!("unsupported TRJB version {version}")));
    }
    let name_len = r.u32(path, "preset name length")? as usize;
    let name = std::str::from_utf8(r.take(name_len, path, "preset name")?)
        .map_err(|_| DataError::format(path, "preset name is not UTF-8".to_string()))?
        .to_string();
    let units = match r.u8(path, "units")? {
        0 => Units::Millimeters,
        1 => Units::Meters,
        other => return Err(DataError::format(path, format!("unknown units tag {other}"))),
    };
    let interval = r.f64(path, "frame interval")?;
    if !(interval.is_finite() && interval > 0.0) {
        return Err(DataError::format(path, format!("frame interval must be positive, got {interval}")));
    }
    let frames = r.u64(path, "frame count")? as usize;
    let n_joints = r.u32(path, "joint count")? as usize;
    let dim = r.u32(path, "dimension")? as usize;

    let mut spec = SkeletonSpec::preset(&name).map_err(|e| DataError::skeleton(path, e))?;
    spec.units = units;
    if spec.n_joints() != n_joints || spec.dim != dim {
        return Err(DataError::format(
            path,
            format!(
                "file claims {n_joints} joints x {dim} dims but preset '{name}' has {} x {}",
                spec.n_joints(),
                spec.dim
            ),
        ));
    }
    let per_frame = n_joints * dim;
    let mut seq = MotionSequence::new(spec, interval);
    for t in 0..frames {
        let mut coords = Vec::with_capacity(per_frame);
        for _ in 0..per_frame {
            coords.push(r.f64(path, &format!("frame {t}"))?);
        }
        seq.push_pose(Pose::from_vec(dim, coords)).map_err(|e| DataError::skeleton(path, e))?;
    }
    if r.remaining() != 0 {
        return Err(DataError::format(path, format!("{} trailing bytes after the last frame", r.remaining())));
    }
    Ok(seq)
}

/// Reads the binary format.
pub fn read_sequence_binary(path: &Path) -> Result<MotionSequence, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    sequence_from_binary(path, &bytes)
}

/// Reads a sequence in either format, detected by the leading magic.
pub fn read_sequence(path: &Path) -> Result<MotionSequence, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        sequence_from_binary(path, &bytes)
    } else {
        let content = std::str::from_utf8(&bytes)
            .map_err(|_| DataError::format(path, "neither TRJB binary nor UTF-8 text".to_string()))?;
        sequence_from_text(path, content)
    }
}
