//! Checkpoint persistence: the `TRJN` binary format.
//!
//! A checkpoint file is a byte-exact snapshot of [`Checkpoint`] — every
//! `f64` is stored as its little-endian bit pattern, so save/load/save
//! produces identical bytes and a resumed run continues exactly where the
//! saved one stopped.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! "TRJN" | version u32 |
//! model config  (8 u64 extents, 2 f64, global_residual u8)
//! ablations     (3 u8)
//! train config  (lr f64, batch u64, epochs u64, seed u64, shuffle u8,
//!                stop flag u8 + f64)
//! preprocess    (2 u8)
//! preset name   (u32 len + UTF-8) | units u8 | frame interval f64
//! epoch u64 | loss history (u64 len + f64s)
//! params        (u64 count; each: name, rank u32, dims u64*rank, data)
//! adam          (step u64; m then v, one length-prefixed vec per param)
//! rng           (seed [u8; 32], stream u64, word position u128)
//! sha256        (32 bytes over everything above)
//! ```
//!
//! The trailing SHA-256 digest turns silent corruption — a flipped bit, a
//! truncated copy, an appended byte — into a loud load-time error.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::model::{AblationFlags, ModelConfig, Param};
use crate::optim::AdamState;
use crate::skeleton::Units;
use crate::tensor::Tensor;
use crate::training::{Checkpoint, PreprocessConfig, RngSnapshot, TrainConfig};

use super::{write_atomic, ByteReader, ByteWriter, DataError};

const MAGIC: &[u8; 4] = b"TRJN";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// Serializes a checkpoint, including the checksum trailer.
pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);

    let m = &ckpt.model_config;
    for v in [
        m.n_joints,
        m.dim,
        m.input_frames,
        m.output_frames,
        m.hidden_channels,
        m.n_blocks,
        m.layers_per_block,
        m.spatial_kernel,
    ] {
        w.u64(v as u64);
    }
    w.f64(m.leaky_slope);
    w.f64(m.dropout_rate);
    w.u8(m.global_residual as u8);

    w.u8(ckpt.ablations.remove_spatial as u8);
    w.u8(ckpt.ablations.coords_as_channels as u8);
    w.u8(ckpt.ablations.remove_residuals as u8);

    let t = &ckpt.train_config;
    w.f64(t.learning_rate);
    w.u64(t.batch_size as u64);
    w.u64(t.epochs as u64);
    w.u64(t.seed);
    w.u8(t.shuffle as u8);
    w.u8(t.stop_at_loss.is_some() as u8);
    w.f64(t.stop_at_loss.unwrap_or(0.0));

    w.u8(ckpt.preprocess.root_center as u8);
    w.u8(ckpt.preprocess.convert_to_millimeters as u8);

    w.string(&ckpt.skeleton_preset);
    w.u8(match ckpt.units {
        Units::Millimeters => 0,
        Units::Meters => 1,
    });
    w.f64(ckpt.frame_interval_ms);
    w.u64(ckpt.epoch as u64);
    w.f64_vec(&ckpt.loss_history);

    w.u64(ckpt.params.len() as u64);
    for p in &ckpt.params {
        w.string(&p.name);
        w.u32(p.tensor.rank() as u32);
        for &d in p.tensor.shape() {
            w.u64(d as u64);
        }
        w.f64_vec(p.tensor.data());
    }

    w.u64(ckpt.adam.step);
    for moments in [&ckpt.adam.m, &ckpt.adam.v] {
        for vec in moments {
            w.f64_vec(vec);
        }
    }

    w.0.extend_from_slice(&ckpt.rng.seed);
    w.u64(ckpt.rng.stream);
    w.u128(ckpt.rng.word_pos);

    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

/// Parses a checkpoint, verifying the checksum (`path` is used in errors
/// only).
pub fn checkpoint_from_bytes(path: &Path, bytes: &[u8]) -> Result<Checkpoint, DataError> {
    if bytes.len() < DIGEST_LEN + 8 {
        return Err(DataError::format(path, "file too short to be a TRJN checkpoint".to_string()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - DIGEST_LEN);
    let digest = Sha256::digest(body);
    if digest.as_slice() != trailer {
        return Err(DataError::format(
            path,
            "checksum mismatch: the checkpoint is corrupt or was modified".to_string(),
        ));
    }

    let mut r = ByteReader::new(body);
    if r.take(4, path, "magic")? != MAGIC {
        return Err(DataError::format(path, "not a TRJN checkpoint (bad magic)".to_string()));
    }
    let version = r.u32(path, "version")?;
    if version != VERSION {
        return Err(DataError::format(path, format!("unsupported TRJN version {version}")));
    }

    let mut extents = [0usize; 8];
    for (i, name) in [
        "n_joints",
        "dim",
        "input_frames",
        "output_frames",
        "hidden_channels",
        "n_blocks",
        "layers_per_block",
        "spatial_kernel",
    ]
    .iter()
    .enumerate()
    {
        extents[i] = r.u64(path, name)? as usize;
    }
    let model_config = ModelConfig {
        n_joints: extents[0],
        dim: extents[1],
        input_frames: extents[2],
        output_frames: extents[3],
        hidden_channels: extents[4],
        n_blocks: extents[5],
        layers_per_block: extents[6],
        spatial_kernel: extents[7],
        leaky_slope: r.f64(path, "leaky_slope")?,
        dropout_rate: r.f64(path, "dropout_rate")?,
        global_residual: r.u8(path, "global_residual")? != 0,
    };
    let ablations = AblationFlags {
        remove_spatial: r.u8(path, "remove_spatial")? != 0,
        coords_as_channels: r.u8(path, "coords_as_channels")? != 0,
        remove_residuals: r.u8(path, "remove_residuals")? != 0,
    };
    let learning_rate = r.f64(path, "learning_rate")?;
    let batch_size = r.u64(path, "batch_size")? as usize;
    let epochs = r.u64(path, "epochs")? as usize;
    let seed = r.u64(path, "seed")?;
    let shuffle = r.u8(path, "shuffle")? != 0;
    let has_stop = r.u8(path, "stop flag")? != 0;
    let stop_value = r.f64(path, "stop_at_loss")?;
    let train_config = TrainConfig {
        learning_rate,
        batch_size,
        epochs,
        seed,
        shuffle,
        stop_at_loss: has_stop.then_some(stop_value),
    };
    let preprocess = PreprocessConfig {
        root_center: r.u8(path, "root_center")? != 0,
        convert_to_millimeters: r.u8(path, "convert_to_millimeters")? != 0,
    };
    let skeleton_preset = r.string(path, "preset name")?;
    let units = match r.u8(path, "units")? {
        0 => Units::Millimeters,
        1 => Units::Meters,
        other => return Err(DataError::format(path, format!("unknown units tag {other}"))),
    };
    let frame_interval_ms = r.f64(path, "frame interval")?;
    let epoch = r.u64(path, "epoch")? as usize;
    let loss_history = r.f64_vec(path, "loss history")?;

    let n_params = r.u64(path, "parameter count")? as usize;
    if n_params > 4096 {
        return Err(DataError::format(path, format!("implausible parameter count {n_params}")));
    }
    let mut params = Vec::with_capacity(n_params);
    for i in 0..n_params {
        let name = r.string(path, &format!("parameter {i} name"))?;
        let rank = r.u32(path, &format!("parameter {i} rank"))? as usize;
        if rank > 8 {
            return Err(DataError::format(path, format!("implausible rank {rank} for parameter '{name}'")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64(path, &format!("parameter {i} extent"))? as usize);
        }
        let data = r.f64_vec(path, &format!("parameter {i} data"))?;
        let tensor = Tensor::from_vec(&shape, data).map_err(|e| {
            DataError::format(path, format!("parameter '{name}' is inconsistent: {e}"))
        })?;
        params.push(Param { name, tensor });
    }

    let step = r.u64(path, "adam step")?;
    let mut m = Vec::with_capacity(n_params);
    let mut v = Vec::with_capacity(n_params);
    for (moments, tag) in [(&mut m, "first"), (&mut v, "second")] {
        for i in 0..n_params {
            let vec = r.f64_vec(path, &format!("adam {tag} moment {i}"))?;
            if vec.len() != params[i].tensor.len() {
                return Err(DataError::format(
                    path,
                    format!(
                        "adam {tag} moment {i} has {} elements but parameter '{}' has {}",
                        vec.len(),
                        params[i].name,
                        params[i].tensor.len()
                    ),
                ));
            }
            moments.push(vec);
        }
    }
    let adam = AdamState { step, m, v };

    let seed_bytes: [u8; 32] = r.take(32, path, "rng seed")?.try_into().expect("32 bytes");
    let rng = RngSnapshot {
        seed: seed_bytes,
        stream: r.u64(path, "rng stream")?,
        word_pos: r.u128(path, "rng word position")?,
    };

    if r.remaining() != 0 {
        return Err(DataError::format(path, format!("{} trailing bytes before the checksum", r.remaining())));
    }

    Ok(Checkpoint {
        model_config,
        ablations,
        train_config,
        preprocess,
        skeleton_preset,
        units,
        frame_interval_ms,
        epoch,
        loss_history,
        params,
        adam,
        rng,
    })
}

/// Writes a checkpoint atomically.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), DataError> {
    write_atomic(path, &checkpoint_to_bytes(ckpt))
}

/// Reads and verifies a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    checkpoint_from_bytes(path, &bytes)
}
