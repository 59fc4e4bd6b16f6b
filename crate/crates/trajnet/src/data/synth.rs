//! Synthetic motion generator.
//!
//! Real skeletal motion has two properties the models in this crate are
//! built to exploit: joint trajectories are smooth, and joints move
//! *together* — strongly within a limb, more loosely across limbs. The
//! generator reproduces both with sinusoid mixtures:
//!
//! * every sequence draws one **global** oscillation (frequency + per-axis
//!   phase) and one **per-limb** oscillation;
//! * the curve driving a limb is the convex mix
//!   `rho * global + (1 - rho) * limb`, computed once per (limb, frame,
//!   axis) so that joints sharing a limb share the exact same carrier;
//! * each joint adds a small private wobble (amplitude and phase jitter),
//!   scaled by `(1 - rho)` so it vanishes as correlation goes to 1;
//! * joints sit at deterministic rest offsets, and optional Gaussian noise
//!   is added per coordinate.
//!
//! At `correlation = 1` and zero noise every joint therefore traces an
//! exactly parallel copy of the same curve — a handy ground truth for
//! testing models that claim to learn cross-joint structure. At
//! `correlation = 0` limbs move independently.
//!
//! Sizes are denominated in millimeters and converted to the preset's
//! units, so `h36m-22` (mm) and `g3d-18` (m) datasets have the same
//! physical scale.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::skeleton::{MotionSequence, Pose, SkeletonSpec};

use super::manifest::{write_manifest, ManifestEntry, Windowing};
use super::sequence_io::write_sequence_text;
use super::DataError;

/// Peak oscillation amplitude, in millimeters.
const AMPLITUDE_MM: f64 = 120.0;
/// Frequency range of the carriers, in Hz.
const FREQ_RANGE_HZ: (f64, f64) = (0.2, 0.8);
/// Range of the per-joint amplitude jitter (relative to the carrier).
const AMP_JITTER: f64 = 0.3;

/// Parameters of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Skeleton preset to generate for.
    pub preset: String,
    pub n_sequences: usize,
    /// Frames per sequence.
    pub frames: usize,
    pub frame_interval_ms: f64,
    /// Cross-limb correlation `rho` in `[0, 1]`: 1 moves every joint in
    /// lockstep, 0 gives every limb its own carrier.
    pub correlation: f64,
    /// Standard deviation of per-coordinate Gaussian noise, in the preset's
    /// units.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            preset: "h36m-22".into(),
            n_sequences: 16,
            frames: 60,
            frame_interval_ms: 40.0,
            correlation: 0.9,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

fn validate(cfg: &SynthConfig) -> Result<SkeletonSpec, DataError> {
    let spec = SkeletonSpec::preset(&cfg.preset)
        .map_err(|e| DataError::Config { what: e.to_string() })?;
    if cfg.n_sequences == 0 {
        return Err(DataError::Config { what: "n_sequences must be positive".into() });
    }
    if cfg.frames == 0 {
        return Err(DataError::Config { what: "frames must be positive".into() });
    }
    if !(cfg.frame_interval_ms.is_finite() && cfg.frame_interval_ms > 0.0) {
        return Err(DataError::Config {
            what: format!("frame_interval_ms must be positive, got {}", cfg.frame_interval_ms),
        });
    }
    if !(0.0..=1.0).contains(&cfg.correlation) {
        return Err(DataError::Config {
            what: format!("correlation must be in [0, 1], got {}", cfg.correlation),
        });
    }
    if !(cfg.noise_std.is_finite() && cfg.noise_std >= 0.0) {
        return Err(DataError::Config { what: format!("noise_std must be non-negative, got {}", cfg.noise_std) });
    }
    Ok(spec)
}

/// Deterministic rest position of a joint, in the preset's units.
fn rest_position(j: usize, d: usize, mm: f64) -> f64 {
    (50.0 * (j + 1) as f64 + 400.0 * d as f64) * mm
}

fn generate_one(cfg: &SynthConfig, spec: &SkeletonSpec, rng: &mut ChaCha8Rng) -> MotionSequence {
    let n_joints = spec.n_joints();
    let dim = spec.dim;
    let n_limbs = spec.limbs.len();
    // source joint index -> limb index
    let mut limb_of = vec![0usize; n_joints];
    for (l, limb) in spec.limbs.iter().enumerate() {
        for &j in &limb.joints {
            limb_of[j] = l;
        }
    }
    // 1 mm expressed in the preset's units.
    let mm = 1.0 / spec.units.to_millimeters_factor();
    let amplitude = AMPLITUDE_MM * mm;
    let rho = cfg.correlation;
    let dt = cfg.frame_interval_ms / 1000.0;

    let freq = |r: &mut ChaCha8Rng| FREQ_RANGE_HZ.0 + r.random::<f64>() * (FREQ_RANGE_HZ.1 - FREQ_RANGE_HZ.0);
    let global_freq = freq(rng);
    let global_phase: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * TAU).collect();
    let limb_freq: Vec<f64> = (0..n_limbs).map(|_| freq(rng)).collect();
    let limb_phase: Vec<Vec<f64>> =
        (0..n_limbs).map(|_| (0..dim).map(|_| rng.random::<f64>() * TAU).collect()).collect();
    let joint_amp_jitter: Vec<f64> =
        (0..n_joints).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * AMP_JITTER).collect();
    let joint_phase_jitter: Vec<f64> = (0..n_joints).map(|_| rng.random::<f64>() * TAU).collect();

    let mut seq = MotionSequence::new(spec.clone(), cfg.frame_interval_ms);
    let mut carrier = vec![0.0; n_limbs * dim];
    for t in 0..cfg.frames {
        let tau = t as f64 * dt;
        // One carrier value per (limb, axis), shared bit-for-bit by every
        // joint of the limb.
        for l in 0..n_limbs {
            for d in 0..dim {
                let global = (TAU * global_freq * tau + global_phase[d]).sin();
                let own = (TAU * limb_freq[l] * tau + limb_phase[l][d]).sin();
                carrier[l * dim + d] = rho * global + (1.0 - rho) * own;
            }
        }
        let mut pose = Pose::zeros(n_joints, dim);
        for j in 0..n_joints {
            let l = limb_of[j];
            for d in 0..dim {
                let wobble = (1.0 - rho)
                    * joint_amp_jitter[j]
                    * (TAU * limb_freq[l] * tau + limb_phase[l][d] + joint_phase_jitter[j]).sin();
                let mut v = rest_position(j, d, mm) + amplitude * (carrier[l * dim + d] + wobble);
                if cfg.noise_std > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    v += cfg.noise_std * z;
                }
                pose.joint_mut(j)[d] = v;
            }
        }
        seq.push_pose(pose).expect("generated poses are finite");
    }
    seq
}

/// Generates the configured number of sequences, deterministically in the
/// seed.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<MotionSequence>, DataError> {
    let spec = validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    Ok((0..cfg.n_sequences).map(|_| generate_one(cfg, &spec, &mut rng)).collect())
}

/// What [`write_synthetic_dataset`] produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSummary {
    pub manifest_path: PathBuf,
    pub n_train: usize,
    pub n_eval: usize,
}

/// Generates a dataset, writes one `trajseq` file per sequence plus a
/// manifest (`dataset.trajman`) into `dir`, and assigns the last
/// `eval_fraction` of the sequences to the `eval` split (at least one each
/// when there are two or more sequences).
pub fn write_synthetic_dataset(
    dir: &Path,
    cfg: &SynthConfig,
    windowing: Windowing,
    eval_fraction: f64,
) -> Result<SynthSummary, DataError> {
    if !(0.0..=1.0).contains(&eval_fraction) {
        return Err(DataError::Config { what: format!("eval_fraction must be in [0, 1], got {eval_fraction}") });
    }
    let sequences = generate_dataset(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;

    let n = sequences.len();
    let mut n_eval = (n as f64 * eval_fraction).round() as usize;
    if n >= 2 {
        n_eval = n_eval.clamp(1, n - 1);
    } else {
        n_eval = 0;
    }
    let n_train = n - n_eval;

    let mut entries = Vec::with_capacity(n);
    for (i, seq) in sequences.iter().enumerate() {
        let name = format!("seq_{i:03}.trajseq");
        write_sequence_text(&dir.join(&name), seq)?;
        let split = if i < n_train { "train" } else { "eval" };
        entries.push(ManifestEntry { path: PathBuf::from(name), split: split.into(), label: "synthetic".into() });
    }
    let manifest_path = dir.join("dataset.trajman");
    write_manifest(&manifest_path, windowing, &entries)?;
    Ok(SynthSummary { manifest_path, n_train, n_eval })
}
