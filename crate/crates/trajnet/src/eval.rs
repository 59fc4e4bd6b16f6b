//! Evaluation metrics for pose forecasts.
//!
//! All metrics compare a predicted window against the ground-truth future,
//! both as `[N_to, D, N_j]` tensors in the *same* joint order, frame by
//! frame:
//!
//! * **MPJPE** (mean per-joint position error) — the Euclidean distance
//!   between predicted and true joint positions, averaged over joints.
//!   Reported in millimeters, the conventional unit for this benchmark.
//! * **MSE / MAE** — per-coordinate squared / absolute error averaged over
//!   all coordinates of a frame. Reported in meters (squared meters for
//!   MSE), the conventional unit for depth-camera captures.
//!
//! Dataset-level numbers are the mean over samples of the per-sample value,
//! frame by frame; the headline `average` is then the mean of the per-frame
//! values across the whole horizon, so it is always recomputable from the
//! per-frame rows. Named horizon picks (80 ms, 160 ms, ... at a 40 ms frame
//! interval) are read off the same per-frame table.
//!
//! Unlike the training objective (which squares and normalizes differently
//! for cheap gradients), these metrics are for reporting only and never
//! touch the autodiff graph.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{AblationCell, AblationFlags, ModelConfig, TrajectoryNetModel};
use crate::skeleton::{to_input_tensor, InputLayout, MotionSequence, SkeletonError, Units};
use crate::tensor::Tensor;
use crate::training::{TrainConfig, TrainError, TrainSample, Trainer};

/// Errors raised by metric computation.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// No samples were supplied.
    Empty,
    /// Prediction and target shapes differ, or differ across samples.
    ShapeMismatch { pred: Vec<usize>, target: Vec<usize> },
    /// A tensor is not `[frames, dims, joints]`.
    NotRank3 { shape: Vec<usize> },
    /// Sequence manipulation failed while building a baseline.
    Skeleton(SkeletonError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Empty => write!(f, "no samples to evaluate"),
            EvalError::ShapeMismatch { pred, target } => {
                write!(f, "prediction shape {pred:?} does not match target shape {target:?}")
            }
            EvalError::NotRank3 { shape } => {
                write!(f, "expected a [frames, dims, joints] tensor, got shape {shape:?}")
            }
            EvalError::Skeleton(e) => write!(f, "sequence error: {e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<SkeletonError> for EvalError {
    fn from(e: SkeletonError) -> EvalError {
        EvalError::Skeleton(e)
    }
}

/// Which metric a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    /// Mean per-joint position error, millimeters.
    MpjpeMm,
    /// Mean squared per-coordinate error, square meters.
    MseM2,
    /// Mean absolute per-coordinate error, meters.
    MaeM,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::MpjpeMm, MetricKind::MseM2, MetricKind::MaeM];

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::MpjpeMm => "mpjpe_mm",
            MetricKind::MseM2 => "mse_m2",
            MetricKind::MaeM => "mae_m",
        }
    }
}

/// A named prediction-horizon entry of a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonValue {
    /// 1-based future frame index.
    pub frame: usize,
    /// Lead time of that frame in milliseconds.
    pub ms: f64,
    pub value: f64,
}

/// A dataset-level metric table: one value per future frame, the named
/// horizon picks, and the horizon-wide average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Metric label (see [`MetricKind::label`]).
    pub metric: String,
    pub frame_interval_ms: f64,
    /// Number of prediction/target pairs averaged.
    pub n_samples: usize,
    /// `per_frame[n]` is the dataset mean for future frame `n + 1`.
    pub per_frame: Vec<f64>,
    /// Mean of `per_frame` over the whole horizon.
    pub average: f64,
    pub horizons: Vec<HorizonValue>,
}

impl MetricReport {
    /// Renders the per-frame table as CSV: a `frame,ms,value` row per future
    /// frame plus a final `average` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,ms,value\n");
        for (i, v) in self.per_frame.iter().enumerate() {
            let ms = (i + 1) as f64 * self.frame_interval_ms;
            out.push_str(&format!("{},{},{v:.17}\n", i + 1, ms));
        }
        out.push_str(&format!("average,,{:.17}\n", self.average));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The standard frames reported as named horizons, when the prediction
/// window reaches them. At 40 ms per frame these are 80/160/320/400 ms for
/// short-term windows, plus 560/1000 ms once the horizon extends to 25
/// frames.
pub const HORIZON_FRAMES: [usize; 6] = [2, 4, 8, 10, 14, 25];

/// Per-frame metric values for one prediction/target pair. Values are
/// converted out of `units` into the metric's reporting unit.
pub fn metric_frames(
    kind: MetricKind,
    pred: &Tensor,
    target: &Tensor,
    units: Units,
) -> Result<Vec<f64>, EvalError> {
    if pred.rank() != 3 {
        return Err(EvalError::NotRank3 { shape: pred.shape().to_vec() });
    }
    if pred.shape() != target.shape() {
        return Err(EvalError::ShapeMismatch { pred: pred.shape().to_vec(), target: target.shape().to_vec() });
    }
    let (frames, dims, joints) = (pred.shape()[0], pred.shape()[1], pred.shape()[2]);
    let mut out = Vec::with_capacity(frames);
    for n in 0..frames {
        let value = match kind {
            MetricKind::MpjpeMm => {
                let mut sum = 0.0;
                for j in 0..joints {
                    let mut sq = 0.0;
                    for d in 0..dims {
                        let diff = units.scalar_to_millimeters(pred.at3(n, d, j) - target.at3(n, d, j));
                        sq += diff * diff;
                    }
                    sum += sq.sqrt();
                }
                sum / joints as f64
            }
            MetricKind::MseM2 => {
                let mut sum = 0.0;
                for d in 0..dims {
                    for j in 0..joints {
                        let diff = units.scalar_to_meters(pred.at3(n, d, j) - target.at3(n, d, j));
                        sum += diff * diff;
                    }
                }
                sum / (dims * joints) as f64
            }
            MetricKind::MaeM => {
                let mut sum = 0.0;
                for d in 0..dims {
                    for j in 0..joints {
                        sum += units.scalar_to_meters(pred.at3(n, d, j) - target.at3(n, d, j)).abs();
                    }
                }
                sum / (dims * joints) as f64
            }
        };
        out.push(value);
    }
    Ok(out)
}

/// Averages a metric over a dataset of prediction/target pairs and formats
/// the result as a [`MetricReport`].
pub fn dataset_report(
    kind: MetricKind,
    pairs: &[(Tensor, Tensor)],
    units: Units,
    frame_interval_ms: f64,
) -> Result<MetricReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let shape = pairs[0].0.shape().to_vec();
    let frames = shape[0];
    let mut per_frame = vec![0.0; frames];
    for (pred, target) in pairs {
        if pred.shape() != shape.as_slice() {
            return Err(EvalError::ShapeMismatch { pred: pred.shape().to_vec(), target: shape });
        }
        let values = metric_frames(kind, pred, target, units)?;
        for (acc, v) in per_frame.iter_mut().zip(&values) {
            *acc += v;
        }
    }
    for v in per_frame.iter_mut() {
        *v /= pairs.len() as f64;
    }
    let average = per_frame.iter().sum::<f64>() / frames as f64;
    let horizons = HORIZON_FRAMES
        .into_iter()
        .filter(|&f| f <= frames)
        .map(|f| HorizonValue { frame: f, ms: f as f64 * frame_interval_ms, value: per_frame[f - 1] })
        .collect();
    Ok(MetricReport {
        metric: kind.label().to_string(),
        frame_interval_ms,
        n_samples: pairs.len(),
        per_frame,
        average,
        horizons,
    })
}

/// The zero-velocity baseline: predict the last observed pose for every
/// future frame, as a `[horizon, D, N_j]` tensor in model joint order. Any
/// learned model must beat this to be worth its parameters.
pub fn zero_velocity_prediction(observed: &MotionSequence, horizon: usize) -> Result<Tensor, EvalError> {
    let extended = observed.repeat_last_frame(horizon)?;
    let future = extended.window(observed.len(), horizon);
    Ok(to_input_tensor(&future, InputLayout::TimeAsChannels, horizon)?)
}

/// The future frames singled out as columns of a variant-comparison table,
/// labeled `F_2` / `F_4` / `F_8` / `F_10` in its rendered forms.
pub const SWEEP_FRAMES: [usize; 4] = [2, 4, 8, 10];

/// What happened to one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    /// Training finished; metrics were computed on the held-out pairs.
    Completed { final_train_loss: f64, report: MetricReport },
    /// The loss blew up; the cell is kept in the table so a sweep never
    /// silently drops a variant.
    Diverged { epoch: usize, loss: f64 },
    /// The cell failed before or outside optimization (bad derived config,
    /// shape trouble); recorded verbatim.
    Failed { what: String },
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: AblationCell,
    pub outcome: SweepOutcome,
}

/// The results of training and scoring a set of named variants under one
/// seed and data order. Rows keep the caller's cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Metric label (see [`MetricKind::label`]).
    pub metric: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, cell: AblationCell) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.cell == cell)
    }

    /// The `F_n` columns actually available: sweep frames within the horizon
    /// of the completed rows (all sweep frames if nothing completed).
    fn columns(&self) -> Vec<usize> {
        let horizon = self
            .rows
            .iter()
            .filter_map(|r| match &r.outcome {
                SweepOutcome::Completed { report, .. } => Some(report.per_frame.len()),
                _ => None,
            })
            .max();
        match horizon {
            Some(h) => SWEEP_FRAMES.into_iter().filter(|&f| f <= h).collect(),
            None => SWEEP_FRAMES.to_vec(),
        }
    }

    /// Renders the table as CSV: `cell,F_2,...,average,status` with one row
    /// per variant. Diverged/failed cells carry empty value columns and a
    /// non-`ok` status.
    pub fn to_csv(&self) -> String {
        let columns = self.columns();
        let mut out = String::from("cell");
        for f in &columns {
            out.push_str(&format!(",F_{f}"));
        }
        out.push_str(",average,status\n");
        for row in &self.rows {
            out.push_str(row.cell.label());
            match &row.outcome {
                SweepOutcome::Completed { report, .. } => {
                    for &f in &columns {
                        match report.per_frame.get(f - 1) {
                            Some(v) => out.push_str(&format!(",{v:.17}")),
                            None => out.push(','),
                        }
                    }
                    out.push_str(&format!(",{:.17},ok\n", report.average));
                }
                SweepOutcome::Diverged { epoch, loss } => {
                    out.push_str(&",".repeat(columns.len() + 1));
                    out.push_str(&format!(",diverged at epoch {epoch} (loss {loss:e})\n"));
                }
                SweepOutcome::Failed { what } => {
                    out.push_str(&",".repeat(columns.len() + 1));
                    out.push_str(&format!(",failed: {}\n", what.replace(',', ";")));
                }
            }
        }
        out
    }

    /// Renders an aligned text table for terminals and logs.
    pub fn to_text(&self) -> String {
        let columns = self.columns();
        let mut header = vec!["cell".to_string()];
        header.extend(columns.iter().map(|f| format!("F_{f}")));
        header.push("average".to_string());
        let mut grid = vec![header];
        for row in &self.rows {
            let mut cells = vec![row.cell.label().to_string()];
            match &row.outcome {
                SweepOutcome::Completed { report, .. } => {
                    for &f in &columns {
                        match report.per_frame.get(f - 1) {
                            Some(v) => cells.push(format!("{v:.3}")),
                            None => cells.push("-".to_string()),
                        }
                    }
                    cells.push(format!("{:.3}", report.average));
                }
                SweepOutcome::Diverged { epoch, .. } => {
                    cells.extend(vec!["-".to_string(); columns.len()]);
                    cells.push(format!("diverged@{epoch}"));
                }
                SweepOutcome::Failed { .. } => {
                    cells.extend(vec!["-".to_string(); columns.len()]);
                    cells.push("failed".to_string());
                }
            }
            grid.push(cells);
        }
        let width = |c: usize| grid.iter().map(|r| r[c].len()).max().unwrap_or(0);
        let widths: Vec<usize> = (0..grid[0].len()).map(width).collect();
        let mut out = String::new();
        for row in &grid {
            let line: Vec<String> =
                row.iter().zip(&widths).map(|(cell, w)| format!("{cell:>w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Input tensors in both layouts a cell might want, built once per sweep.
struct LayoutCache<'a> {
    pairs: &'a [(MotionSequence, MotionSequence)],
    horizon: usize,
    time: Option<Vec<TrainSample>>,
    coords: Option<Vec<TrainSample>>,
}

impl<'a> LayoutCache<'a> {
    fn new(pairs: &'a [(MotionSequence, MotionSequence)], horizon: usize) -> LayoutCache<'a> {
        LayoutCache { pairs, horizon, time: None, coords: None }
    }

    fn samples(&mut self, layout: InputLayout) -> Result<&[TrainSample], SkeletonError> {
        let slot = match layout {
            InputLayout::TimeAsChannels => &mut self.time,
            InputLayout::CoordsAsChannels => &mut self.coords,
        };
        if slot.is_none() {
            let mut built = Vec::with_capacity(self.pairs.len());
            for (obs, fut) in self.pairs {
                let truncated = fut.window(0, self.horizon.min(fut.len()));
                built.push(TrainSample::from_window_pair(obs, &truncated, layout)?);
            }
            *slot = Some(built);
        }
        Ok(slot.as_deref().expect("cache slot was just filled"))
    }
}

/// Trains every named variant in `cells` from the same base configuration,
/// seed, and data order, then scores each on the held-out pairs. Cells that
/// resolve to an identical configuration (for example `WS`, `WSRC`, and
/// `WGCOT-4` when the base already has four blocks) share one training run —
/// with a fixed seed a retrain would reproduce it bit for bit anyway.
///
/// A failing cell never aborts the sweep: its row records the divergence or
/// error and the remaining cells still run.
pub fn ablation_sweep(
    base: &ModelConfig,
    cells: &[AblationCell],
    train_config: &TrainConfig,
    kind: MetricKind,
    train_pairs: &[(MotionSequence, MotionSequence)],
    eval_pairs: &[(MotionSequence, MotionSequence)],
) -> Result<SweepTable, EvalError> {
    if train_pairs.is_empty() || eval_pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let horizon = base.output_frames;
    let mut train_cache = LayoutCache::new(train_pairs, horizon);
    let mut done: Vec<(ModelConfig, AblationFlags, SweepOutcome)> = Vec::new();
    let mut rows = Vec::with_capacity(cells.len());
    for &cell in cells {
        let (config, flags) = cell.apply(base);
        let outcome = match done.iter().find(|(c, f, _)| *c == config && *f == flags) {
            Some((_, _, outcome)) => {
                log::info!("sweep cell {}: reusing identical earlier run", cell.label());
                outcome.clone()
            }
            None => {
                log::info!("sweep cell {}: training", cell.label());
                let outcome = run_cell(&config, flags, train_config, kind, &mut train_cache, eval_pairs);
                done.push((config, flags, outcome.clone()));
                outcome
            }
        };
        rows.push(SweepRow { cell, outcome });
    }
    Ok(SweepTable { metric: kind.label().to_string(), rows })
}

/// Trains and scores one concrete (config, flags) cell.
fn run_cell(
    config: &ModelConfig,
    flags: AblationFlags,
    train_config: &TrainConfig,
    kind: MetricKind,
    train_cache: &mut LayoutCache<'_>,
    eval_pairs: &[(MotionSequence, MotionSequence)],
) -> SweepOutcome {
    let failed = |what: String| SweepOutcome::Failed { what };
    let model = match TrajectoryNetModel::init(config.clone(), flags, train_config.seed) {
        Ok(m) => m,
        Err(e) => return failed(e.to_string()),
    };
    let layout = model.input_layout();
    let samples = match train_cache.samples(layout) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let mut trainer = match Trainer::new(model, train_config.clone()) {
        Ok(t) => t,
        Err(e) => return failed(e.to_string()),
    };
    let final_train_loss = match trainer.run(samples, |_| {}) {
        Ok(loss) => loss,
        Err(TrainError::Diverged { epoch, loss }) => return SweepOutcome::Diverged { epoch, loss },
        Err(e) => return failed(e.to_string()),
    };

    let model = trainer.model();
    let horizon = config.output_frames;
    let units = eval_pairs[0].0.spec.units;
    let frame_interval_ms = eval_pairs[0].0.frame_interval_ms;
    let mut scored = Vec::with_capacity(eval_pairs.len());
    for (obs, fut) in eval_pairs {
        let input = match to_input_tensor(obs, layout, obs.len()) {
            Ok(t) => t,
            Err(e) => return failed(e.to_string()),
        };
        let pred = match model.forward(&input) {
            Ok(t) => t,
            Err(e) => return failed(e.to_string()),
        };
        let truncated = fut.window(0, horizon.min(fut.len()));
        let target = match to_input_tensor(&truncated, InputLayout::TimeAsChannels, truncated.len()) {
            Ok(t) => t,
            Err(e) => return failed(e.to_string()),
        };
        scored.push((pred, target));
    }
    match dataset_report(kind, &scored, units, frame_interval_ms) {
        Ok(report) => SweepOutcome::Completed { final_train_loss, report },
        Err(e) => failed(e.to_string()),
    }
}
