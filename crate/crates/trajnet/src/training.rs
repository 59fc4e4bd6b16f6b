//! Training loop, objective, checkpoint state, and sequence-level
//! prediction.
//!
//! The objective is the squared pose error
//!
//! ```text
//! L = (1 / (N_j * N_o)) * sum over frames n, joints j of
//!         || predicted(n, j) - target(n, j) ||^2
//! ```
//!
//! i.e. the squared Euclidean norm of every joint's position error, summed
//! over the window and normalized by joint and frame counts. Squaring keeps
//! the gradient linear in the error (no square roots on the tape); the
//! unsquared millimeter metric lives in [`crate::eval`] and is reported
//! separately.
//!
//! One epoch visits every sample once, in a seeded shuffled order, averages
//! gradients over mini-batches, and applies one Adam update per batch.
//! Everything that influences a run — parameter init, shuffling, dropout —
//! flows from explicit generators, and [`Checkpoint`] captures the complete
//! mutable state (parameters, Adam moments, generator position), so training
//! for `k` epochs then resuming for `m` more is bit-identical to training
//! for `k + m` epochs straight.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId};
use crate::model::{AblationFlags, ForwardMode, ModelConfig, ModelError, Param, TrajectoryNetModel};
use crate::optim::{AdamConfig, AdamState};
use crate::skeleton::{
    from_output_tensor, to_input_tensor, InputLayout, MotionSequence, SkeletonError, Units,
};
use crate::tensor::{Tensor, TensorError};

/// Errors raised while training or applying a model.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    /// The sample list is empty.
    EmptyDataset,
    /// The loss left the finite range; parameters are no longer trustworthy.
    /// `epoch` is 1-based and names the epoch in which the blow-up happened.
    Diverged { epoch: usize, loss: f64 },
    /// A training hyper-parameter is out of range.
    BadConfig { what: &'static str, value: f64 },
    /// An observed sequence has the wrong number of frames for the model.
    WrongObservedLength { expected: usize, got: usize },
    Model(ModelError),
    Tensor(TensorError),
    Skeleton(SkeletonError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyDataset => write!(f, "no training samples"),
            TrainError::Diverged { epoch, loss } => {
                write!(f, "training diverged in epoch {epoch} (loss {loss:e}); lower the learning rate")
            }
            TrainError::BadConfig { what, value } => write!(f, "bad training config: {what} = {value}"),
            TrainError::WrongObservedLength { expected, got } => {
                write!(f, "observed window has {got} frames, the model expects {expected}")
            }
            TrainError::Model(e) => write!(f, "{e}"),
            TrainError::Tensor(e) => write!(f, "{e}"),
            TrainError::Skeleton(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> TrainError {
        TrainError::Model(e)
    }
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> TrainError {
        TrainError::Tensor(e)
    }
}

impl From<SkeletonError> for TrainError {
    fn from(e: SkeletonError) -> TrainError {
        TrainError::Skeleton(e)
    }
}

/// Hyper-parameters of the optimization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Samples per Adam update (gradients are averaged within a batch).
    pub batch_size: usize,
    /// Total epochs to train to; resuming continues toward the same total.
    pub epochs: usize,
    /// Seeds parameter init (stream 0) and shuffle/dropout (stream 1).
    pub seed: u64,
    /// Reshuffle the sample order every epoch.
    pub shuffle: bool,
    /// Stop early once the epoch training loss falls to this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_at_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 16,
            epochs: 200,
            seed: 0,
            shuffle: true,
            stop_at_loss: None,
        }
    }
}

/// Loss ceiling beyond which training is declared divergent even while the
/// numbers are still technically finite.
const DIVERGENCE_CEILING: f64 = 1e12;

/// Sequence-level preprocessing applied to every dataset before windowing.
/// Recorded in checkpoints so later evaluation feeds the model what it was
/// trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Subtract the root joint of the last observed frame from every pose in
    /// the window, making inputs translation-invariant.
    pub root_center: bool,
    /// Convert meter-denominated captures to millimeters up front.
    pub convert_to_millimeters: bool,
}

/// Applies the configured preprocessing to an (observed, future) window
/// pair. Root centering uses the root of the *observed* window's last frame
/// for both halves, so the target stays in the model's coordinate frame.
pub fn preprocess_window_pair(
    observed: &MotionSequence,
    future: &MotionSequence,
    cfg: PreprocessConfig,
) -> Result<(MotionSequence, MotionSequence), SkeletonError> {
    let mut obs = observed.clone();
    let mut fut = future.clone();
    if cfg.convert_to_millimeters {
        obs = obs.to_millimeters();
        fut = fut.to_millimeters();
    }
    if cfg.root_center {
        let last = obs.last_pose().ok_or(SkeletonError::EmptySequence)?;
        let origin = last.joint(obs.spec.root_joint).to_vec();
        obs = obs.translated(&origin)?;
        fut = fut.translated(&origin)?;
    }
    Ok((obs, fut))
}

/// One training sample: an observed-window tensor in the model's input
/// layout and its `[N_to, D, N_j]` ground-truth future.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub input: Tensor,
    pub target: Tensor,
}

impl TrainSample {
    /// Builds a sample from an (observed, future) window pair, laying the
    /// observed window out as the model expects.
    pub fn from_window_pair(
        observed: &MotionSequence,
        future: &MotionSequence,
        layout: InputLayout,
    ) -> Result<TrainSample, SkeletonError> {
        Ok(TrainSample {
            input: to_input_tensor(observed, layout, observed.len())?,
            target: to_input_tensor(future, InputLayout::TimeAsChannels, future.len())?,
        })
    }
}

/// Appends the squared pose error of `pred` against `target` to the graph
/// and returns the scalar loss node.
pub fn squared_pose_loss(g: &mut Graph, pred: NodeId, target: NodeId) -> Result<NodeId, TensorError> {
    let shape = g.value(pred).shape().to_vec();
    let diff = g.sub(pred, target)?;
    let ss = g.sum_squares(diff);
    let denom = (shape[0] * shape[2]) as f64;
    Ok(g.scale(ss, 1.0 / denom))
}

/// The exact position of a ChaCha generator, so a resumed run continues the
/// very same random stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSnapshot {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngSnapshot {
    pub fn capture(rng: &ChaCha8Rng) -> RngSnapshot {
        RngSnapshot { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Everything needed to resume training or apply a trained model later:
/// configuration, dataset conventions, parameters, optimizer moments, and
/// the generator position.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub ablations: AblationFlags,
    pub train_config: TrainConfig,
    pub preprocess: PreprocessConfig,
    /// Skeleton preset the training data used (e.g. `"h36m-22"`).
    pub skeleton_preset: String,
    pub units: Units,
    pub frame_interval_ms: f64,
    /// Completed epochs.
    pub epoch: usize,
    /// Mean training loss per completed epoch.
    pub loss_history: Vec<f64>,
    pub params: Vec<Param>,
    pub adam: AdamState,
    pub rng: RngSnapshot,
}

impl Checkpoint {
    /// Reassembles the model held in this checkpoint.
    pub fn model(&self) -> Result<TrajectoryNetModel, ModelError> {
        TrajectoryNetModel::from_parameters(self.model_config.clone(), self.ablations, self.params.clone())
    }
}

/// Dataset identity carried into a checkpoint alongside the trainer state.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub skeleton_preset: String,
    pub units: Units,
    pub frame_interval_ms: f64,
    pub preprocess: PreprocessConfig,
}

/// One completed epoch, as reported to the progress callback.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub wall_ms: u128,
}

/// Owns a model plus all optimization state and advances them epoch by
/// epoch.
pub struct Trainer {
    model: TrajectoryNetModel,
    train_config: TrainConfig,
    adam_config: AdamConfig,
    adam: AdamState,
    rng: ChaCha8Rng,
    epoch: usize,
    loss_history: Vec<f64>,
}

impl Trainer {
    /// Wraps a freshly initialized model. The shuffle/dropout generator runs
    /// on stream 1 of the training seed, independent of the parameter-init
    /// stream.
    pub fn new(model: TrajectoryNetModel, train_config: TrainConfig) -> Result<Trainer, TrainError> {
        if !(train_config.learning_rate.is_finite() && train_config.learning_rate >= 0.0) {
            return Err(TrainError::BadConfig { what: "learning_rate", value: train_config.learning_rate });
        }
        if train_config.batch_size == 0 {
            return Err(TrainError::BadConfig { what: "batch_size", value: 0.0 });
        }
        let lens: Vec<usize> = model.params().iter().map(|p| p.tensor.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
        rng.set_stream(1);
        let adam_config = AdamConfig::with_learning_rate(train_config.learning_rate);
        Ok(Trainer {
            model,
            train_config,
            adam_config,
            adam: AdamState::new(&lens),
            rng,
            epoch: 0,
            loss_history: Vec::new(),
        })
    }

    /// Restores a trainer mid-run from a checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Trainer, TrainError> {
        let model = ckpt.model()?;
        let mut trainer = Trainer::new(model, ckpt.train_config.clone())?;
        trainer.adam = ckpt.adam.clone();
        trainer.rng = ckpt.rng.restore();
        trainer.epoch = ckpt.epoch;
        trainer.loss_history = ckpt.loss_history.clone();
        Ok(trainer)
    }

    /// Snapshots the complete trainer state.
    pub fn to_checkpoint(&self, dataset: &DatasetMeta) -> Checkpoint {
        Checkpoint {
            model_config: self.model.config().clone(),
            ablations: *self.model.ablations(),
            train_config: self.train_config.clone(),
            preprocess: dataset.preprocess,
            skeleton_preset: dataset.skeleton_preset.clone(),
            units: dataset.units,
            frame_interval_ms: dataset.frame_interval_ms,
            epoch: self.epoch,
            loss_history: self.loss_history.clone(),
            params: self.model.params().to_vec(),
            adam: self.adam.clone(),
            rng: RngSnapshot::capture(&self.rng),
        }
    }

    pub fn model(&self) -> &TrajectoryNetModel {
        &self.model
    }

    /// Completed epochs so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    /// Moves the total-epoch target, e.g. to extend a resumed run beyond the
    /// total its checkpoint was created with.
    pub fn set_epochs(&mut self, epochs: usize) {
        self.train_config.epochs = epochs;
    }

    /// Runs one epoch over `samples` and returns its mean training loss.
    pub fn train_epoch(&mut self, samples: &[TrainSample]) -> Result<f64, TrainError> {
        if samples.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        if self.train_config.shuffle {
            order.shuffle(&mut self.rng);
        }

        let mut loss_sum = 0.0;
        for batch in order.chunks(self.train_config.batch_size) {
            let mut grads: Vec<Vec<f64>> =
                self.model.params().iter().map(|p| vec![0.0; p.tensor.len()]).collect();
            let weight = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &idx in batch {
                let sample = &samples[idx];
                let mut mode = ForwardMode::Train { rng: &mut self.rng };
                let mut pass = self.model.forward_pass(&sample.input, &mut mode)?;
                let target = pass.graph.leaf(sample.target.clone());
                let loss = squared_pose_loss(&mut pass.graph, pass.output, target)?;
                let loss_value = pass.graph.value(loss).scalar_value();
                pass.graph.backward(loss)?;
                for (acc, &pid) in grads.iter_mut().zip(&pass.param_ids) {
                    for (a, g) in acc.iter_mut().zip(pass.graph.grad(pid)) {
                        *a += weight * g;
                    }
                }
                batch_loss += weight * loss_value;
                loss_sum += loss_value;
            }
            if !batch_loss.is_finite() || batch_loss > DIVERGENCE_CEILING {
                return Err(TrainError::Diverged { epoch: self.epoch + 1, loss: batch_loss });
            }
            let mut params = self.model.param_tensors_mut();
            self.adam.step(&self.adam_config, &mut params, &grads)?;
        }

        self.epoch += 1;
        let mean = loss_sum / samples.len() as f64;
        self.loss_history.push(mean);
        Ok(mean)
    }

    /// Trains until the configured epoch total (resuming counts completed
    /// epochs) or the early-stop loss, reporting each epoch to `on_epoch`.
    /// Returns the final epoch's mean training loss.
    pub fn run(
        &mut self,
        samples: &[TrainSample],
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<f64, TrainError> {
        let mut last = self.loss_history.last().copied().unwrap_or(f64::INFINITY);
        while self.epoch < self.train_config.epochs {
            let t0 = Instant::now();
            last = self.train_epoch(samples)?;
            on_epoch(&EpochRecord { epoch: self.epoch, train_loss: last, wall_ms: t0.elapsed().as_millis() });
            if self.train_config.stop_at_loss.is_some_and(|th| last <= th) {
                break;
            }
        }
        Ok(last)
    }
}

/// Applies a trained model to an observed window and returns the predicted
/// future as a sequence in the observed window's skeleton and units.
pub fn predict(model: &TrajectoryNetModel, observed: &MotionSequence) -> Result<MotionSequence, TrainError> {
    let expected = model.config().input_frames;
    if observed.len() != expected {
        return Err(TrainError::WrongObservedLength { expected, got: observed.len() });
    }
    let input = to_input_tensor(observed, model.input_layout(), expected)?;
    let output = model.forward(&input)?;
    Ok(from_output_tensor(&output, InputLayout::TimeAsChannels, &observed.spec, observed.frame_interval_ms)?)
}
