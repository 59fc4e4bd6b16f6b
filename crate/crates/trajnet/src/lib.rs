//! Convolutional trajectory-space models for human motion prediction.
//!
//! The crate predicts future skeleton poses from a short observed history.
//! Instead of treating a motion sequence frame by frame, the observed frames
//! are stacked on the channel axis of a 2D feature map whose rows are
//! coordinates and whose columns are joints. A 1x1 convolution then lifts the
//! per-joint coordinate trajectories into a learned trajectory space, a stack
//! of residual convolutional blocks mixes information across neighbouring
//! joints, and a small decoder emits one output channel per future frame.
//!
//! Everything needed to reproduce that pipeline lives here:
//!
//! * [`tensor`] / [`autodiff`] / [`optim`] — a small dense-`f64` tensor type,
//!   a reverse-mode differentiation graph covering exactly the operations the
//!   model needs, and an Adam optimizer.
//! * [`skeleton`] — joint/limb layout conventions and pose sequences.
//! * [`model`] — the trajectory network itself plus its ablation switches.
//! * [`training`] — the loss, the training loop, and checkpoints.
//! * [`eval`] — MPJPE / MSE / MAE reports, the zero-velocity baseline, and
//!   the ablation sweep driver.
//! * [`data`] — sequence file formats, dataset manifests, windowing, the
//!   synthetic motion generator, and checkpoint serialization.
//!
//! # Quick start
//!
//! ```
//! use trajnet::model::{AblationFlags, ModelConfig, TrajectoryNetModel};
//! use trajnet::tensor::Tensor;
//!
//! // A deliberately tiny configuration so the example runs instantly.
//! let config = ModelConfig {
//!     n_joints: 6,
//!     dim: 2,
//!     input_frames: 4,
//!     output_frames: 4,
//!     hidden_channels: 8,
//!     n_blocks: 1,
//!     ..ModelConfig::default()
//! };
//! let model = TrajectoryNetModel::init(config, AblationFlags::default(), 7).unwrap();
//!
//! // One observed window: 4 frames of a 6-joint planar skeleton.
//! let input = Tensor::zeros(&[4, 2, 6]);
//! let output = model.forward(&input).unwrap();
//! assert_eq!(output.shape(), &[4, 2, 6]); // one channel per future frame
//! ```

pub mod autodiff;
pub mod data;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod optim;
pub mod skeleton;
pub mod tensor;
pub mod training;

pub use autodiff::{DropoutMode, Graph, NodeId};
pub use tensor::{Tensor, TensorError};

/// Doc-tested chapters of the mdbook guide in `book/`. Each struct exists so
/// that `cargo test` compiles and runs the Rust snippets embedded in the
/// corresponding chapter, keeping the guide in sync with the crate.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(TensorsAndAutodiff, "../../../book/src/tensors-and-autodiff.md");
    chapter!(SkeletonsAndSequences, "../../../book/src/skeletons-and-sequences.md");
    chapter!(TheNetwork, "../../../book/src/the-network.md");
    chapter!(Training, "../../../book/src/training.md");
    chapter!(EvaluationAndAblations, "../../../book/src/evaluation-and-ablations.md");
    chapter!(FileFormats, "../../../book/src/file-formats.md");
    chapter!(CommandLine, "../../../book/src/command-line.md");
}
