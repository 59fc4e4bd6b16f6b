//! The trajectory network and its ablation switches.
//!
//! Architecture, for an observed window of `N_ti` frames over `N_j` joints
//! with `D` coordinates each:
//!
//! 1. **Trajectory space transform** — a 1x1 convolution over the
//!    `[N_ti, D, N_j]` input lifts each joint's coordinate trajectory into
//!    `hidden_channels` learned trajectory components, followed by a leaky
//!    rectifier and dropout. Being 1x1, it mixes time only, never joints.
//! 2. **Encoder** — `n_blocks` trajectory blocks. A block is
//!    `layers_per_block` stages of `conv(k x k, same) -> leaky -> dropout`
//!    with symmetric skip connections: the tensor entering stage `i` is added
//!    to the convolution output of stage `layers_per_block + 1 - i` (before
//!    its activation), for `i` up to the midpoint. Spatial kernels grow the
//!    receptive field along the joint axis by `k - 1` per layer.
//! 3. **Decoder** — a `k x k` convolution maps the latent trajectories to
//!    `N_to` channels (one per future frame), then a linear 1x1 convolution
//!    decorrelates the channels. With `global_residual` on, the last observed
//!    pose is broadcast to every output channel and added, so the network
//!    only has to predict offsets from standing still; with a zeroed decoder
//!    this reproduces the repeat-last-frame baseline bit for bit.
//!
//! The layout ablation (`coords_as_channels`) runs the transform and encoder
//! on a `[D, N_j, N_ti]` tensor instead, which removes global temporal
//! co-occurrence: kernels then only see `k` neighbouring frames. Since no
//! bijective reshape from that feature grid back to the `[N_to, D, N_j]`
//! output convention exists, the decoder inserts one extra *linear* 1x1
//! convolution over the stale time axis (`N_ti -> D`) between its two
//! standard layers; it is zero-initialized together with the rest of the
//! decoder, preserving the global-residual identity.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DropoutMode, Graph, NodeId};
use crate::skeleton::InputLayout;
use crate::tensor::{Tensor, TensorError};

/// Errors raised by model construction and the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A configuration field is out of range.
    BadConfig { what: &'static str, value: f64 },
    /// The input tensor does not match the configured extents/layout.
    WrongInputShape { expected: Vec<usize>, got: Vec<usize> },
    /// The input contains NaN or infinite coordinates.
    NonFiniteInput,
    /// An encoder layer ordinal outside `1..=n_blocks*layers_per_block`.
    LayerOutOfRange { layer: usize, max: usize },
    /// An underlying tensor operation failed (shapes are validated up front,
    /// so this indicates an internal inconsistency).
    Tensor(TensorError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::BadConfig { what, value } => write!(f, "bad model config: {what} = {value}"),
            ModelError::WrongInputShape { expected, got } => {
                write!(f, "input shape {got:?} does not match the model (expected {expected:?})")
            }
            ModelError::NonFiniteInput => write!(f, "input tensor contains non-finite values"),
            ModelError::LayerOutOfRange { layer, max } => {
                write!(f, "encoder layer {layer} out of range (1..={max})")
            }
            ModelError::Tensor(e) => write!(f, "tensor error: {e}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<TensorError> for ModelError {
    fn from(e: TensorError) -> ModelError {
        ModelError::Tensor(e)
    }
}

/// Structural hyper-parameters of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Joints per pose (N_j).
    pub n_joints: usize,
    /// Coordinates per joint (D).
    pub dim: usize,
    /// Observed frames per window (N_ti).
    pub input_frames: usize,
    /// Predicted frames per window (N_to).
    pub output_frames: usize,
    /// Trajectory-space channels (C).
    pub hidden_channels: usize,
    /// Trajectory blocks in the encoder.
    pub n_blocks: usize,
    /// Convolution stages per block.
    pub layers_per_block: usize,
    /// Side of the square encoder/decoder kernels (odd).
    pub spatial_kernel: usize,
    /// Negative-side slope of the leaky rectifier.
    pub leaky_slope: f64,
    /// Dropout rate after every activated convolution.
    pub dropout_rate: f64,
    /// Add the broadcast last observed pose to the decoder output.
    pub global_residual: bool,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            n_joints: 22,
            dim: 3,
            input_frames: 10,
            output_frames: 10,
            hidden_channels: 64,
            n_blocks: 4,
            layers_per_block: 5,
            spatial_kernel: 3,
            leaky_slope: 0.1,
            dropout_rate: 0.1,
            global_residual: true,
        }
    }
}

/// The three architectural switches studied by the ablation sweep. All off
/// is the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationFlags {
    /// Force every kernel to 1x1, removing joint mixing entirely.
    pub remove_spatial: bool,
    /// Feed `[D, N_j, N_ti]` instead of `[N_ti, D, N_j]`, moving time off
    /// the channel axis.
    pub coords_as_channels: bool,
    /// Disable the in-block symmetric skip connections.
    pub remove_residuals: bool,
}

/// Named cells of the ablation grid. "W"/"R" prefixes read "with"/"removed";
/// GCOT cells re-layout the input (global co-occurrence of time) and carry
/// their encoder depth in the name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationCell {
    Ws,
    Rs,
    Wgcot1,
    Rgcot1,
    Wgcot4,
    Rgcot4,
    Wsrc,
    Rsrc,
}

impl AblationCell {
    pub const ALL: [AblationCell; 8] = [
        AblationCell::Ws,
        AblationCell::Rs,
        AblationCell::Wgcot1,
        AblationCell::Rgcot1,
        AblationCell::Wgcot4,
        AblationCell::Rgcot4,
        AblationCell::Wsrc,
        AblationCell::Rsrc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationCell::Ws => "WS",
            AblationCell::Rs => "RS",
            AblationCell::Wgcot1 => "WGCOT-1",
            AblationCell::Rgcot1 => "RGCOT-1",
            AblationCell::Wgcot4 => "WGCOT-4",
            AblationCell::Rgcot4 => "RGCOT-4",
            AblationCell::Wsrc => "WSRC",
            AblationCell::Rsrc => "RSRC",
        }
    }

    pub fn parse(s: &str) -> Option<AblationCell> {
        let up = s.to_ascii_uppercase();
        AblationCell::ALL.into_iter().find(|c| c.label() == up)
    }

    /// The concrete configuration/flag pair this cell denotes, relative to a
    /// base config. GCOT cells pin the encoder depth named in their label.
    pub fn apply(self, base: &ModelConfig) -> (ModelConfig, AblationFlags) {
        let mut config = base.clone();
        let mut flags = AblationFlags::default();
        match self {
            AblationCell::Ws | AblationCell::Wsrc => {}
            AblationCell::Rs => flags.remove_spatial = true,
            AblationCell::Rsrc => flags.remove_residuals = true,
            AblationCell::Wgcot1 => config.n_blocks = 1,
            AblationCell::Wgcot4 => config.n_blocks = 4,
            AblationCell::Rgcot1 => {
                config.n_blocks = 1;
                flags.coords_as_channels = true;
            }
            AblationCell::Rgcot4 => {
                config.n_blocks = 4;
                flags.coords_as_channels = true;
            }
        }
        (config, flags)
    }
}

/// One named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
}

/// Where a convolution sits in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRole {
    Transform,
    /// 1-based block and stage-within-block indices.
    Encoder { block: usize, stage: usize },
    DecoderSpatial,
    /// The linear time-unmixing 1x1 layer, present only under
    /// `coords_as_channels`.
    DecoderUnmix,
    DecoderOut,
}

/// One row of the architecture plan/report.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerInfo {
    pub role: LayerRole,
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// Analytic receptive field along the joint axis after this layer.
    pub receptive_field: usize,
    pub parameter_count: usize,
}

/// Evaluation vs. training forward behaviour (training draws dropout masks
/// from the supplied generator).
pub enum ForwardMode<'a> {
    Eval,
    Train { rng: &'a mut ChaCha8Rng },
}

/// A completed forward pass: the tape plus the node ids needed to read the
/// output, drive backward, and inspect intermediate activations.
pub struct ForwardPass {
    pub graph: Graph,
    pub input: NodeId,
    pub output: NodeId,
    /// Parameter leaf ids, parallel to the model's parameter list.
    pub param_ids: Vec<NodeId>,
    /// Output of the trajectory space transform (post-dropout).
    pub transform_tap: NodeId,
    /// Output of every encoder stage (post-dropout), in network order.
    pub encoder_taps: Vec<NodeId>,
}

impl ForwardPass {
    pub fn output_tensor(&self) -> &Tensor {
        self.graph.value(self.output)
    }
}

/// The trajectory network: configuration, ablation switches, and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryNetModel {
    config: ModelConfig,
    ablations: AblationFlags,
    params: Vec<Param>,
}

impl TrajectoryNetModel {
    /// Validates the configuration and draws fresh parameters. Weights use
    /// the fan-balanced uniform init; biases start at zero. Deterministic in
    /// the seed.
    pub fn init(config: ModelConfig, ablations: AblationFlags, seed: u64) -> Result<TrajectoryNetModel, ModelError> {
        validate_config(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for entry in layer_plan(&config, &ablations) {
            params.push(Param {
                name: format!("{}.w", entry.name),
                tensor: Tensor::conv_init(&mut rng, entry.out_c, entry.in_c, entry.kernel, entry.kernel),
            });
            params.push(Param { name: format!("{}.b", entry.name), tensor: Tensor::zeros(&[entry.out_c]) });
        }
        Ok(TrajectoryNetModel { config, ablations, params })
    }

    /// Rebuilds a model from persisted parameters (checkpoint loading). The
    /// parameter list must match the plan implied by the config and flags.
    pub fn from_parameters(
        config: ModelConfig,
        ablations: AblationFlags,
        params: Vec<Param>,
    ) -> Result<TrajectoryNetModel, ModelError> {
        validate_config(&config)?;
        let plan = layer_plan(&config, &ablations);
        if params.len() != plan.len() * 2 {
            return Err(ModelError::BadConfig { what: "parameter count", value: params.len() as f64 });
        }
        for (k, entry) in plan.iter().enumerate() {
            let w = &params[2 * k];
            let b = &params[2 * k + 1];
            let expect_w = [entry.out_c, entry.in_c, entry.kernel, entry.kernel];
            if w.tensor.shape() != expect_w || b.tensor.shape() != [entry.out_c] {
                return Err(ModelError::WrongInputShape {
                    expected: expect_w.to_vec(),
                    got: w.tensor.shape().to_vec(),
                });
            }
        }
        Ok(TrajectoryNetModel { config, ablations, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn ablations(&self) -> &AblationFlags {
        &self.ablations
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    /// Mutable access to the parameter tensors, in plan order (for the
    /// optimizer).
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.iter_mut().map(|p| &mut p.tensor).collect()
    }

    /// Zeroes every decoder parameter; with `global_residual` on, the model
    /// then predicts exactly the last observed pose for every future frame.
    pub fn zero_decoder(&mut self) {
        for p in &mut self.params {
            if p.name.starts_with("dec.") {
                p.tensor = Tensor::zeros(p.tensor.shape());
            }
        }
    }

    /// Total number of learnable scalars.
    pub fn count_parameters(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// The input layout implied by the ablation flags.
    pub fn input_layout(&self) -> InputLayout {
        if self.ablations.coords_as_channels {
            InputLayout::CoordsAsChannels
        } else {
            InputLayout::TimeAsChannels
        }
    }

    /// The `[C, H, W]` input tensor shape this model expects.
    pub fn expected_input_shape(&self) -> Vec<usize> {
        let c = &self.config;
        match self.input_layout() {
            InputLayout::TimeAsChannels => vec![c.input_frames, c.dim, c.n_joints],
            InputLayout::CoordsAsChannels => vec![c.dim, c.n_joints, c.input_frames],
        }
    }

    /// Effective kernel side after the spatial ablation.
    pub fn effective_kernel(&self) -> usize {
        if self.ablations.remove_spatial {
            1
        } else {
            self.config.spatial_kernel
        }
    }

    /// Analytic receptive field along the joint axis at the output of the
    /// given encoder layer (1-based ordinal across blocks). The 1x1 transform
    /// contributes a field of 1 and every encoder layer widens it by
    /// `kernel - 1`.
    pub fn receptive_field(&self, encoder_layer: usize) -> Result<usize, ModelError> {
        let max = self.config.n_blocks * self.config.layers_per_block;
        if encoder_layer == 0 || encoder_layer > max {
            return Err(ModelError::LayerOutOfRange { layer: encoder_layer, max });
        }
        Ok(1 + encoder_layer * (self.effective_kernel() - 1))
    }

    /// First encoder layer whose receptive field covers the whole joint
    /// axis, if any layer does.
    pub fn coverage_layer(&self) -> Option<usize> {
        let max = self.config.n_blocks * self.config.layers_per_block;
        (1..=max).find(|&l| self.receptive_field(l).expect("in range") >= self.config.n_joints)
    }

    /// Per-convolution architecture report: channels, kernels, cumulative
    /// receptive field, and parameter counts, in forward order.
    pub fn layer_report(&self) -> Vec<LayerInfo> {
        let mut rf = 1usize;
        layer_plan(&self.config, &self.ablations)
            .into_iter()
            .map(|e| {
                rf += e.kernel - 1;
                LayerInfo {
                    role: e.role,
                    name: e.name,
                    in_channels: e.in_c,
                    out_channels: e.out_c,
                    kernel: e.kernel,
                    receptive_field: rf,
                    parameter_count: e.out_c * e.in_c * e.kernel * e.kernel + e.out_c,
                }
            })
            .collect()
    }

    /// Evaluation-mode forward pass returning just the `[N_to, D, N_j]`
    /// prediction tensor.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, ModelError> {
        Ok(self.forward_pass(input, &mut ForwardMode::Eval)?.output_tensor().clone())
    }

    /// Full forward pass. The input must already be in the model's layout
    /// (see [`TrajectoryNetModel::input_layout`]).
    pub fn forward_pass(&self, input: &Tensor, mode: &mut ForwardMode<'_>) -> Result<ForwardPass, ModelError> {
        let expected = self.expected_input_shape();
        if input.shape() != expected.as_slice() {
            return Err(ModelError::WrongInputShape { expected, got: input.shape().to_vec() });
        }
        if !input.all_finite() {
            return Err(ModelError::NonFiniteInput);
        }

        let cfg = &self.config;
        let mut g = Graph::new();
        let last_plane = self.last_pose_plane(input);
        let input_id = g.leaf(input.clone());
        let param_ids: Vec<NodeId> = self.params.iter().map(|p| g.leaf(p.tensor.clone())).collect();

        let plan = layer_plan(cfg, &self.ablations);
        let mut cursor = plan.iter().enumerate().map(|(k, e)| (e, param_ids[2 * k], param_ids[2 * k + 1]));

        let stage = |g: &mut Graph, x: NodeId, w: NodeId, b: NodeId, mode: &mut ForwardMode<'_>, skip: Option<NodeId>|
         -> Result<NodeId, ModelError> {
            let mut y = g.conv2d(x, w, b)?;
            if let Some(s) = skip {
                y = g.add(y, s)?;
            }
            let y = g.leaky_relu(y, cfg.leaky_slope);
            let y = match mode {
                ForwardMode::Eval => g.dropout(y, cfg.dropout_rate, DropoutMode::Eval)?,
                ForwardMode::Train { rng } => g.dropout(y, cfg.dropout_rate, DropoutMode::Train(rng))?,
            };
            Ok(y)
        };

        // Trajectory space transform.
        let (_, w, b) = cursor.next().expect("plan has a transform layer");
        let transform_tap = stage(&mut g, input_id, w, b, mode, None)?;

        // Encoder blocks with symmetric in-block skips: the input of stage j
        // is added to the conv output of stage L+1-j (pre-activation).
        let mut x = transform_tap;
        let mut encoder_taps = Vec::with_capacity(cfg.n_blocks * cfg.layers_per_block);
        let depth = cfg.layers_per_block;
        for _block in 0..cfg.n_blocks {
            let mut stage_inputs = Vec::with_capacity(depth + 1);
            stage_inputs.push(x);
            for i in 1..=depth {
                let (_, w, b) = cursor.next().expect("plan covers every encoder stage");
                let partner = depth + 1 - i;
                let skip = (!self.ablations.remove_residuals && partner >= 1 && partner <= depth / 2)
                    .then(|| stage_inputs[partner - 1]);
                x = stage(&mut g, x, w, b, mode, skip)?;
                stage_inputs.push(x);
                encoder_taps.push(x);
            }
        }

        // Decoder: spatial conv to N_to channels, (optional time unmixing
        // under the re-layout ablation), then the linear 1x1 output conv.
        let (_, w, b) = cursor.next().expect("plan has a decoder spatial layer");
        let mut y = stage(&mut g, x, w, b, mode, None)?;
        if self.ablations.coords_as_channels {
            let (_, w, b) = cursor.next().expect("plan has the unmix layer under coords_as_channels");
            // [N_to, N_j, N_ti] -> [N_ti, N_to, N_j]: put the stale time axis
            // on channels so a linear 1x1 can project it to D coordinates.
            y = g.permute3(y, [2, 0, 1])?;
            y = g.conv2d(y, w, b)?;
            // [D, N_to, N_j] -> [N_to, D, N_j]: the output convention.
            y = g.permute3(y, [1, 0, 2])?;
        }
        let (_, w, b) = cursor.next().expect("plan has a decoder output layer");
        let mut output = g.conv2d(y, w, b)?;
        debug_assert!(cursor.next().is_none(), "layer plan fully consumed");

        if cfg.global_residual {
            let plane = g.leaf(last_plane);
            output = g.add_plane(output, plane)?;
        }

        Ok(ForwardPass { graph: g, input: input_id, output, param_ids, transform_tap, encoder_taps })
    }

    /// The `[D, N_j]` plane of the last observed frame, extracted from the
    /// input tensor in either layout.
    fn last_pose_plane(&self, input: &Tensor) -> Tensor {
        let cfg = &self.config;
        match self.input_layout() {
            InputLayout::TimeAsChannels => {
                Tensor::from_vec(&[cfg.dim, cfg.n_joints], input.plane(cfg.input_frames - 1).to_vec())
                    .expect("plane length")
            }
            InputLayout::CoordsAsChannels => {
                let mut plane = Tensor::zeros(&[cfg.dim, cfg.n_joints]);
                for d in 0..cfg.dim {
                    for j in 0..cfg.n_joints {
                        let v = input.at3(d, j, cfg.input_frames - 1);
                        plane.data_mut()[d * cfg.n_joints + j] = v;
                    }
                }
                plane
            }
        }
    }
}

struct PlanEntry {
    role: LayerRole,
    name: String,
    in_c: usize,
    out_c: usize,
    kernel: usize,
}

/// The ordered list of convolutions the config/flags imply. Parameter
/// creation and the forward pass both walk this plan, so they cannot drift
/// apart.
fn layer_plan(config: &ModelConfig, ablations: &AblationFlags) -> Vec<PlanEntry> {
    let k = if ablations.remove_spatial { 1 } else { config.spatial_kernel };
    let in0 = if ablations.coords_as_channels { config.dim } else { config.input_frames };
    let mut plan = Vec::new();
    plan.push(PlanEntry {
        role: LayerRole::Transform,
        name: "transform".into(),
        in_c: in0,
        out_c: config.hidden_channels,
        kernel: 1,
    });
    for b in 1..=config.n_blocks {
        for s in 1..=config.layers_per_block {
            plan.push(PlanEntry {
                role: LayerRole::Encoder { block: b, stage: s },
                name: format!("enc.b{b}.l{s}"),
                in_c: config.hidden_channels,
                out_c: config.hidden_channels,
                kernel: k,
            });
        }
    }
    plan.push(PlanEntry {
        role: LayerRole::DecoderSpatial,
        name: "dec.spatial".into(),
        in_c: config.hidden_channels,
        out_c: config.output_frames,
        kernel: k,
    });
    if ablations.coords_as_channels {
        plan.push(PlanEntry {
            role: LayerRole::DecoderUnmix,
            name: "dec.unmix".into(),
            in_c: config.input_frames,
            out_c: config.dim,
            kernel: 1,
        });
    }
    plan.push(PlanEntry {
        role: LayerRole::DecoderOut,
        name: "dec.out".into(),
        in_c: config.output_frames,
        out_c: config.output_frames,
        kernel: 1,
    });
    plan
}

fn validate_config(c: &ModelConfig) -> Result<(), ModelError> {
    let positives: [(&'static str, usize); 7] = [
        ("n_joints", c.n_joints),
        ("dim", c.dim),
        ("input_frames", c.input_frames),
        ("output_frames", c.output_frames),
        ("hidden_channels", c.hidden_channels),
        ("n_blocks", c.n_blocks),
        ("layers_per_block", c.layers_per_block),
    ];
    for (what, v) in positives {
        if v == 0 {
            return Err(ModelError::BadConfig { what, value: 0.0 });
        }
    }
    if c.spatial_kernel == 0 || c.spatial_kernel % 2 == 0 {
        return Err(ModelError::BadConfig { what: "spatial_kernel (must be odd)", value: c.spatial_kernel as f64 });
    }
    if !(0.0..1.0).contains(&c.dropout_rate) {
        return Err(ModelError::BadConfig { what: "dropout_rate", value: c.dropout_rate });
    }
    if !c.leaky_slope.is_finite() || c.leaky_slope < 0.0 {
        return Err(ModelError::BadConfig { what: "leaky_slope", value: c.leaky_slope });
    }
    Ok(())
}
