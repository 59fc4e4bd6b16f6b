//! Skeleton conventions, poses, and motion sequences.
//!
//! The network is convolutional along the joint axis, so the order in which
//! joints are laid out matters: a 3-wide filter should span anatomically
//! related joints. Every [`SkeletonSpec`] therefore carries a limb partition
//! and a permutation (`limb_order`) that rearranges the source joint order
//! into network order — left arm, right arm, trunk, left leg, right leg, with
//! each limb contiguous and ordered from the torso outward.
//!
//! Two presets ship with the crate:
//!
//! * `h36m-22` — a 22-joint, millimeter-unit skeleton (4+4 arm joints, 6
//!   trunk joints, 4+4 leg joints).
//! * `g3d-18` — an 18-joint, meter-unit Kinect-style skeleton (3+3 arm
//!   joints, 4 trunk joints, 4+4 leg joints).
//!
//! The per-joint enumeration inside each limb is this crate's convention;
//! only the limb-level ordering is architectural. Converters from captured
//! datasets should target these presets (see the file-formats chapter of the
//! guide).

use std::fmt;

use crate::tensor::Tensor;

/// Coordinate units of a skeleton's pose data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Units {
    Millimeters,
    Meters,
}

impl Units {
    /// Multiplier that converts these units to millimeters (exactly 1000 for
    /// meters, 1 for millimeters).
    pub fn to_millimeters_factor(self) -> f64 {
        match self {
            Units::Millimeters => 1.0,
            Units::Meters => 1000.0,
        }
    }

    /// Converts a scalar in these units to millimeters.
    pub fn scalar_to_millimeters(self, v: f64) -> f64 {
        match self {
            Units::Millimeters => v,
            Units::Meters => v * 1000.0,
        }
    }

    /// Converts a scalar in these units to meters. Uses division so that
    /// dyadic millimeter values (e.g. 500.0) convert exactly.
    pub fn scalar_to_meters(self, v: f64) -> f64 {
        match self {
            Units::Millimeters => v / 1000.0,
            Units::Meters => v,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Units::Millimeters => "mm",
            Units::Meters => "m",
        }
    }

    pub fn parse(s: &str) -> Option<Units> {
        match s {
            "mm" => Some(Units::Millimeters),
            "m" => Some(Units::Meters),
            _ => None,
        }
    }
}

/// Errors raised by skeleton validation and sequence/tensor conversion.
#[derive(Debug, Clone, PartialEq)]
pub enum SkeletonError {
    /// `limb_order` is not a permutation of `0..n_joints`.
    BadPermutation,
    /// The limbs do not partition the joint set.
    BadLimbPartition { joint: usize },
    /// A limb's joints are not contiguous in network order.
    LimbNotContiguous { limb: String },
    /// The root joint index is out of range.
    BadRootJoint { root: usize, n_joints: usize },
    /// A pose buffer has the wrong number of coordinates.
    WrongPoseLength { expected: usize, got: usize },
    /// A coordinate is NaN or infinite.
    NonFiniteCoordinate { frame: usize, offset: usize },
    /// The operation needs at least one frame.
    EmptySequence,
    /// A sequence had the wrong number of frames for the requested tensor.
    WrongFrameCount { expected: usize, got: usize },
    /// A tensor's extents do not match the skeleton.
    TensorShape { expected: Vec<usize>, got: Vec<usize> },
    /// No preset is registered under this name.
    UnknownPreset { name: String },
}

impl fmt::Display for SkeletonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkeletonError::BadPermutation => write!(f, "limb_order is not a permutation of the joints"),
            SkeletonError::BadLimbPartition { joint } => {
                write!(f, "joint {joint} is not covered exactly once by the limb partition")
            }
            SkeletonError::LimbNotContiguous { limb } => {
                write!(f, "limb '{limb}' is not contiguous after the limb_order permutation")
            }
            SkeletonError::BadRootJoint { root, n_joints } => {
                write!(f, "root joint {root} out of range for {n_joints} joints")
            }
            SkeletonError::WrongPoseLength { expected, got } => {
                write!(f, "pose has {got} coordinates, expected {expected}")
            }
            SkeletonError::NonFiniteCoordinate { frame, offset } => {
                write!(f, "non-finite coordinate at frame {frame}, offset {offset}")
            }
            SkeletonError::EmptySequence => write!(f, "sequence has no frames"),
            SkeletonError::WrongFrameCount { expected, got } => {
                write!(f, "sequence has {got} frames, expected {expected}")
            }
            SkeletonError::TensorShape { expected, got } => {
                write!(f, "tensor shape {got:?} does not match skeleton (expected {expected:?})")
            }
            SkeletonError::UnknownPreset { name } => write!(f, "unknown skeleton preset '{name}'"),
        }
    }
}

impl std::error::Error for SkeletonError {}

/// A named group of source-order joint indices, torso-outward.
#[derive(Debug, Clone, PartialEq)]
pub struct Limb {
    pub name: String,
    pub joints: Vec<usize>,
}

/// Joint layout, limb partition, and units of one skeleton convention.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSpec {
    /// Preset identifier ("h36m-22", "g3d-18") or "custom".
    pub name: String,
    /// Joint names in source (capture) order.
    pub joint_names: Vec<String>,
    /// Coordinates per joint (3 for the shipped presets).
    pub dim: usize,
    /// Limb partition over source indices, in network order.
    pub limbs: Vec<Limb>,
    /// Network position -> source joint index. Concatenating the limbs'
    /// joint lists yields exactly this permutation.
    pub limb_order: Vec<usize>,
    /// Source index of the root joint (used by root-centering).
    pub root_joint: usize,
    pub units: Units,
}

impl SkeletonSpec {
    /// Validates and constructs a spec. `limb_order` must equal the
    /// concatenation of the limbs' joint lists, which guarantees both the
    /// bijection and limb contiguity in network order.
    pub fn new(
        name: &str,
        joint_names: Vec<String>,
        dim: usize,
        limbs: Vec<Limb>,
        root_joint: usize,
        units: Units,
    ) -> Result<SkeletonSpec, SkeletonError> {
        let n = joint_names.len();
        let limb_order: Vec<usize> = limbs.iter().flat_map(|l| l.joints.iter().copied()).collect();
        let spec = SkeletonSpec { name: name.to_string(), joint_names, dim, limbs, limb_order, root_joint, units };
        spec.validate(n)?;
        Ok(spec)
    }

    fn validate(&self, n: usize) -> Result<(), SkeletonError> {
        if self.limb_order.len() != n {
            return Err(SkeletonError::BadPermutation);
        }
        let mut seen = vec![false; n];
        for &j in &self.limb_order {
            if j >= n || seen[j] {
                return Err(SkeletonError::BadPermutation);
            }
            seen[j] = true;
        }
        // Every joint covered exactly once by the partition (the permutation
        // check above also covers this, but report the first gap precisely).
        if let Some(joint) = seen.iter().position(|s| !s) {
            return Err(SkeletonError::BadLimbPartition { joint });
        }
        // Contiguity: each limb's network positions form one interval, and
        // the intervals follow the declaration order.
        let mut pos = 0usize;
        for limb in &self.limbs {
            for &j in &limb.joints {
                if self.limb_order[pos] != j {
                    return Err(SkeletonError::LimbNotContiguous { limb: limb.name.clone() });
                }
                pos += 1;
            }
        }
        if self.root_joint >= n {
            return Err(SkeletonError::BadRootJoint { root: self.root_joint, n_joints: n });
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.joint_names.len()
    }

    /// Source joint index shown at network position `pos`.
    pub fn source_of_position(&self, pos: usize) -> usize {
        self.limb_order[pos]
    }

    /// Network position of a source joint index.
    pub fn position_of_source(&self, source: usize) -> usize {
        self.limb_order.iter().position(|&j| j == source).expect("validated permutation")
    }

    /// Half-open network-position interval `[start, end)` of each limb.
    pub fn limb_spans(&self) -> Vec<(String, usize, usize)> {
        let mut spans = Vec::with_capacity(self.limbs.len());
        let mut pos = 0;
        for limb in &self.limbs {
            spans.push((limb.name.clone(), pos, pos + limb.joints.len()));
            pos += limb.joints.len();
        }
        spans
    }

    /// The 22-joint millimeter-unit preset.
    pub fn h36m_22() -> SkeletonSpec {
        let names = [
            "Hips", "Spine", "Chest", "Neck", "Head", "HeadTop",
            "LeftShoulder", "LeftElbow", "LeftWrist", "LeftHand",
            "RightShoulder", "RightElbow", "RightWrist", "RightHand",
            "LeftHip", "LeftKnee", "LeftAnkle", "LeftFoot",
            "RightHip", "RightKnee", "RightAnkle", "RightFoot",
        ];
        let limbs = vec![
            Limb { name: "left_arm".into(), joints: vec![6, 7, 8, 9] },
            Limb { name: "right_arm".into(), joints: vec![10, 11, 12, 13] },
            Limb { name: "trunk".into(), joints: vec![0, 1, 2, 3, 4, 5] },
            Limb { name: "left_leg".into(), joints: vec![14, 15, 16, 17] },
            Limb { name: "right_leg".into(), joints: vec![18, 19, 20, 21] },
        ];
        SkeletonSpec::new(
            "h36m-22",
            names.iter().map(|s| s.to_string()).collect(),
            3,
            limbs,
            0,
            Units::Millimeters,
        )
        .expect("built-in preset is valid")
    }

    /// The 18-joint meter-unit Kinect-style preset.
    pub fn g3d_18() -> SkeletonSpec {
        let names = [
            "HipCenter", "Spine", "ShoulderCenter", "Head",
            "LeftShoulder", "LeftElbow", "LeftWrist",
            "RightShoulder", "RightElbow", "RightWrist",
            "LeftHip", "LeftKnee", "LeftAnkle", "LeftFoot",
            "RightHip", "RightKnee", "RightAnkle", "RightFoot",
        ];
        let limbs = vec![
            Limb { name: "left_arm".into(), joints: vec![4, 5, 6] },
            Limb { name: "right_arm".into(), joints: vec![7, 8, 9] },
            Limb { name: "trunk".into(), joints: vec![0, 1, 2, 3] },
            Limb { name: "left_leg".into(), joints: vec![10, 11, 12, 13] },
            Limb { name: "right_leg".into(), joints: vec![14, 15, 16, 17] },
        ];
        SkeletonSpec::new(
            "g3d-18",
            names.iter().map(|s| s.to_string()).collect(),
            3,
            limbs,
            0,
            Units::Meters,
        )
        .expect("built-in preset is valid")
    }

    /// Looks up a shipped preset by name ("fntu-18" aliases the 18-joint
    /// Kinect layout).
    pub fn preset(name: &str) -> Result<SkeletonSpec, SkeletonError> {
        match name {
            "h36m-22" => Ok(SkeletonSpec::h36m_22()),
            "g3d-18" | "fntu-18" => Ok(SkeletonSpec::g3d_18()),
            other => Err(SkeletonError::UnknownPreset { name: other.to_string() }),
        }
    }
}

/// One frame of joint coordinates, flattened `[joint][coordinate]` in source
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    dim: usize,
    data: Vec<f64>,
}

impl Pose {
    pub fn zeros(n_joints: usize, dim: usize) -> Pose {
        Pose { dim, data: vec![0.0; n_joints * dim] }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Pose {
        debug_assert_eq!(data.len() % dim, 0);
        Pose { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_joints(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Coordinates of one joint (source order).
    pub fn joint(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn joint_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.data
    }
}

/// Which tensor layout a sequence is converted to.
///
/// * `TimeAsChannels` — the main convention: `[frames, dim, joints]`, so each
///   channel is one frame's pose plane and a column holds a joint's
///   trajectory across coordinates.
/// * `CoordsAsChannels` — the re-layout used by the layout ablation:
///   `[dim, joints, frames]`, putting time on a spatial axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InputLayout {
    TimeAsChannels,
    CoordsAsChannels,
}

/// A sequence of poses sharing one skeleton spec and frame interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub spec: SkeletonSpec,
    pub frame_interval_ms: f64,
    poses: Vec<Pose>,
}

impl MotionSequence {
    pub fn new(spec: SkeletonSpec, frame_interval_ms: f64) -> MotionSequence {
        MotionSequence { spec, frame_interval_ms, poses: Vec::new() }
    }

    /// Appends a frame after checking its length and that every coordinate
    /// is finite.
    pub fn push_pose(&mut self, pose: Pose) -> Result<(), SkeletonError> {
        let expected = self.spec.n_joints() * self.spec.dim;
        if pose.coords().len() != expected || pose.dim() != self.spec.dim {
            return Err(SkeletonError::WrongPoseLength { expected, got: pose.coords().len() });
        }
        if let Some(offset) = pose.coords().iter().position(|v| !v.is_finite()) {
            return Err(SkeletonError::NonFiniteCoordinate { frame: self.poses.len(), offset });
        }
        self.poses.push(pose);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn pose(&self, i: usize) -> &Pose {
        &self.poses[i]
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn last_pose(&self) -> Option<&Pose> {
        self.poses.last()
    }

    /// The sub-sequence `[start, start + len)` as a new sequence.
    pub fn window(&self, start: usize, len: usize) -> MotionSequence {
        MotionSequence {
            spec: self.spec.clone(),
            frame_interval_ms: self.frame_interval_ms,
            poses: self.poses[start..start + len].to_vec(),
        }
    }

    /// Extends the sequence with `count` copies of its last frame. With
    /// `count == 0` this is a plain copy; an empty sequence has no last
    /// frame and is an error.
    pub fn repeat_last_frame(&self, count: usize) -> Result<MotionSequence, SkeletonError> {
        let last = self.poses.last().ok_or(SkeletonError::EmptySequence)?.clone();
        let mut out = self.clone();
        out.poses.extend(std::iter::repeat_n(last, count));
        Ok(out)
    }

    /// Converts coordinates to millimeters (exact multiply by 1000 for
    /// meter-unit data; the identity for millimeter data).
    pub fn to_millimeters(&self) -> MotionSequence {
        let factor = self.spec.units.to_millimeters_factor();
        if factor == 1.0 {
            return self.clone();
        }
        let mut out = self.clone();
        out.spec.units = Units::Millimeters;
        for pose in &mut out.poses {
            for v in &mut pose.data {
                *v *= factor;
            }
        }
        out
    }

    /// Subtracts the root joint position of the *last* frame from every
    /// frame, removing global translation while preserving all motion within
    /// the window.
    pub fn root_centered(&self) -> Result<MotionSequence, SkeletonError> {
        let last = self.poses.last().ok_or(SkeletonError::EmptySequence)?;
        let origin = last.joint(self.spec.root_joint).to_vec();
        self.translated(&origin)
    }

    /// Subtracts a fixed `dim`-vector from every joint of every frame. Used
    /// to center a future window on a reference taken from its observed
    /// window.
    pub fn translated(&self, origin: &[f64]) -> Result<MotionSequence, SkeletonError> {
        if origin.len() != self.spec.dim {
            return Err(SkeletonError::WrongPoseLength {
                expected: self.spec.dim,
                got: origin.len(),
            });
        }
        let mut out = self.clone();
        for pose in &mut out.poses {
            for chunk in pose.data.chunks_mut(self.spec.dim) {
                for (v, o) in chunk.iter_mut().zip(origin) {
                    *v -= o;
                }
            }
        }
        Ok(out)
    }
}

/// Converts a sequence to the given layout without any frame-count
/// expectation (used for targets and round-trip checks). Joints are permuted
/// into network order.
pub fn pose_tensor(seq: &MotionSequence, layout: InputLayout) -> Tensor {
    let (n, d, l) = (seq.spec.n_joints(), seq.spec.dim, seq.len());
    let mut out = match layout {
        InputLayout::TimeAsChannels => Tensor::zeros(&[l, d, n]),
        InputLayout::CoordsAsChannels => Tensor::zeros(&[d, n, l]),
    };
    for t in 0..l {
        let pose = seq.pose(t);
        for pos in 0..n {
            let joint = pose.joint(seq.spec.source_of_position(pos));
            for (dd, &v) in joint.iter().enumerate() {
                match layout {
                    InputLayout::TimeAsChannels => out.set3(t, dd, pos, v),
                    InputLayout::CoordsAsChannels => out.set3(dd, pos, t, v),
                }
            }
        }
    }
    out
}

/// Converts an observed window into the model's input tensor, checking the
/// frame count.
pub fn to_input_tensor(
    seq: &MotionSequence,
    layout: InputLayout,
    expected_frames: usize,
) -> Result<Tensor, SkeletonError> {
    if seq.len() != expected_frames {
        return Err(SkeletonError::WrongFrameCount { expected: expected_frames, got: seq.len() });
    }
    Ok(pose_tensor(seq, layout))
}

/// Rebuilds a sequence from a tensor in the given layout, undoing the
/// limb-order permutation. The inverse of [`pose_tensor`].
pub fn from_output_tensor(
    tensor: &Tensor,
    layout: InputLayout,
    spec: &SkeletonSpec,
    frame_interval_ms: f64,
) -> Result<MotionSequence, SkeletonError> {
    let (n, d) = (spec.n_joints(), spec.dim);
    let shape = tensor.shape();
    let frames = match layout {
        InputLayout::TimeAsChannels => {
            if shape.len() != 3 || shape[1] != d || shape[2] != n {
                return Err(SkeletonError::TensorShape { expected: vec![0, d, n], got: shape.to_vec() });
            }
            shape[0]
        }
        InputLayout::CoordsAsChannels => {
            if shape.len() != 3 || shape[0] != d || shape[1] != n {
                return Err(SkeletonError::TensorShape { expected: vec![d, n, 0], got: shape.to_vec() });
            }
            shape[2]
        }
    };
    let mut seq = MotionSequence::new(spec.clone(), frame_interval_ms);
    for t in 0..frames {
        let mut pose = Pose::zeros(n, d);
        for pos in 0..n {
            let source = spec.source_of_position(pos);
            for dd in 0..d {
                let v = match layout {
                    InputLayout::TimeAsChannels => tensor.at3(t, dd, pos),
                    InputLayout::CoordsAsChannels => tensor.at3(dd, pos, t),
                };
                pose.joint_mut(source)[dd] = v;
            }
        }
        seq.push_pose(pose)?;
    }
    Ok(seq)
}
