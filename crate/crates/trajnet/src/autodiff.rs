//! Reverse-mode automatic differentiation over a flat tape.
//!
//! A [`Graph`] owns a vector of nodes; every operation appends a node whose
//! operands are earlier node ids, so the tape order is already topological.
//! Values are computed eagerly at insertion time. [`Graph::backward`] seeds a
//! scalar loss node with gradient 1 and sweeps the tape in reverse,
//! accumulating gradients into every node at or below the loss. Gradients
//! persist across calls — repeated backward passes accumulate — until
//! [`Graph::zero_grads`] resets them.
//!
//! The operation set is deliberately small: exactly what a convolutional
//! trajectory network needs. Convolutions use "same" zero padding, stride 1,
//! and odd kernels, so spatial extents never change inside the network.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Tensor, TensorError};

/// Identifier of a node on the tape. Ids are only meaningful for the graph
/// that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    /// Position of the node on the tape.
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether dropout is active. Evaluation mode is an exact identity; training
/// mode draws a fresh mask from the supplied generator.
pub enum DropoutMode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Coarse operation tag, exposed so tests can audit graph structure (for
/// example, counting the skip additions a residual block inserts).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Conv2d,
    LeakyRelu,
    Dropout,
    Add,
    Sub,
    Mul,
    AddPlane,
    Permute3,
    Scale,
    Sum,
    SumSquares,
}

enum Op {
    Leaf,
    Conv2d { input: NodeId, weight: NodeId, bias: NodeId },
    LeakyRelu { input: NodeId, slope: f64 },
    /// Training-mode dropout; `mask` already folds in the 1/(1-rate) scale.
    Dropout { input: NodeId, mask: Vec<f64> },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    /// Adds a `[H, W]` plane to every channel of a `[C, H, W]` tensor.
    AddPlane { x: NodeId, plane: NodeId },
    /// Axis permutation of a rank-3 tensor: output axis `k` is input axis
    /// `perm[k]`.
    Permute3 { input: NodeId, perm: [usize; 3] },
    Scale { input: NodeId, factor: f64 },
    Sum { input: NodeId },
    SumSquares { input: NodeId },
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Conv2d { .. } => OpKind::Conv2d,
            Op::LeakyRelu { .. } => OpKind::LeakyRelu,
            Op::Dropout { .. } => OpKind::Dropout,
            Op::Add { .. } => OpKind::Add,
            Op::Sub { .. } => OpKind::Sub,
            Op::Mul { .. } => OpKind::Mul,
            Op::AddPlane { .. } => OpKind::AddPlane,
            Op::Permute3 { .. } => OpKind::Permute3,
            Op::Scale { .. } => OpKind::Scale,
            Op::Sum { .. } => OpKind::Sum,
            Op::SumSquares { .. } => OpKind::SumSquares,
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// A reverse-mode differentiation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    /// Gradient buffers parallel to `nodes`; empty means "all zeros, never
    /// touched". Kept separate from the nodes so the backward sweep can read
    /// values while writing gradients.
    grads: Vec<Vec<f64>>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    /// Number of nodes on the tape.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts a constant/input/parameter node.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// The forward value of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// The operation tag of a node.
    pub fn op_kind(&self, id: NodeId) -> OpKind {
        self.nodes[id.0].op.kind()
    }

    /// How many nodes on the tape carry the given operation tag.
    pub fn count_ops(&self, kind: OpKind) -> usize {
        self.nodes.iter().filter(|n| n.op.kind() == kind).count()
    }

    /// The accumulated gradient of a node. Empty until a backward pass has
    /// materialized gradients for the node's region of the tape.
    pub fn grad(&self, id: NodeId) -> &[f64] {
        &self.grads[id.0]
    }

    /// The gradient of a node shaped like its value (zeros if untouched).
    pub fn grad_tensor(&self, id: NodeId) -> Tensor {
        let shape = self.nodes[id.0].value.shape().to_vec();
        if self.grads[id.0].is_empty() {
            Tensor::zeros(&shape)
        } else {
            Tensor::from_vec(&shape, self.grads[id.0].clone()).expect("grad length")
        }
    }

    /// Clears all accumulated gradients.
    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.clear();
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.grads.push(Vec::new());
        NodeId(self.nodes.len() - 1)
    }

    fn rank3(&self, id: NodeId) -> Result<(usize, usize, usize), TensorError> {
        let s = self.nodes[id.0].value.shape();
        if s.len() != 3 {
            return Err(TensorError::NotRank3 { got: s.to_vec() });
        }
        Ok((s[0], s[1], s[2]))
    }

    /// 2D convolution with "same" zero padding and stride 1.
    ///
    /// `input` is `[C_in, H, W]`, `weight` is `[C_out, C_in, kH, kW]` with odd
    /// `kH`/`kW`, `bias` is `[C_out]`; the result is `[C_out, H, W]`.
    pub fn conv2d(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId, TensorError> {
        let (cin, _h, _w) = self.rank3(input)?;
        let ws = self.nodes[weight.0].value.shape();
        if ws.len() != 4 {
            return Err(TensorError::ShapeMismatch { expected: vec![0, cin, 0, 0], got: ws.to_vec() });
        }
        let (cout, wcin, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
        if wcin != cin {
            return Err(TensorError::ChannelMismatch { input_channels: cin, weight_in_channels: wcin });
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(TensorError::EvenKernel { kh, kw });
        }
        let bs = self.nodes[bias.0].value.shape();
        if bs != [cout] {
            return Err(TensorError::ShapeMismatch { expected: vec![cout], got: bs.to_vec() });
        }
        let value = conv2d_values(
            &self.nodes[input.0].value,
            &self.nodes[weight.0].value,
            &self.nodes[bias.0].value,
        );
        Ok(self.push(value, Op::Conv2d { input, weight, bias }))
    }

    /// Elementwise leaky rectifier: `x` for `x >= 0`, `slope * x` otherwise.
    /// The subgradient at exactly zero is taken as 1.
    pub fn leaky_relu(&mut self, input: NodeId, slope: f64) -> NodeId {
        let mut value = self.nodes[input.0].value.clone();
        for v in value.data_mut() {
            if *v < 0.0 {
                *v *= slope;
            }
        }
        self.push(value, Op::LeakyRelu { input, slope })
    }

    /// Inverted dropout. In evaluation mode (or when `rate == 0`) this is an
    /// exact identity and returns the input node unchanged. In training mode
    /// each element is zeroed with probability `rate` and survivors are
    /// scaled by `1/(1-rate)`, so the expected value is preserved.
    pub fn dropout(&mut self, input: NodeId, rate: f64, mode: DropoutMode<'_>) -> Result<NodeId, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidParameter { what: "dropout rate", value: rate });
        }
        if rate == 0.0 {
            return Ok(input);
        }
        match mode {
            DropoutMode::Eval => Ok(input),
            DropoutMode::Train(rng) => {
                let keep_scale = 1.0 / (1.0 - rate);
                let mask: Vec<f64> = (0..self.nodes[input.0].value.len())
                    .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep_scale })
                    .collect();
                let mut value = self.nodes[input.0].value.clone();
                for (v, m) in value.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                Ok(self.push(value, Op::Dropout { input, mask }))
            }
        }
    }

    /// Elementwise sum of two same-shaped tensors.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.nodes[a.0].value.same_shape(&self.nodes[b.0].value)?;
        let mut value = self.nodes[a.0].value.clone();
        for (v, o) in value.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *v += o;
        }
        Ok(self.push(value, Op::Add { a, b }))
    }

    /// Elementwise difference `a - b`.
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.nodes[a.0].value.same_shape(&self.nodes[b.0].value)?;
        let mut value = self.nodes[a.0].value.clone();
        for (v, o) in value.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *v -= o;
        }
        Ok(self.push(value, Op::Sub { a, b }))
    }

    /// Elementwise product of two same-shaped tensors.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.nodes[a.0].value.same_shape(&self.nodes[b.0].value)?;
        let mut value = self.nodes[a.0].value.clone();
        for (v, o) in value.data_mut().iter_mut().zip(self.nodes[b.0].value.data()) {
            *v *= o;
        }
        Ok(self.push(value, Op::Mul { a, b }))
    }

    /// Adds a `[H, W]` plane to every channel of a `[C, H, W]` tensor.
    pub fn add_plane(&mut self, x: NodeId, plane: NodeId) -> Result<NodeId, TensorError> {
        let (_c, h, w) = self.rank3(x)?;
        let ps = self.nodes[plane.0].value.shape();
        if ps != [h, w] {
            return Err(TensorError::ShapeMismatch { expected: vec![h, w], got: ps.to_vec() });
        }
        let mut value = self.nodes[x.0].value.clone();
        let pdat = self.nodes[plane.0].value.data();
        for chan in value.data_mut().chunks_mut(h * w) {
            for (v, p) in chan.iter_mut().zip(pdat) {
                *v += p;
            }
        }
        Ok(self.push(value, Op::AddPlane { x, plane }))
    }

    /// Permutes the axes of a rank-3 tensor; output axis `k` is input axis
    /// `perm[k]`.
    pub fn permute3(&mut self, input: NodeId, perm: [usize; 3]) -> Result<NodeId, TensorError> {
        let (d0, d1, d2) = self.rank3(input)?;
        let mut seen = [false; 3];
        for &p in &perm {
            if p > 2 || seen[p] {
                return Err(TensorError::InvalidParameter { what: "axis permutation", value: p as f64 });
            }
            seen[p] = true;
        }
        let in_shape = [d0, d1, d2];
        let out_shape = [in_shape[perm[0]], in_shape[perm[1]], in_shape[perm[2]]];
        let src = &self.nodes[input.0].value;
        let mut out = Tensor::zeros(&out_shape);
        permute3_map(&in_shape, perm, |from, to| {
            out.data_mut()[to] = src.data()[from];
        });
        Ok(self.push(out, Op::Permute3 { input, perm }))
    }

    /// Multiplies every element by a constant.
    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let mut value = self.nodes[input.0].value.clone();
        for v in value.data_mut() {
            *v *= factor;
        }
        self.push(value, Op::Scale { input, factor })
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let total: f64 = self.nodes[input.0].value.data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum { input })
    }

    /// Sum of squared elements, as a scalar node.
    pub fn sum_squares(&mut self, input: NodeId) -> NodeId {
        let total: f64 = self.nodes[input.0].value.data().iter().map(|v| v * v).sum();
        self.push(Tensor::scalar(total), Op::SumSquares { input })
    }

    /// Accumulates `d(loss)/d(node)` into every node at or below `loss` on
    /// the tape. `loss` must be a scalar. Calling this repeatedly without
    /// [`Graph::zero_grads`] adds gradients together.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), TensorError> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(TensorError::NonScalarLoss { shape: self.nodes[loss.0].value.shape().to_vec() });
        }
        // Propagate through a per-call flow buffer, then fold it into the
        // persistent gradients, so repeated calls add exactly one unit of
        // d(loss)/d(node) each time.
        let mut grads: Vec<Vec<f64>> = (0..=loss.0).map(|i| vec![0.0; self.nodes[i].value.len()]).collect();
        grads[loss.0][0] = 1.0;

        let nodes = &self.nodes;
        for id in (0..=loss.0).rev() {
            // Take this node's gradient out so we can mutate parents' buffers
            // (parents always sit earlier on the tape).
            let g = std::mem::take(&mut grads[id]);
            match &nodes[id].op {
                Op::Leaf => {}
                Op::Conv2d { input, weight, bias } => {
                    // Fresh buffers keep the borrows disjoint (and stay
                    // correct even if two roles alias the same node).
                    let mut gi = vec![0.0; nodes[input.0].value.len()];
                    let mut gw = vec![0.0; nodes[weight.0].value.len()];
                    let mut gb = vec![0.0; nodes[bias.0].value.len()];
                    conv2d_backward(&nodes[input.0].value, &nodes[weight.0].value, &g, &mut gi, &mut gw, &mut gb);
                    accumulate(&mut grads[input.0], &gi, 1.0);
                    accumulate(&mut grads[weight.0], &gw, 1.0);
                    accumulate(&mut grads[bias.0], &gb, 1.0);
                }
                Op::LeakyRelu { input, slope } => {
                    let x = nodes[input.0].value.data();
                    let gi = &mut grads[input.0];
                    for i in 0..g.len() {
                        gi[i] += if x[i] < 0.0 { slope * g[i] } else { g[i] };
                    }
                }
                Op::Dropout { input, mask } => {
                    let gi = &mut grads[input.0];
                    for i in 0..g.len() {
                        gi[i] += mask[i] * g[i];
                    }
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads[a.0], &g, 1.0);
                    accumulate(&mut grads[b.0], &g, 1.0);
                }
                Op::Sub { a, b } => {
                    accumulate(&mut grads[a.0], &g, 1.0);
                    accumulate(&mut grads[b.0], &g, -1.0);
                }
                Op::Mul { a, b } => {
                    let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                    let ga = &mut grads[a.0];
                    for i in 0..g.len() {
                        ga[i] += bv[i] * g[i];
                    }
                    let gb = &mut grads[b.0];
                    for i in 0..g.len() {
                        gb[i] += av[i] * g[i];
                    }
                }
                Op::AddPlane { x, plane } => {
                    accumulate(&mut grads[x.0], &g, 1.0);
                    let plane_len = nodes[plane.0].value.len();
                    let gp = &mut grads[plane.0];
                    for chan in g.chunks(plane_len) {
                        for (p, gv) in gp.iter_mut().zip(chan) {
                            *p += gv;
                        }
                    }
                }
                Op::Permute3 { input, perm } => {
                    let s = nodes[input.0].value.shape();
                    let in_shape = [s[0], s[1], s[2]];
                    let gi = &mut grads[input.0];
                    permute3_map(&in_shape, *perm, |from, to| {
                        gi[from] += g[to];
                    });
                }
                Op::Scale { input, factor } => {
                    accumulate(&mut grads[input.0], &g, *factor);
                }
                Op::Sum { input } => {
                    let gi = &mut grads[input.0];
                    for v in gi.iter_mut() {
                        *v += g[0];
                    }
                }
                Op::SumSquares { input } => {
                    let x = nodes[input.0].value.data();
                    let gi = &mut grads[input.0];
                    for i in 0..gi.len() {
                        gi[i] += 2.0 * x[i] * g[0];
                    }
                }
            }
            grads[id] = g;
        }
        for (i, flow) in grads.into_iter().enumerate() {
            if self.grads[i].is_empty() {
                self.grads[i] = flow;
            } else {
                accumulate(&mut self.grads[i], &flow, 1.0);
            }
        }
        Ok(())
    }
}

fn accumulate(dst: &mut [f64], src: &[f64], factor: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += factor * s;
    }
}

/// Visits every element of a `[d0, d1, d2]` tensor, yielding its flat source
/// offset and the flat destination offset under the axis permutation.
fn permute3_map(in_shape: &[usize; 3], perm: [usize; 3], mut visit: impl FnMut(usize, usize)) {
    let out_shape = [in_shape[perm[0]], in_shape[perm[1]], in_shape[perm[2]]];
    // inv[j] = position of input axis j in the output.
    let mut inv = [0usize; 3];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    let mut from = 0;
    for i0 in 0..in_shape[0] {
        for i1 in 0..in_shape[1] {
            for i2 in 0..in_shape[2] {
                let coords = [i0, i1, i2];
                let o = [coords[perm[0]], coords[perm[1]], coords[perm[2]]];
                let to = (o[0] * out_shape[1] + o[1]) * out_shape[2] + o[2];
                visit(from, to);
                from += 1;
            }
        }
    }
    debug_assert_eq!(from, in_shape.iter().product::<usize>());
    let _ = inv;
}

/// Copies a `[C, H, W]` tensor into a zero-padded `[C, H+2ph, W+2pw]` buffer.
fn pad3(input: &Tensor, ph: usize, pw: usize) -> Vec<f64> {
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let mut padded = vec![0.0; c * hp * wp];
    for ci in 0..c {
        for y in 0..h {
            let src = &input.data()[(ci * h + y) * w..(ci * h + y) * w + w];
            let base = (ci * hp + y + ph) * wp + pw;
            padded[base..base + w].copy_from_slice(src);
        }
    }
    padded
}

/// Forward convolution; shapes are validated by the caller.
pub(crate) fn conv2d_values(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let (cin, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (cout, kh, kw) = (weight.shape()[0], weight.shape()[2], weight.shape()[3]);
    let (ph, pw) = (kh / 2, kw / 2);
    let wp = w + 2 * pw;
    let hp = h + 2 * ph;
    let padded = pad3(input, ph, pw);
    let wdat = weight.data();
    let mut out = vec![0.0; cout * h * w];
    for co in 0..cout {
        let oplane = &mut out[co * h * w..(co + 1) * h * w];
        oplane.fill(bias.data()[co]);
        for ci in 0..cin {
            let iplane = &padded[ci * hp * wp..(ci + 1) * hp * wp];
            let kbase = (co * cin + ci) * kh * kw;
            for u in 0..kh {
                for v in 0..kw {
                    let wv = wdat[kbase + u * kw + v];
                    for y in 0..h {
                        let irow = &iplane[(y + u) * wp + v..(y + u) * wp + v + w];
                        let orow = &mut oplane[y * w..y * w + w];
                        for (o, i) in orow.iter_mut().zip(irow) {
                            *o += wv * i;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[cout, h, w], out).expect("conv output length")
}

/// Accumulates input/weight/bias gradients for a same-padded convolution.
fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    gout: &[f64],
    gin: &mut [f64],
    gweight: &mut [f64],
    gbias: &mut [f64],
) {
    let (cin, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (cout, kh, kw) = (weight.shape()[0], weight.shape()[2], weight.shape()[3]);
    let (ph, pw) = (kh / 2, kw / 2);
    let wp = w + 2 * pw;
    let hp = h + 2 * ph;
    let padded = pad3(input, ph, pw);
    let wdat = weight.data();
    // Gradients w.r.t. the input are scattered into a padded buffer first and
    // cropped at the end; that keeps the inner loops branch-free.
    let mut gpad = vec![0.0; cin * hp * wp];
    for co in 0..cout {
        let gplane = &gout[co * h * w..(co + 1) * h * w];
        gbias[co] += gplane.iter().sum::<f64>();
        for ci in 0..cin {
            let iplane = &padded[ci * hp * wp..(ci + 1) * hp * wp];
            let gpplane = &mut gpad[ci * hp * wp..(ci + 1) * hp * wp];
            let kbase = (co * cin + ci) * kh * kw;
            for u in 0..kh {
                for v in 0..kw {
                    let wv = wdat[kbase + u * kw + v];
                    let mut wacc = 0.0;
                    for y in 0..h {
                        let grow = &gplane[y * w..y * w + w];
                        let irow = &iplane[(y + u) * wp + v..(y + u) * wp + v + w];
                        let gprow = &mut gpplane[(y + u) * wp + v..(y + u) * wp + v + w];
                        for ((gp, gv), iv) in gprow.iter_mut().zip(grow).zip(irow) {
                            wacc += gv * iv;
                            *gp += wv * gv;
                        }
                    }
                    gweight[kbase + u * kw + v] += wacc;
                }
            }
        }
    }
    for ci in 0..cin {
        for y in 0..h {
            let base = (ci * hp + y + ph) * wp + pw;
            let dst = &mut gin[(ci * h + y) * w..(ci * h + y) * w + w];
            for (d, s) in dst.iter_mut().zip(&gpad[base..base + w]) {
                *d += s;
            }
        }
    }
}
