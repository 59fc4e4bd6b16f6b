//! Dense `f64` tensors in row-major layout.
//!
//! The whole crate works with one concrete layout convention: a rank-3 tensor
//! `[C, H, W]` is a stack of `C` feature planes of `H` rows by `W` columns,
//! stored row-major (`W` contiguous). Scalars are rank-0 tensors with one
//! element. Nothing here is generic over the element type; motion data and
//! gradients are always `f64`.

use std::fmt;

use rand_chacha::ChaCha8Rng;

/// Errors raised by tensor construction and by graph operations.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Two shapes that had to agree did not.
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    /// A buffer length does not match the product of the shape extents.
    DataLength { expected: usize, got: usize },
    /// An operation required a rank-3 `[C, H, W]` tensor.
    NotRank3 { got: Vec<usize> },
    /// Convolution kernels must have odd height and width so that "same"
    /// zero padding is symmetric.
    EvenKernel { kh: usize, kw: usize },
    /// The convolution weight's in-channel extent does not match the input.
    ChannelMismatch { input_channels: usize, weight_in_channels: usize },
    /// `backward` was called on a node that is not a scalar.
    NonScalarLoss { shape: Vec<usize> },
    /// A parameter fell outside its legal range (e.g. dropout rate >= 1).
    InvalidParameter { what: &'static str, value: f64 },
    /// Parallel parameter/gradient/state lists disagreed in length.
    ListLength { expected: usize, got: usize },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: expected {expected:?}, got {got:?}")
            }
            TensorError::DataLength { expected, got } => {
                write!(f, "data length {got} does not match shape product {expected}")
            }
            TensorError::NotRank3 { got } => {
                write!(f, "expected a rank-3 [C, H, W] tensor, got shape {got:?}")
            }
            TensorError::EvenKernel { kh, kw } => {
                write!(f, "convolution kernels must be odd-sized, got {kh}x{kw}")
            }
            TensorError::ChannelMismatch { input_channels, weight_in_channels } => write!(
                f,
                "input has {input_channels} channels but the kernel expects {weight_in_channels}"
            ),
            TensorError::NonScalarLoss { shape } => {
                write!(f, "backward requires a scalar loss node, got shape {shape:?}")
            }
            TensorError::InvalidParameter { what, value } => {
                write!(f, "invalid {what}: {value}")
            }
            TensorError::ListLength { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
        }
    }
}

impl std::error::Error for TensorError {}

/// A dense row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// A tensor of zeros with the given shape.
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    /// A tensor filled with `value`.
    pub fn filled(shape: &[usize], value: f64) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    /// A rank-0 scalar.
    pub fn scalar(value: f64) -> Tensor {
        Tensor { shape: Vec::new(), data: vec![value] }
    }

    /// Wraps an existing buffer; the length must match the shape product.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor, TensorError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength { expected, got: data.len() });
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Kernel weights drawn uniformly from ±sqrt(6 / (fan_in + fan_out)) for
    /// a `[out_c, in_c, kh, kw]` convolution filter. Fan counts include the
    /// kernel area. Deterministic in the caller-supplied generator.
    pub fn conv_init(rng: &mut ChaCha8Rng, out_c: usize, in_c: usize, kh: usize, kw: usize) -> Tensor {
        use rand::Rng;
        let fan_in = (in_c * kh * kw) as f64;
        let fan_out = (out_c * kh * kw) as f64;
        let limit = (6.0 / (fan_in + fan_out)).sqrt();
        let shape = [out_c, in_c, kh, kw];
        let data = (0..shape.iter().product())
            .map(|_| rng.random::<f64>() * 2.0 * limit - limit)
            .collect();
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// The single element of a rank-0 tensor.
    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar(), "scalar_value on shape {:?}", self.shape);
        self.data[0]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of `[c, h, w]` in a rank-3 tensor.
    #[inline]
    pub fn offset3(&self, c: usize, h: usize, w: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 3);
        (c * self.shape[1] + h) * self.shape[2] + w
    }

    /// Element access for rank-3 tensors.
    #[inline]
    pub fn at3(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.offset3(c, h, w)]
    }

    /// Mutable element access for rank-3 tensors.
    #[inline]
    pub fn set3(&mut self, c: usize, h: usize, w: usize, value: f64) {
        let i = self.offset3(c, h, w);
        self.data[i] = value;
    }

    /// The `[H, W]` plane of channel `c` as a contiguous slice.
    pub fn plane(&self, c: usize) -> &[f64] {
        debug_assert_eq!(self.shape.len(), 3);
        let plane = self.shape[1] * self.shape[2];
        &self.data[c * plane..(c + 1) * plane]
    }

    /// True when every element is finite (no NaN or ±inf).
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Checks that `other` has this tensor's shape.
    pub fn same_shape(&self, other: &Tensor) -> Result<(), TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        Ok(())
    }
}
