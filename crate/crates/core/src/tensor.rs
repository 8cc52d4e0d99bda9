//! Dense 4-D latent container `(frames, channels, height, width)` in row-major order.

use std::fmt;

use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("every dimension must be >= 1, got {0}")]
    ZeroDim(Dims4),
    #[error("data length {len} does not match dims {dims} (expected {expected})")]
    LengthMismatch { dims: Dims4, len: usize, expected: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: Dims4, right: Dims4 },
}

/// Shape of a [`Tensor4`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims4 {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims4 {
    pub const fn new(frames: usize, channels: usize, height: usize, width: usize) -> Self {
        Self { frames, channels, height, width }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.frames, self.channels, self.height, self.width]
    }

    pub fn from_array(d: [usize; 4]) -> Self {
        Self::new(d[0], d[1], d[2], d[3])
    }

    pub fn numel(&self) -> usize {
        self.frames * self.channels * self.height * self.width
    }

    /// Elements in one frame (`C·H·W`).
    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    fn is_valid(&self) -> bool {
        self.as_array().iter().all(|&d| d >= 1)
    }
}

impl fmt::Display for Dims4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.frames, self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: Dims4,
    data: Vec<f32>,
}

impl Tensor4 {
    /// Builds a tensor, rejecting zero dims, length mismatches and non-finite values.
    pub fn new(dims: Dims4, data: Vec<f32>) -> Result<Self, TensorError> {
        if !dims.is_valid() {
            return Err(TensorError::ZeroDim(dims));
        }
        if data.len() != dims.numel() {
            return Err(TensorError::LengthMismatch { dims, len: data.len(), expected: dims.numel() });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { index });
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: Dims4, value: f32) -> Result<Self, TensorError> {
        Self::new(dims, vec![value; dims.numel()])
    }

    pub fn zeros(dims: Dims4) -> Result<Self, TensorError> {
        Self::filled(dims, 0.0)
    }

    /// Builds a tensor from a function of `(frame, channel, row, col)`.
    pub fn from_fn(
        dims: Dims4,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self, TensorError> {
        let mut data = Vec::with_capacity(dims.numel());
        for t in 0..dims.frames {
            for c in 0..dims.channels {
                for y in 0..dims.height {
                    for x in 0..dims.width {
                        data.push(f(t, c, y, x));
                    }
                }
            }
        }
        Self::new(dims, data)
    }

    /// Standard-normal entries from a seeded generator.
    pub fn randn(dims: Dims4, seed: u64) -> Result<Self, TensorError> {
        let mut rng = SeededRng::new(seed);
        Self::new(dims, (0..dims.numel()).map(|_| rng.normal() as f32).collect())
    }

    pub fn dims(&self) -> Dims4 {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, t: usize, c: usize, y: usize, x: usize) -> usize {
        let d = self.dims;
        ((t * d.channels + c) * d.height + y) * d.width + x
    }

    pub fn get(&self, t: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(t, c, y, x)]
    }

    /// Contiguous slice holding frame `t`.
    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.dims.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn ensure_same_dims(&self, other: &Tensor4) -> Result<(), TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::ShapeMismatch { left: self.dims, right: other.dims });
        }
        Ok(())
    }

    /// Elementwise map; the result is re-validated for finiteness.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self, TensorError> {
        Self::new(self.dims, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise binary map over two tensors of equal dims.
    pub fn zip_map(&self, other: &Tensor4, f: impl Fn(f32, f32) -> f32) -> Result<Self, TensorError> {
        self.ensure_same_dims(other)?;
        Self::new(
            self.dims,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> Result<f64, TensorError> {
        self.ensure_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .fold(0.0, f64::max))
    }

    pub fn rmse(&self, other: &Tensor4) -> Result<f64, TensorError> {
        self.ensure_same_dims(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum();
        Ok((sum / self.data.len() as f64).sqrt())
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &Tensor4) -> bool {
        self.dims == other.dims
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Euclidean norm of the whole tensor.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }
}
