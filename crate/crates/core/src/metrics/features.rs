use super::MetricError;
use crate::tensor::{Dims4, Tensor4};

/// Feature vectors with norm below this score 0 similarity.
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// Per-frame dense feature maps, stored as a `(T, D, H', W')` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    tensor: Tensor4,
}

impl FeatureStack {
    pub fn new(tensor: Tensor4) -> Self {
        Self { tensor }
    }

    pub fn tensor(&self) -> &Tensor4 {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor4 {
        self.tensor
    }

    pub fn n_frames(&self) -> usize {
        self.tensor.dims().frames
    }

    pub fn feature_dim(&self) -> usize {
        self.tensor.dims().channels
    }

    pub fn height(&self) -> usize {
        self.tensor.dims().height
    }

    pub fn width(&self) -> usize {
        self.tensor.dims().width
    }

    pub fn frame(&self, t: usize) -> FeatureFrame<'_> {
        let d = self.tensor.dims();
        FeatureFrame { dim: d.channels, height: d.height, width: d.width, data: self.tensor.frame(t) }
    }

    pub fn ensure_aligned(&self, other: &FeatureStack) -> Result<(), MetricError> {
        if self.tensor.dims() != other.tensor.dims() {
            return Err(MetricError::Shape(format!(
                "feature stacks differ: {} vs {}",
                self.tensor.dims(),
                other.tensor.dims()
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims4 {
        self.tensor.dims()
    }
}

/// Channel-major view of a single frame: `data[c·H'·W' + y·W' + x]`.
#[derive(Debug, Clone, Copy)]
pub struct FeatureFrame<'a> {
    pub dim: usize,
    pub height: usize,
    pub width: usize,
    pub data: &'a [f32],
}

impl FeatureFrame<'_> {
    pub fn plane(&self) -> usize {
        self.height * self.width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl SimilarityMap {
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Per-pixel cosine similarity between two frames' feature vectors.
pub fn cosine_similarity_map(a: FeatureFrame<'_>, b: FeatureFrame<'_>) -> Result<SimilarityMap, MetricError> {
    if (a.dim, a.height, a.width) != (b.dim, b.height, b.width) {
        return Err(MetricError::Shape(format!(
            "feature frames differ: ({}, {}, {}) vs ({}, {}, {})",
            a.dim, a.height, a.width, b.dim, b.height, b.width
        )));
    }
    let plane = a.plane();
    let values = (0..plane)
        .map(|p| {
            let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
            for c in 0..a.dim {
                let u = a.data[c * plane + p] as f64;
                let v = b.data[c * plane + p] as f64;
                dot += u * v;
                na += u * u;
                nb += v * v;
            }
            let (na, nb) = (na.sqrt(), nb.sqrt());
            if na < ZERO_NORM_EPS || nb < ZERO_NORM_EPS {
                0.0
            } else {
                (dot / (na * nb)).clamp(-1.0, 1.0)
            }
        })
        .collect();
    Ok(SimilarityMap { height: a.height, width: a.width, values })
}
