//! Evaluation metrics on dense feature maps.
//!
//! Feature maps arrive either from [`toy_feature_extractor`] or from any
//! external encoder exported as SVRT tensors of dims `(T, D, H', W')`.
//! Object masks arrive at detector resolution and are brought to feature
//! resolution with [`resample_mask`].

mod consistency;
mod extractor;
mod features;
mod masks;
mod perceptual;

use thiserror::Error;

use crate::format::FormatError;

pub use consistency::{object_consistency, ConsistencyReport, Normalization, ObjectRow, ReportStatus};
pub use extractor::{toy_feature_extractor, TOY_FEATURE_DIM};
pub use features::{cosine_similarity_map, FeatureFrame, FeatureStack, SimilarityMap, ZERO_NORM_EPS};
pub use masks::{resample_mask, MaskSet, MaskSidecar, ObjectMask};
pub use perceptual::{frame_perceptual_distance, PerceptualDistance};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid mask: {0}")]
    Mask(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error("report output: {0}")]
    Output(String),
}
