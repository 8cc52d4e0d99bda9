//! Denoiser contract and reference implementations.
//!
//! A [`DenoiserModel`] maps a noisy latent, its noise level and a
//! [`ConditioningBundle`] to the raw network output `n`. Samplers turn `n`
//! into a clean estimate through [`crate::precond`].

mod backbone;
mod conditioning;
mod constant;
mod gaussian;
mod text;

use thiserror::Error;

use crate::format::FormatError;
use crate::tensor::{Tensor4, TensorError};

pub use backbone::{
    BackboneConfig, BlockBackbone, BlockTap, ControlInput, FrameShape, FrameTrace, INJECTED_BLOCKS,
    MIN_BLOCKS,
};
pub use conditioning::{ConditioningBundle, ControlKind, SpatialMaps};
pub use constant::ConstantDenoiser;
pub use gaussian::GaussianAnalyticDenoiser;
pub use text::{text_embed, text_embed_with_dim, TEXT_DIM};

#[derive(Debug, Error)]
pub enum DenoiserError {
    #[error("shape error: {0}")]
    Shape(#[from] TensorError),
    #[error("condition error: {0}")]
    Condition(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("non-finite output at noise level {sigma}")]
    NonFinite { sigma: f64 },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("manifest: {0}")]
    Manifest(String),
}

/// Pluggable predictor of the raw network output. Implementations must be
/// pure: identical inputs give bit-identical outputs of the same dims.
pub trait DenoiserModel: Send + Sync {
    fn predict(
        &self,
        x: &Tensor4,
        sigma: f64,
        cond: &ConditioningBundle,
    ) -> Result<Tensor4, DenoiserError>;

    /// The σ_data this model's output parametrization assumes, if fixed.
    fn sigma_data(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> &'static str;
}

impl<D: DenoiserModel + ?Sized> DenoiserModel for &D {
    fn predict(&self, x: &Tensor4, sigma: f64, cond: &ConditioningBundle) -> Result<Tensor4, DenoiserError> {
        (**self).predict(x, sigma, cond)
    }
    fn sigma_data(&self) -> Option<f64> {
        (**self).sigma_data()
    }
    fn name(&self) -> &'static str {
        (**self).name()
    }
}

impl<D: DenoiserModel + ?Sized> DenoiserModel for Box<D> {
    fn predict(&self, x: &Tensor4, sigma: f64, cond: &ConditioningBundle) -> Result<Tensor4, DenoiserError> {
        (**self).predict(x, sigma, cond)
    }
    fn sigma_data(&self) -> Option<f64> {
        (**self).sigma_data()
    }
    fn name(&self) -> &'static str {
        (**self).name()
    }
}

pub(crate) fn finite_output(t: Result<Tensor4, TensorError>, sigma: f64) -> Result<Tensor4, DenoiserError> {
    t.map_err(|e| match e {
        TensorError::NonFinite { .. } => DenoiserError::NonFinite { sigma },
        other => DenoiserError::Shape(other),
    })
}

pub(crate) fn check_sigma(sigma: f64) -> Result<(), DenoiserError> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(DenoiserError::Params(format!("noise level must be positive, got {sigma}")))
    }
}
