//! Deterministic Euler sampling and inversion on the probability-flow ODE
//! `dx/dσ = (x − x̂0(x, σ)) / σ`, with classifier-free guidance on the clean
//! estimate and the two-stage invert-then-regenerate pipeline.

mod loops;
mod pipeline;
mod steps;

use std::fmt;

use thiserror::Error;

use crate::denoiser::DenoiserError;
use crate::tensor::TensorError;

pub use loops::{
    generate, generate_observed, invert, invert_observed, GuidanceParams, InversionGuidance, Phase,
    StepObserver, Trajectory,
};
pub use pipeline::{enhance, enhance_observed, EnhanceRequest};
pub use steps::{cfg_combine, euler_step, inversion_step, predict_x0};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Inversion,
    Generation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Inversion => "inversion",
            Stage::Generation => "generation",
        })
    }
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("shape error: {0}")]
    Shape(TensorError),
    #[error("schedule direction: cannot step from σ={from} to σ={to}")]
    Direction { from: f64, to: f64 },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("denoiser failed at step {step}: {source}")]
    Denoiser {
        step: usize,
        #[source]
        source: DenoiserError,
    },
    #[error("non-finite state{}", .step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonFinite { step: Option<usize> },
    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<SamplerError>,
    },
}

impl SamplerError {
    /// True when the root cause is a non-finite value.
    pub fn is_numeric(&self) -> bool {
        match self {
            SamplerError::NonFinite { .. } => true,
            SamplerError::Denoiser { source: DenoiserError::NonFinite { .. }, .. } => true,
            SamplerError::Stage { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    fn at_step(self, step: usize) -> Self {
        match self {
            SamplerError::NonFinite { step: None } => SamplerError::NonFinite { step: Some(step) },
            other => other,
        }
    }
}

impl From<TensorError> for SamplerError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::NonFinite { .. } => SamplerError::NonFinite { step: None },
            other => SamplerError::Shape(other),
        }
    }
}
