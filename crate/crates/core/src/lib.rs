//! Structure-aware diffusion inversion and regeneration for synthetic video
//! latents.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`], [`schedule`], [`format`]: the latent container, noise
//!   schedules and the SVRT binary tensor format.
//! * [`denoiser`]: the pluggable denoiser contract, an analytic Gaussian
//!   posterior denoiser, a constant-target denoiser, and a seeded block
//!   backbone with gated control injection.
//! * [`sampler`]: clean-estimate parametrization, classifier-free guidance,
//!   Euler generation, Euler inversion and the two-stage enhance pipeline.
//! * [`metrics`]: the masked object-consistency score, a perceptual-distance
//!   slot and a toy dense feature extractor.
//! * [`cli`]: configuration, commands, fixtures and run manifests behind the
//!   `svr` binary.
//!
//! Runnable walk-throughs of each capability live in `examples/`.

pub mod cli;
pub mod denoiser;
pub mod format;
pub mod metrics;
pub mod precond;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod tensor;

pub use denoiser::{
    text_embed, BlockBackbone, ConditioningBundle, ConstantDenoiser, DenoiserModel, GaussianAnalyticDenoiser,
    SpatialMaps,
};
pub use format::{read_tensor, write_tensor};
pub use sampler::{enhance, generate, invert, EnhanceRequest, GuidanceParams};
pub use schedule::{make_power_schedule, NoiseSchedule};
pub use tensor::{Dims4, Tensor4};
