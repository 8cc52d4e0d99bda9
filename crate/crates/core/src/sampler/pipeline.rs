use std::sync::Arc;

use super::loops::{generate_observed, invert_observed, GuidanceParams, NoObserver, InversionGuidance, StepObserver};
use super::{SamplerError, Stage};
use crate::denoiser::{text_embed_with_dim, ConditioningBundle, DenoiserModel, SpatialMaps, TEXT_DIM};
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor4;

/// Inputs of the two-stage enhancement: invert the source under the
/// inversion prompt, then regenerate under the positive/negative pair with
/// the same spatial maps.
pub struct EnhanceRequest<'a> {
    pub x0_sim: &'a Tensor4,
    pub schedule: &'a NoiseSchedule,
    pub denoiser: &'a dyn DenoiserModel,
    pub spatial: Option<Arc<SpatialMaps>>,
    pub prompt_inv: String,
    pub prompt_real: String,
    pub prompt_neg: String,
    pub w_cfg: f64,
    pub invert_with_cfg: bool,
    pub text_dim: usize,
}

impl<'a> EnhanceRequest<'a> {
    /// Defaults: no spatial maps, empty prompts, `w_cfg = 7`, conditional-only inversion.
    pub fn new(x0_sim: &'a Tensor4, schedule: &'a NoiseSchedule, denoiser: &'a dyn DenoiserModel) -> Self {
        Self {
            x0_sim,
            schedule,
            denoiser,
            spatial: None,
            prompt_inv: String::new(),
            prompt_real: String::new(),
            prompt_neg: String::new(),
            w_cfg: 7.0,
            invert_with_cfg: false,
            text_dim: TEXT_DIM,
        }
    }

    fn bundle(&self, prompt: &str) -> Result<ConditioningBundle, SamplerError> {
        let b = ConditioningBundle::new(self.spatial.clone(), text_embed_with_dim(prompt, self.text_dim))
            .map_err(|e| SamplerError::Params(e.to_string()))?;
        b.validate_for(self.x0_sim.dims()).map_err(|e| SamplerError::Params(e.to_string()))?;
        Ok(b)
    }
}

pub fn enhance(req: &EnhanceRequest<'_>) -> Result<Tensor4, SamplerError> {
    enhance_observed(req, &mut NoObserver)
}

pub fn enhance_observed(req: &EnhanceRequest<'_>, observer: &mut dyn StepObserver) -> Result<Tensor4, SamplerError> {
    let stage = |stage: Stage| move |e: SamplerError| SamplerError::Stage { stage, source: Box::new(e) };

    let cond_inv = req.bundle(&req.prompt_inv).map_err(stage(Stage::Inversion))?;
    let cond_neg = req.bundle(&req.prompt_neg).map_err(stage(Stage::Inversion))?;
    let inv_guidance = req
        .invert_with_cfg
        .then(|| InversionGuidance { cond_negative: cond_neg.clone(), w_cfg: req.w_cfg });
    let x_t = invert_observed(
        req.x0_sim,
        req.schedule,
        req.denoiser,
        &cond_inv,
        inv_guidance.as_ref(),
        observer,
    )
    .map_err(stage(Stage::Inversion))?;

    let cond_real = req.bundle(&req.prompt_real).map_err(stage(Stage::Generation))?;
    let guidance = GuidanceParams::new(req.w_cfg, cond_real, cond_neg).map_err(stage(Stage::Generation))?;
    generate_observed(&x_t, req.schedule, req.denoiser, &guidance, observer).map_err(stage(Stage::Generation))
}
