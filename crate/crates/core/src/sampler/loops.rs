use super::steps::{cfg_combine, euler_step, inversion_step, predict_x0};
use super::SamplerError;
use crate::denoiser::{ConditioningBundle, DenoiserModel};
use crate::schedule::NoiseSchedule;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Inversion,
    Generation,
}

/// Receives every state the loops produce, tagged with its schedule index.
pub trait StepObserver {
    fn on_state(&mut self, phase: Phase, index: usize, sigma: f64, x: &Tensor4);
}

impl<F: FnMut(Phase, usize, f64, &Tensor4)> StepObserver for F {
    fn on_state(&mut self, phase: Phase, index: usize, sigma: f64, x: &Tensor4) {
        self(phase, index, sigma, x)
    }
}

pub(super) struct NoObserver;

impl StepObserver for NoObserver {
    fn on_state(&mut self, _: Phase, _: usize, _: f64, _: &Tensor4) {}
}

/// Records every observed state in order.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<(Phase, usize, f64, Tensor4)>,
}

impl StepObserver for Trajectory {
    fn on_state(&mut self, phase: Phase, index: usize, sigma: f64, x: &Tensor4) {
        self.states.push((phase, index, sigma, x.clone()));
    }
}

/// Guidance weight and the positive/negative conditioning pair. Both
/// bundles must carry identical spatial maps.
#[derive(Debug, Clone)]
pub struct GuidanceParams {
    w_cfg: f64,
    cond_positive: ConditioningBundle,
    cond_negative: ConditioningBundle,
}

impl GuidanceParams {
    pub fn new(
        w_cfg: f64,
        cond_positive: ConditioningBundle,
        cond_negative: ConditioningBundle,
    ) -> Result<Self, SamplerError> {
        if !(w_cfg.is_finite() && w_cfg >= 0.0) {
            return Err(SamplerError::Params(format!("w_cfg must be >= 0, got {w_cfg}")));
        }
        if !cond_positive.same_spatial(&cond_negative) {
            return Err(SamplerError::Params(
                "positive and negative conditioning must share spatial maps".into(),
            ));
        }
        Ok(Self { w_cfg, cond_positive, cond_negative })
    }

    pub fn w_cfg(&self) -> f64 {
        self.w_cfg
    }

    pub fn positive(&self) -> &ConditioningBundle {
        &self.cond_positive
    }

    pub fn negative(&self) -> &ConditioningBundle {
        &self.cond_negative
    }
}

/// Optional guidance during inversion: negative conditioning and weight.
#[derive(Debug, Clone)]
pub struct InversionGuidance {
    pub cond_negative: ConditioningBundle,
    pub w_cfg: f64,
}

fn check_setup(x: &Tensor4, schedule: &NoiseSchedule, denoiser: &dyn DenoiserModel) -> Result<(), SamplerError> {
    if let Some(sd) = denoiser.sigma_data() {
        let want = schedule.sigma_data();
        if (sd - want).abs() > 1e-12 * want {
            return Err(SamplerError::Params(format!(
                "denoiser assumes sigma_data {sd}, schedule has {want}"
            )));
        }
    }
    debug_assert!(x.data().iter().all(|v| v.is_finite()));
    Ok(())
}

fn clean_estimate(
    denoiser: &dyn DenoiserModel,
    x: &Tensor4,
    sigma: f64,
    sigma_data: f64,
    cond: &ConditioningBundle,
    step: usize,
) -> Result<Tensor4, SamplerError> {
    let n = denoiser
        .predict(x, sigma, cond)
        .map_err(|source| SamplerError::Denoiser { step, source })?;
    predict_x0(x, &n, sigma, sigma_data).map_err(|e| e.at_step(step))
}

/// Conditional and unconditional estimates, evaluated concurrently and
/// reduced cond-first.
fn guided_estimate(
    denoiser: &dyn DenoiserModel,
    x: &Tensor4,
    sigma: f64,
    sigma_data: f64,
    positive: &ConditioningBundle,
    negative: &ConditioningBundle,
    w_cfg: f64,
    step: usize,
) -> Result<Tensor4, SamplerError> {
    let (cond, uncond) = rayon::join(
        || clean_estimate(denoiser, x, sigma, sigma_data, positive, step),
        || clean_estimate(denoiser, x, sigma, sigma_data, negative, step),
    );
    cfg_combine(&cond?, &uncond?, w_cfg).map_err(|e| e.at_step(step))
}

/// Runs the guided Euler sampler from `x_T` at `σ_N` down to `σ_0`.
pub fn generate(
    x_t: &Tensor4,
    schedule: &NoiseSchedule,
    denoiser: &dyn DenoiserModel,
    guidance: &GuidanceParams,
) -> Result<Tensor4, SamplerError> {
    generate_observed(x_t, schedule, denoiser, guidance, &mut NoObserver)
}

pub fn generate_observed(
    x_t: &Tensor4,
    schedule: &NoiseSchedule,
    denoiser: &dyn DenoiserModel,
    guidance: &GuidanceParams,
    observer: &mut dyn StepObserver,
) -> Result<Tensor4, SamplerError> {
    check_setup(x_t, schedule, denoiser)?;
    let sd = schedule.sigma_data();
    let n = schedule.n_steps();
    let mut x = x_t.clone();
    observer.on_state(Phase::Generation, n, schedule.sigma(n), &x);
    for t in (1..=n).rev() {
        let sigma = schedule.sigma(t);
        let x0 = guided_estimate(
            denoiser,
            &x,
            sigma,
            sd,
            guidance.positive(),
            guidance.negative(),
            guidance.w_cfg(),
            t,
        )?;
        x = euler_step(&x, &x0, sigma, schedule.sigma(t - 1)).map_err(|e| e.at_step(t))?;
        observer.on_state(Phase::Generation, t - 1, schedule.sigma(t - 1), &x);
    }
    Ok(x)
}

/// Maps a clean latent at `σ_0` to its structure-encoding noise latent at
/// `σ_N`. Without `guidance` the conditional estimate under `cond_inv` is used.
pub fn invert(
    x0_sim: &Tensor4,
    schedule: &NoiseSchedule,
    denoiser: &dyn DenoiserModel,
    cond_inv: &ConditioningBundle,
    guidance: Option<&InversionGuidance>,
) -> Result<Tensor4, SamplerError> {
    invert_observed(x0_sim, schedule, denoiser, cond_inv, guidance, &mut NoObserver)
}

pub fn invert_observed(
    x0_sim: &Tensor4,
    schedule: &NoiseSchedule,
    denoiser: &dyn DenoiserModel,
    cond_inv: &ConditioningBundle,
    guidance: Option<&InversionGuidance>,
    observer: &mut dyn StepObserver,
) -> Result<Tensor4, SamplerError> {
    check_setup(x0_sim, schedule, denoiser)?;
    if let Some(g) = guidance {
        if !cond_inv.same_spatial(&g.cond_negative) {
            return Err(SamplerError::Params(
                "inversion guidance must share spatial maps with the inversion conditioning".into(),
            ));
        }
    }
    let sd = schedule.sigma_data();
    let n = schedule.n_steps();
    let mut x = x0_sim.clone();
    observer.on_state(Phase::Inversion, 0, schedule.sigma(0), &x);
    for t in 0..n {
        let sigma = schedule.sigma(t);
        let x0 = match guidance {
            None => clean_estimate(denoiser, &x, sigma, sd, cond_inv, t)?,
            Some(g) => guided_estimate(denoiser, &x, sigma, sd, cond_inv, &g.cond_negative, g.w_cfg, t)?,
        };
        x = inversion_step(&x, &x0, sigma, schedule.sigma(t + 1)).map_err(|e| e.at_step(t))?;
        observer.on_state(Phase::Inversion, t + 1, schedule.sigma(t + 1), &x);
    }
    Ok(x)
}
