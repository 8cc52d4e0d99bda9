use super::SamplerError;
use crate::precond::{c_out, c_skip};
use crate::tensor::Tensor4;

fn positive(name: &str, v: f64) -> Result<(), SamplerError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SamplerError::Params(format!("{name} must be positive, got {v}")))
    }
}

/// Clean estimate from a raw network output:
/// `x̂0 = σ_d²/(σ²+σ_d²)·x + σ·σ_d/√(σ²+σ_d²)·n`.
pub fn predict_x0(x: &Tensor4, n: &Tensor4, sigma: f64, sigma_data: f64) -> Result<Tensor4, SamplerError> {
    positive("sigma", sigma)?;
    positive("sigma_data", sigma_data)?;
    let skip = c_skip(sigma, sigma_data);
    let out = c_out(sigma, sigma_data);
    Ok(x.zip_map(n, |x, n| (skip * x as f64 + out * n as f64) as f32)?)
}

/// Guided estimate `cond + w·(cond − uncond)`. At `w = 0`, or wherever the
/// two estimates agree, the conditional value is returned bit-for-bit.
pub fn cfg_combine(x0_cond: &Tensor4, x0_uncond: &Tensor4, w_cfg: f64) -> Result<Tensor4, SamplerError> {
    if !(w_cfg.is_finite() && w_cfg >= 0.0) {
        return Err(SamplerError::Params(format!("w_cfg must be >= 0, got {w_cfg}")));
    }
    if w_cfg == 0.0 {
        x0_cond.ensure_same_dims(x0_uncond)?;
        return Ok(x0_cond.clone());
    }
    Ok(x0_cond.zip_map(x0_uncond, |c, u| {
        if c == u {
            c
        } else {
            let c = c as f64;
            (c + w_cfg * (c - u as f64)) as f32
        }
    })?)
}

fn ode_step(x_t: &Tensor4, x0_hat: &Tensor4, sigma_t: f64, sigma_to: f64) -> Result<Tensor4, SamplerError> {
    let dsigma = sigma_to - sigma_t;
    Ok(x_t.zip_map(x0_hat, |x, x0| {
        let x = x as f64;
        (x + ((x - x0 as f64) / sigma_t) * dsigma) as f32
    })?)
}

/// One generation step toward lower noise:
/// `x_{t−1} = x_t + ((x_t − x̂0)/σ_t)·(σ_{t−1} − σ_t)`.
pub fn euler_step(x_t: &Tensor4, x0_hat: &Tensor4, sigma_t: f64, sigma_prev: f64) -> Result<Tensor4, SamplerError> {
    positive("sigma_t", sigma_t)?;
    if !(sigma_prev.is_finite() && sigma_prev < sigma_t) {
        return Err(SamplerError::Direction { from: sigma_t, to: sigma_prev });
    }
    ode_step(x_t, x0_hat, sigma_t, sigma_prev)
}

/// One inversion step toward higher noise:
/// `x_{t+1} = x_t + ((x_t − x̂0)/σ_t)·(σ_{t+1} − σ_t)`.
pub fn inversion_step(x_t: &Tensor4, x0_hat: &Tensor4, sigma_t: f64, sigma_next: f64) -> Result<Tensor4, SamplerError> {
    positive("sigma_t", sigma_t)?;
    if !(sigma_next.is_finite() && sigma_next > sigma_t) {
        return Err(SamplerError::Direction { from: sigma_t, to: sigma_next });
    }
    ode_step(x_t, x0_hat, sigma_t, sigma_next)
}
