use super::{check_sigma, finite_output, ConditioningBundle, DenoiserError, DenoiserModel};
use crate::precond::{c_out, c_skip};
use crate::tensor::Tensor4;

/// Exact posterior-mean denoiser for a diagonal Gaussian data distribution
/// `x0 ~ N(mean, var)` under `x = x0 + σ·ε`. Ignores conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAnalyticDenoiser {
    mean: Tensor4,
    var: Tensor4,
    sigma_data: f64,
}

impl GaussianAnalyticDenoiser {
    pub fn new(mean: Tensor4, var: Tensor4, sigma_data: f64) -> Result<Self, DenoiserError> {
        mean.ensure_same_dims(&var)?;
        if let Some(i) = var.data().iter().position(|&v| v <= 0.0) {
            return Err(DenoiserError::Params(format!("variance must be > 0, flat index {i}")));
        }
        if !(sigma_data.is_finite() && sigma_data > 0.0) {
            return Err(DenoiserError::Params(format!("sigma_data must be > 0, got {sigma_data}")));
        }
        Ok(Self { mean, var, sigma_data })
    }

    pub fn mean(&self) -> &Tensor4 {
        &self.mean
    }

    pub fn var(&self) -> &Tensor4 {
        &self.var
    }

    /// Posterior mean `μ + var/(var + σ²)·(x − μ)`.
    pub fn posterior_mean(&self, x: &Tensor4, sigma: f64) -> Result<Tensor4, DenoiserError> {
        self.mean.ensure_same_dims(x)?;
        check_sigma(sigma)?;
        let s2 = sigma * sigma;
        let data = self
            .mean
            .data()
            .iter()
            .zip(self.var.data())
            .zip(x.data())
            .map(|((&m, &v), &xv)| {
                let (m, v) = (m as f64, v as f64);
                (m + v / (v + s2) * (xv as f64 - m)) as f32
            })
            .collect();
        finite_output(Tensor4::new(x.dims(), data), sigma)
    }
}

impl DenoiserModel for GaussianAnalyticDenoiser {
    fn predict(&self, x: &Tensor4, sigma: f64, _cond: &ConditioningBundle) -> Result<Tensor4, DenoiserError> {
        self.mean.ensure_same_dims(x)?;
        check_sigma(sigma)?;
        let s2 = sigma * sigma;
        let skip = c_skip(sigma, self.sigma_data);
        let out = c_out(sigma, self.sigma_data);
        let data = self
            .mean
            .data()
            .iter()
            .zip(self.var.data())
            .zip(x.data())
            .map(|((&m, &v), &xv)| {
                let (m, v, xv) = (m as f64, v as f64, xv as f64);
                let x0 = m + v / (v + s2) * (xv - m);
                ((x0 - skip * xv) / out) as f32
            })
            .collect();
        finite_output(Tensor4::new(x.dims(), data), sigma)
    }

    fn sigma_data(&self) -> Option<f64> {
        Some(self.sigma_data)
    }

    fn name(&self) -> &'static str {
        "gaussian"
    }
}
