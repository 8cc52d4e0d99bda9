use super::{check_sigma, finite_output, ConditioningBundle, DenoiserError, DenoiserModel};
use crate::precond::raw_output_for;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
enum Target {
    Scalar(f32),
    Tensor(Tensor4),
}

/// Returns the raw output whose clean estimate is a fixed target, either a
/// broadcast scalar or a full tensor. Ignores conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDenoiser {
    target: Target,
    sigma_data: f64,
}

impl ConstantDenoiser {
    pub fn scalar(value: f32, sigma_data: f64) -> Result<Self, DenoiserError> {
        if !value.is_finite() {
            return Err(DenoiserError::Params("target must be finite".into()));
        }
        Self::checked(Target::Scalar(value), sigma_data)
    }

    /// Zero clean estimate.
    pub fn zero(sigma_data: f64) -> Result<Self, DenoiserError> {
        Self::scalar(0.0, sigma_data)
    }

    pub fn tensor(target: Tensor4, sigma_data: f64) -> Result<Self, DenoiserError> {
        Self::checked(Target::Tensor(target), sigma_data)
    }

    fn checked(target: Target, sigma_data: f64) -> Result<Self, DenoiserError> {
        if !(sigma_data.is_finite() && sigma_data > 0.0) {
            return Err(DenoiserError::Params(format!("sigma_data must be > 0, got {sigma_data}")));
        }
        Ok(Self { target, sigma_data })
    }
}

impl DenoiserModel for ConstantDenoiser {
    fn predict(&self, x: &Tensor4, sigma: f64, _cond: &ConditioningBundle) -> Result<Tensor4, DenoiserError> {
        check_sigma(sigma)?;
        let sd = self.sigma_data;
        let data: Vec<f32> = match &self.target {
            Target::Scalar(c) => x
                .data()
                .iter()
                .map(|&xv| raw_output_for(xv as f64, *c as f64, sigma, sd) as f32)
                .collect(),
            Target::Tensor(t) => {
                t.ensure_same_dims(x)?;
                x.data()
                    .iter()
                    .zip(t.data())
                    .map(|(&xv, &c)| raw_output_for(xv as f64, c as f64, sigma, sd) as f32)
                    .collect()
            }
        };
        finite_output(Tensor4::new(x.dims(), data), sigma)
    }

    fn sigma_data(&self) -> Option<f64> {
        Some(self.sigma_data)
    }

    fn name(&self) -> &'static str {
        "constant"
    }
}
