//! Noise-level schedules. Index `t` grows with noise: `sigmas[0]` is the
//! near-data level and `sigmas[N]` the fully-noised level.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest admissible `sigmas[0]`. The ODE drift divides by σ.
pub const SIGMA_FLOOR: f64 = 0.002;
pub const DEFAULT_SIGMA_MIN: f64 = 0.002;
pub const DEFAULT_SIGMA_MAX: f64 = 80.0;
pub const DEFAULT_RHO: f64 = 7.0;
pub const DEFAULT_SIGMA_DATA: f64 = 0.5;
pub const DEFAULT_STEPS: usize = 35;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("n_steps must be >= 1")]
    NoSteps,
    #[error("schedule needs at least 2 levels, got {0}")]
    TooShort(usize),
    #[error("sigma_min must be >= {SIGMA_FLOOR}, got {0}")]
    BelowFloor(f64),
    #[error("sigma_max ({max}) must exceed sigma_min ({min})")]
    BadRange { min: f64, max: f64 },
    #[error("rho must be >= 1, got {0}")]
    BadRho(f64),
    #[error("sigma_data must be positive and finite, got {0}")]
    BadSigmaData(f64),
    #[error("sigmas not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("non-finite sigma at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
    sigma_data: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    sigmas: Vec<f64>,
    sigma_data: f64,
}

impl TryFrom<RawSchedule> for NoiseSchedule {
    type Error = ScheduleError;
    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        NoiseSchedule::new(raw.sigmas, raw.sigma_data)
    }
}

impl From<NoiseSchedule> for RawSchedule {
    fn from(s: NoiseSchedule) -> Self {
        RawSchedule { sigmas: s.sigmas, sigma_data: s.sigma_data }
    }
}

impl NoiseSchedule {
    pub fn new(sigmas: Vec<f64>, sigma_data: f64) -> Result<Self, ScheduleError> {
        if sigmas.len() < 2 {
            return Err(ScheduleError::TooShort(sigmas.len()));
        }
        if !(sigma_data.is_finite() && sigma_data > 0.0) {
            return Err(ScheduleError::BadSigmaData(sigma_data));
        }
        if let Some(i) = sigmas.iter().position(|s| !s.is_finite()) {
            return Err(ScheduleError::NonFinite(i));
        }
        if sigmas[0] < SIGMA_FLOOR {
            return Err(ScheduleError::BelowFloor(sigmas[0]));
        }
        if let Some(i) = sigmas.windows(2).position(|w| w[0] >= w[1]) {
            return Err(ScheduleError::NotIncreasing(i + 1));
        }
        Ok(Self { sigmas, sigma_data })
    }

    pub fn with_sigma_data(self, sigma_data: f64) -> Result<Self, ScheduleError> {
        Self::new(self.sigmas, sigma_data)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t]
    }

    pub fn sigma_data(&self) -> f64 {
        self.sigma_data
    }

    /// Number of steps `N` (one less than the number of levels).
    pub fn n_steps(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigmas[0]
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigmas[self.n_steps()]
    }
}

/// Power-law interpolation between `sigma_min` and `sigma_max`:
/// `sigmas[t] = (a + (t/N)·(b − a))^rho` with `a = sigma_min^(1/rho)`,
/// `b = sigma_max^(1/rho)`. Endpoints are pinned to the exact inputs.
/// `sigma_data` defaults to [`DEFAULT_SIGMA_DATA`].
pub fn make_power_schedule(
    n_steps: usize,
    sigma_min: f64,
    sigma_max: f64,
    rho: f64,
) -> Result<NoiseSchedule, ScheduleError> {
    if n_steps < 1 {
        return Err(ScheduleError::NoSteps);
    }
    if !(sigma_min.is_finite() && sigma_min >= SIGMA_FLOOR) {
        return Err(ScheduleError::BelowFloor(sigma_min));
    }
    if !(sigma_max.is_finite() && sigma_max > sigma_min) {
        return Err(ScheduleError::BadRange { min: sigma_min, max: sigma_max });
    }
    if !(rho.is_finite() && rho >= 1.0) {
        return Err(ScheduleError::BadRho(rho));
    }
    let a = sigma_min.powf(1.0 / rho);
    let b = sigma_max.powf(1.0 / rho);
    let n = n_steps as f64;
    let mut sigmas: Vec<f64> = (0..=n_steps)
        .map(|t| (a + (t as f64 / n) * (b - a)).powf(rho))
        .collect();
    sigmas[0] = sigma_min;
    sigmas[n_steps] = sigma_max;
    NoiseSchedule::new(sigmas, DEFAULT_SIGMA_DATA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_schedule() {
        let s = make_power_schedule(1, 0.002, 80.0, 7.0).unwrap();
        assert_eq!(s.sigmas(), &[0.002, 80.0]);
        assert_eq!(s.n_steps(), 1);
    }

    #[test]
    fn linear_when_rho_is_one() {
        let s = make_power_schedule(2, 1.0, 3.0, 1.0).unwrap();
        assert_eq!(s.sigmas(), &[1.0, 2.0, 3.0]);
    }

    // Frozen from a 40-digit evaluation of
    // (0.002^(1/7) + t/4·(80^(1/7) − 0.002^(1/7)))^7.
    #[test]
    fn golden_four_step_schedule() {
        let s = make_power_schedule(4, 0.002, 80.0, 7.0).unwrap();
        let golden = [0.002, 0.16975275626876402, 2.5152189761471586, 17.52783196464411, 80.0];
        for (got, want) in s.sigmas().iter().zip(golden) {
            assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn parameter_errors() {
        assert_eq!(make_power_schedule(0, 0.002, 80.0, 7.0), Err(ScheduleError::NoSteps));
        assert!(matches!(make_power_schedule(3, 0.0, 80.0, 7.0), Err(ScheduleError::BelowFloor(_))));
        assert!(matches!(make_power_schedule(3, -1.0, 80.0, 7.0), Err(ScheduleError::BelowFloor(_))));
        assert!(matches!(make_power_schedule(3, 1.0, 1.0, 7.0), Err(ScheduleError::BadRange { .. })));
        assert!(matches!(make_power_schedule(3, 1.0, 2.0, 0.5), Err(ScheduleError::BadRho(_))));
    }

    #[test]
    fn new_validates() {
        assert!(matches!(NoiseSchedule::new(vec![1.0], 0.5), Err(ScheduleError::TooShort(1))));
        assert!(matches!(NoiseSchedule::new(vec![1.0, 1.0], 0.5), Err(ScheduleError::NotIncreasing(1))));
        assert!(matches!(NoiseSchedule::new(vec![0.001, 1.0], 0.5), Err(ScheduleError::BelowFloor(_))));
        assert!(matches!(NoiseSchedule::new(vec![1.0, 2.0], 0.0), Err(ScheduleError::BadSigmaData(_))));
    }

    #[test]
    fn json_shape() {
        let s = make_power_schedule(2, 1.0, 3.0, 1.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"sigmas":[1.0,2.0,3.0],"sigma_data":0.5}"#);
        let back: NoiseSchedule = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<NoiseSchedule>(r#"{"sigmas":[2.0,1.0],"sigma_data":0.5}"#).is_err());
        assert!(serde_json::from_str::<NoiseSchedule>(r#"{"sigmas":[1.0,2.0],"sigma_data":0.5,"x":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn monotone_for_valid_params(
            n in 1usize..300,
            lo in 0.002f64..10.0,
            span in 1e-3f64..200.0,
            rho in 1.0f64..12.0,
        ) {
            let s = make_power_schedule(n, lo, lo + span, rho).unwrap();
            prop_assert_eq!(s.sigmas().len(), n + 1);
            prop_assert_eq!(s.sigma_min(), lo);
            prop_assert_eq!(s.sigma_max(), lo + span);
            prop_assert!(s.sigmas().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn rho_one_is_arithmetic(n in 1usize..200, lo in 0.002f64..10.0, span in 0.1f64..100.0) {
            let hi = lo + span;
            let s = make_power_schedule(n, lo, hi, 1.0).unwrap();
            for (t, &sig) in s.sigmas().iter().enumerate() {
                let want = lo + (t as f64) * (hi - lo) / n as f64;
                prop_assert!((sig - want).abs() <= 4.0 * f64::EPSILON * hi, "t={} {} vs {}", t, sig, want);
            }
        }
    }
}
