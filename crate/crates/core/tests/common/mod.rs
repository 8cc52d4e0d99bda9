#![allow(dead_code)]

use svr::metrics::{FeatureStack, MaskSet, ObjectMask};
use svr::{Dims4, GaussianAnalyticDenoiser, Tensor4};

/// predict_x0 at σ = 2, σ_data = 0.5 of x = randn(seed 11), n = randn(seed 12)
/// on dims (1, 1, 2, 4), evaluated in 50-digit arithmetic on the f32 inputs.
pub const PREDICT_X0_GOLDEN: [f64; 8] = [
    0.05042338910985869,
    -0.08602372620415528,
    0.4043453128284206,
    -0.6119637259703107,
    0.26701574933380784,
    -0.014115828349531569,
    -0.2401778690209599,
    0.794450321626523,
];

/// One Euler step σ 3 → 1.5 of x = randn(seed 21) toward x̂0 = randn(seed 22).
pub const EULER_GOLDEN: [f64; 8] = [
    0.0029516518115997314,
    0.9046537727117538,
    0.3601332753896713,
    0.727983683347702,
    -1.672506421804428,
    -0.6371306702494621,
    -0.5327778607606888,
    0.29646898806095123,
];

/// Gaussian denoiser raw output for mean [0.3, -0.7, 1.1, 0], var
/// [0.25, 2, 0.01, 1], x [1.5, -2, 0.4, 3.3] at σ = 1.3, σ_data = 0.5.
pub const GAUSSIAN_GOLDEN: [f64; 4] = [0.560007385974529, -2.4575571454468026, 2.2378333969924102, 1.717494678047236];

pub const VIDEO: Dims4 = Dims4::new(8, 1, 16, 16);

/// Prior mean and variance varying smoothly over the latent, and a clean
/// latent drawn from that prior.
pub fn gaussian_problem(seed: u64) -> (GaussianAnalyticDenoiser, Tensor4) {
    let mean = Tensor4::from_fn(VIDEO, |t, _, y, x| 0.3 * ((x as f32 * 0.4 + t as f32 * 0.2).sin() + y as f32 / 16.0))
        .unwrap();
    let var = Tensor4::from_fn(VIDEO, |_, _, y, x| 0.05 + 0.2 * ((x + y) % 5) as f32 / 4.0).unwrap();
    let z = Tensor4::randn(VIDEO, seed).unwrap();
    let x0 = Tensor4::new(
        VIDEO,
        (0..VIDEO.numel()).map(|i| mean.data()[i] + var.data()[i].sqrt() * z.data()[i]).collect(),
    )
    .unwrap();
    (GaussianAnalyticDenoiser::new(mean, var, 0.5).unwrap(), x0)
}

/// Classical RK4 on the probability-flow ODE of a Gaussian prior,
/// `dx/du = (x − μ)·σ²/(v + σ²)` with `u = ln σ`, on a uniform grid in `u`.
pub fn rk4_flow(x: f64, mu: f64, v: f64, sigma_from: f64, sigma_to: f64, steps: usize) -> f64 {
    let f = |x: f64, u: f64| {
        let s2 = (2.0 * u).exp();
        (x - mu) * s2 / (v + s2)
    };
    let (u0, u1) = (sigma_from.ln(), sigma_to.ln());
    let h = (u1 - u0) / steps as f64;
    let mut x = x;
    for i in 0..steps {
        let u = u0 + i as f64 * h;
        let k1 = f(x, u);
        let k2 = f(x + 0.5 * h * k1, u + 0.5 * h);
        let k3 = f(x + 0.5 * h * k2, u + 0.5 * h);
        let k4 = f(x + h * k3, u + h);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

/// Applies [`rk4_flow`] elementwise.
pub fn rk4_tensor(x: &Tensor4, d: &GaussianAnalyticDenoiser, from: f64, to: f64, steps: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| rk4_flow(x.data()[i] as f64, d.mean().data()[i] as f64, d.var().data()[i] as f64, from, to, steps))
        .collect()
}

pub fn rmse_vs(a: &Tensor4, b: &[f64]) -> f64 {
    (a.data().iter().zip(b).map(|(&x, &y)| (x as f64 - y).powi(2)).sum::<f64>() / b.len() as f64).sqrt()
}

/// One frame, 2 channels, 2x5 pixels. The original is one-hot on channel
/// 0 everywhere. Row 0 ("car") keeps 4 of 5 pixels, row 1 ("sign") keeps
/// 3 of 5; the rest flip to channel 1, which is orthogonal.
pub fn two_object_fixture() -> (FeatureStack, FeatureStack, MaskSet) {
    let d = Dims4::new(1, 2, 2, 5);
    let orig = Tensor4::from_fn(d, |_, c, _, _| (c == 0) as u8 as f32).unwrap();
    let keep = |y: usize, x: usize| if y == 0 { x < 4 } else { x < 3 };
    let gen = Tensor4::from_fn(d, |_, c, y, x| if keep(y, x) == (c == 0) { 1.0 } else { 0.0 }).unwrap();
    let masks = MaskSet::new(vec![vec![
        ObjectMask::from_fn("car", 2, 5, |y, _| y == 0).unwrap(),
        ObjectMask::from_fn("sign", 2, 5, |y, _| y == 1).unwrap(),
    ]])
    .unwrap();
    (FeatureStack::new(orig), FeatureStack::new(gen), masks)
}

/// Direct enumeration of masked mean cosine similarity per (frame, object).
pub fn brute_force_scores(orig: &FeatureStack, gen: &FeatureStack, masks: &MaskSet) -> Vec<Vec<Option<f64>>> {
    let (a, b) = (orig.tensor(), gen.tensor());
    let d = a.dims();
    (0..masks.n_frames())
        .map(|t| {
            masks
                .frame(t)
                .iter()
                .map(|m| {
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for y in 0..d.height {
                        for x in 0..d.width {
                            if !m.get(y, x) {
                                continue;
                            }
                            let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
                            for c in 0..d.channels {
                                let (p, q) = (a.get(t, c, y, x) as f64, b.get(t, c, y, x) as f64);
                                dot += p * q;
                                na += p * p;
                                nb += q * q;
                            }
                            sum += if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na.sqrt() * nb.sqrt()) };
                            count += 1;
                        }
                    }
                    (count > 0).then(|| sum / count as f64)
                })
                .collect()
        })
        .collect()
}

pub fn assert_rel(got: f64, want: f64, tol: f64) {
    let err = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
    assert!(err <= tol, "got {got}, want {want}, rel err {err:e} > {tol:e}");
}
