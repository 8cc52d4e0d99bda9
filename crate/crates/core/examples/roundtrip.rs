//! Invert and regenerate a latent under the analytic Gaussian denoiser and
//! watch the round-trip error fall roughly in half each time the step count
//! doubles.

use svr::{generate, invert, make_power_schedule, text_embed, ConditioningBundle, Dims4, GaussianAnalyticDenoiser, GuidanceParams, Tensor4};

fn main() {
    let d = Dims4::new(4, 1, 16, 16);
    let mean = Tensor4::from_fn(d, |t, _, y, x| 0.3 * ((x as f32 * 0.4 + t as f32 * 0.2).sin() + y as f32 / 16.0)).unwrap();
    let var = Tensor4::filled(d, 0.1).unwrap();
    let z = Tensor4::randn(d, 3).unwrap();
    let x0 = mean.zip_map(&z, |m, z| m + 0.1f32.sqrt() * z).unwrap();
    let den = GaussianAnalyticDenoiser::new(mean, var, 0.5).unwrap();

    let cond = ConditioningBundle::text_only(text_embed("")).unwrap();
    let guidance = GuidanceParams::new(0.0, cond.clone(), cond.clone()).unwrap();
    let mut prev = None;
    println!("{:>6} {:>12} {:>8}", "N", "rmse", "ratio");
    for n in [16, 32, 64, 128, 256] {
        let s = make_power_schedule(n, 0.002, 80.0, 7.0).unwrap();
        let x_t = invert(&x0, &s, &den, &cond, None).unwrap();
        let back = generate(&x_t, &s, &den, &guidance).unwrap();
        let err = back.rmse(&x0).unwrap();
        let ratio = prev.map(|p: f64| format!("{:.3}", p / err)).unwrap_or_default();
        println!("{n:>6} {err:>12.4e} {ratio:>8}");
        prev = Some(err);
    }
}
