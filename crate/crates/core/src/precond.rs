//! EDM preconditioning coefficients relating a raw network output `n` to
//! the clean estimate: `x̂0 = c_skip(σ)·x + c_out(σ)·n`.

pub fn c_skip(sigma: f64, sigma_data: f64) -> f64 {
    let sd2 = sigma_data * sigma_data;
    sd2 / (sigma * sigma + sd2)
}

pub fn c_out(sigma: f64, sigma_data: f64) -> f64 {
    sigma * sigma_data / (sigma * sigma + sigma_data * sigma_data).sqrt()
}

/// Input scaling applied by the toy backbone before its first block.
pub fn c_in(sigma: f64, sigma_data: f64) -> f64 {
    1.0 / (sigma * sigma + sigma_data * sigma_data).sqrt()
}

/// Noise-level embedding scalar fed to the toy backbone.
pub fn c_noise(sigma: f64) -> f64 {
    sigma.ln() / 4.0
}

/// Raw output `n` that makes the clean estimate land exactly on `x0_hat`.
pub fn raw_output_for(x: f64, x0_hat: f64, sigma: f64, sigma_data: f64) -> f64 {
    (x0_hat - c_skip(sigma, sigma_data) * x) / c_out(sigma, sigma_data)
}
