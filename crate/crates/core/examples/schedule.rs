//! Print the default power schedule and the preconditioning coefficients
//! at a few of its noise levels.
//!
//! ```text
//! cargo run --example schedule -- 12
//! ```

use svr::make_power_schedule;
use svr::precond::{c_in, c_noise, c_out, c_skip};

fn main() {
    let n: usize = std::env::args().nth(1).map(|s| s.parse().expect("step count")).unwrap_or(35);
    let s = make_power_schedule(n, 0.002, 80.0, 7.0).expect("valid schedule");
    let sd = s.sigma_data();
    println!("{:>4} {:>12} {:>10} {:>10} {:>10} {:>10}", "t", "sigma", "c_skip", "c_out", "c_in", "c_noise");
    for (t, &sigma) in s.sigmas().iter().enumerate() {
        println!(
            "{t:>4} {sigma:>12.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            c_skip(sigma, sd),
            c_out(sigma, sd),
            c_in(sigma, sd),
            c_noise(sigma)
        );
    }
}
