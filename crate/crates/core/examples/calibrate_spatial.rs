//! Monte-Carlo calibration of the default spatial strength ranges.
//!
//! With `σ_min = 0` the largest pixel displacement of a field scales
//! linearly with `σ_max`, so one run at `σ_max = 1` fixes the constant:
//! `σ_max = target / p99`.
//!
//! ```text
//! cargo run --release --example calibrate_spatial
//! ```

use prime::spatial::{displacement_field, sample_spatial_params};
use prime::RngState;

const FIELDS: usize = 1000;

fn p99_displacement(cut_frequency: u32, size: usize, seed: u64) -> f64 {
    let mut maxima: Vec<f64> = (0..FIELDS as u64)
        .map(|i| {
            let mut rng = RngState::derive(seed, &[i]);
            let params = sample_spatial_params(&mut rng, cut_frequency, (0.0, 1.0), 1.0).unwrap();
            displacement_field(&params, size, size)
                .unwrap()
                .max_pixel_displacement()
        })
        .collect();
    maxima.sort_by(f64::total_cmp);
    maxima[(FIELDS * 99).div_ceil(100) - 1]
}

fn main() {
    for (name, k, size, target) in [("cifar", 100, 32, 3.0), ("imagenet", 500, 224, 6.0)] {
        let p99 = p99_displacement(k, size, 0x5eed);
        let sigma_max = target / p99;
        println!("{name}: K={k} {size}x{size} p99 at sigma_max=1: {p99:.4} px -> sigma_max = {sigma_max:.6}");
    }
}
