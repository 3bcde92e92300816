//! The batch interface used by foreign-language training loops: one
//! contiguous `N × H × W × 3` float buffer per call.
//!
//! ```text
//! cargo run --release --example batch
//! ```

use prime::batch::{augment_batch, replay_batch, BatchShape};
use prime::{PrimeConfig, RngState};

fn main() -> prime::Result<()> {
    let shape = BatchShape::new(64, 32, 32);
    let mut rng = RngState::derive(0, &[]);
    let batch: Vec<f32> = (0..shape.count * shape.element_len())
        .map(|_| rng.uniform(0.0, 1.0).map(|v| v as f32))
        .collect::<prime::Result<_>>()?;
    let cfg = PrimeConfig::cifar();
    for epoch in 0..3 {
        let out = augment_batch(&batch, shape, &cfg, 42, epoch)?;
        let replayed = replay_batch(&batch, shape, &out.recipes)?;
        let delta = out
            .data
            .iter()
            .zip(&batch)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum::<f64>()
            / batch.len() as f64;
        println!(
            "epoch {epoch}: mean |augmented - clean| = {delta:.4}, replay identical: {}",
            replayed == out.data
        );
    }
    Ok(())
}
