//! Coverage metric on synthetic embeddings: augmentations drawn closer to
//! the corruptions cover them better.
//!
//! ```text
//! cargo run --release --example fitness
//! ```

use prime::analysis::{EmbeddingSet, FitnessReport};
use prime::RngState;

fn synthetic(spread: f64, seed: u64) -> prime::Result<EmbeddingSet> {
    let (n, c, t, d) = (100, 15, 20, 32);
    let mut rng = RngState::derive(seed, &[]);
    let mut corruption = Vec::new();
    let mut augmentation = Vec::new();
    for _ in 0..n {
        let anchor: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        for _ in 0..c {
            corruption.extend(anchor.iter().map(|a| a + 0.5 * rng.standard_normal()));
        }
        for _ in 0..t {
            augmentation.extend(anchor.iter().map(|a| a + spread * rng.standard_normal()));
        }
    }
    EmbeddingSet::new(n, c, t, d, corruption, augmentation)
}

fn main() -> prime::Result<()> {
    for (label, spread) in [("narrow", 0.1), ("matched", 0.5), ("wide", 2.0)] {
        let set = synthetic(spread, 1)?;
        let report = FitnessReport::from_set(&set);
        println!(
            "{label}: mean {:.4}, median {:.4}",
            report.mean, report.median
        );
        print!("{}", report.table(label));
    }
    let path = std::env::temp_dir().join("prime-embeddings.bin");
    std::fs::write(&path, synthetic(0.5, 2)?.to_bytes(32)?).expect("write embeddings");
    println!(
        "binary embedding file for `prime fitness`: {}",
        path.display()
    );
    Ok(())
}
