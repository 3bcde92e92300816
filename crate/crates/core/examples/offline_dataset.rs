//! Offline augmentation of a directory, then replay of the manifest.
//!
//! With no arguments a small synthetic dataset is generated in a temporary
//! directory.
//!
//! ```text
//! cargo run --release --example offline_dataset [input_dir output_dir]
//! ```

use std::path::PathBuf;

use prime::pipeline::{augment_dataset, verify_manifest};
use prime::{Image, PrimeConfig, RngState};

fn main() -> prime::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scratch = std::env::temp_dir().join("prime-offline-example");
    let (input, output) = match args.as_slice() {
        [i, o] => (PathBuf::from(i), PathBuf::from(o)),
        _ => {
            let input = scratch.join("input");
            std::fs::create_dir_all(&input).expect("create scratch directory");
            for n in 0..10u64 {
                let mut rng = RngState::derive(n, &[]);
                let (a, b) = (rng.uniform(0.0, 1.0)?, rng.uniform(0.0, 1.0)?);
                Image::from_fn(32, 32, |r, c, ch| {
                    (a * r as f64 / 31.0 + b * c as f64 / 31.0 + 0.2 * ch as f64) % 1.0
                })
                .save_png(input.join(format!("{n:03}.png")))?;
            }
            (input, scratch.join("output"))
        }
    };
    let manifest = augment_dataset(&input, &output, 4, &PrimeConfig::cifar(), 2024)?;
    println!(
        "{} outputs, {} skipped, manifest in {}",
        manifest.entries.len(),
        manifest.skipped.len(),
        output.display()
    );
    let report = verify_manifest(&output, None)?;
    println!(
        "replayed {} entries, {} mismatches",
        report.checked,
        report.mismatches.len()
    );
    Ok(())
}
