//! Monte-Carlo self-checks of every sampling law for a preset.
//!
//! ```text
//! cargo run --release --example validate [cifar|imagenet] [trials]
//! ```

use std::time::Instant;

use prime::validate::validate_statistics;
use prime::PrimeConfig;

fn main() -> prime::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = PrimeConfig::preset(&args.next().unwrap_or_else(|| "cifar".into()))?;
    let trials = args.next().and_then(|t| t.parse().ok()).unwrap_or(10_000);
    let start = Instant::now();
    let report = validate_statistics(&cfg, trials)?;
    print!("{}", report.table());
    println!("{:.2} s", start.elapsed().as_secs_f64());
    if !report.passed() {
        std::process::exit(3);
    }
    Ok(())
}
