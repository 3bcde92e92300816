//! Single-threaded throughput of the shipped presets.
//!
//! ```text
//! cargo run --release --example bench [count]
//! ```

use prime::bench::bench_throughput;
use prime::PrimeConfig;

fn main() -> prime::Result<()> {
    let count: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(200);
    for (cfg, size) in [(PrimeConfig::cifar(), 32), (PrimeConfig::imagenet(), 224)] {
        let report = bench_throughput(&cfg, size, size, count, 1)?;
        print!("{}", report.summary());
    }
    Ok(())
}
