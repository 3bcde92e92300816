//! A grid of independent draws of one image, clean image top-left.
//!
//! ```text
//! cargo run --release --example preview <input> [out.png] [rows] [cols]
//! ```

use prime::pipeline::preview_grid;
use prime::PrimeConfig;

fn main() -> prime::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(input) = args.next() else {
        eprintln!("usage: preview <input> [out.png] [rows] [cols]");
        std::process::exit(1);
    };
    let out = args.next().unwrap_or_else(|| "preview.png".into());
    let rows = args.next().and_then(|v| v.parse().ok()).unwrap_or(3);
    let cols = args.next().and_then(|v| v.parse().ok()).unwrap_or(4);
    preview_grid(&input, &PrimeConfig::imagenet(), 1, rows, cols)?.save_png(&out)?;
    println!("wrote {out}");
    Ok(())
}
