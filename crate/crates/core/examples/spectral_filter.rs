//! Random FIR filtering of a synthetic test card.
//!
//! ```text
//! cargo run --release --example spectral_filter [out.png]
//! ```

use prime::{apply_spectral, sample_spectral_params, Image, RngState};

fn test_card(size: usize) -> Image {
    Image::from_fn(size, size, |r, c, ch| {
        let checker = ((r / 8 + c / 8) % 2) as f64;
        0.2 + 0.6 * checker * [1.0, 0.7, 0.4][ch]
    })
}

fn main() -> prime::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "spectral.png".into());
    let img = test_card(64);
    let mut rng = RngState::derive(7, &[]);
    let params = sample_spectral_params(&mut rng, 3, 4.0, 1.0)?;
    println!("sigma {:.3}, |w'|^2 = {:.3}", params.sigma, params.energy());
    for row in params.filter().chunks(params.kernel_size) {
        println!(
            "  {}",
            row.iter().map(|v| format!("{v:+8.3}")).collect::<String>()
        );
    }
    apply_spectral(&img, &params)?.save_png(&out)?;
    println!("wrote {out}");
    Ok(())
}
