//! Random per-channel color curves applied to a gradient, with a few curve
//! samples printed against the direct sum.
//!
//! ```text
//! cargo run --release --example color_curves [out.png]
//! ```

use prime::color::ColorLut;
use prime::{apply_color, sample_color_params, Image, RngState};

fn main() -> prime::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "color.png".into());
    let gradient = Image::from_fn(32, 256, |_, c, _| c as f64 / 255.0);
    let mut rng = RngState::derive(5, &[]);
    let params = sample_color_params(&mut rng, 500, 20, 0.05, 1.0)?;
    println!(
        "band {}..={}, sigma {:.4}",
        params.band_start,
        params.band_start + params.band_width - 1,
        params.sigma
    );
    let lut = ColorLut::new(&params)?;
    for v in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!(
            "  v={v:.2}: red {:.6} (direct {:.6})",
            lut.map(v, 0),
            params.map_exact(v, 0)
        );
    }
    apply_color(&gradient, &params)?.save_png(&out)?;
    println!("wrote {out}");
    Ok(())
}
