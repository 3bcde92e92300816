//! Smooth random warp of a grid image, with the displacement statistics.
//!
//! ```text
//! cargo run --release --example spatial_warp [out.png]
//! ```

use prime::{
    apply_spatial, displacement_field, sample_spatial_params, Image, PrimeConfig, RngState,
};

fn main() -> prime::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "spatial.png".into());
    let size = 128;
    let grid = Image::from_fn(size, size, |r, c, _| {
        if r % 16 == 0 || c % 16 == 0 {
            0.0
        } else {
            1.0
        }
    });
    let sp = PrimeConfig::cifar().spatial;
    let mut rng = RngState::derive(3, &[]);
    // Upper end of the range, so the warp is easy to see.
    let params = sample_spatial_params(
        &mut rng,
        sp.cut_frequency,
        (sp.sigma_max, sp.sigma_max),
        1.0,
    )?;
    let field = displacement_field(&params, size, size)?;
    println!(
        "K={} sigma={:.4}: {} coefficients per axis, max displacement {:.2} px, border max {:e}",
        params.cut_frequency,
        params.sigma,
        params.row.len(),
        field.max_pixel_displacement(),
        field.border_max_abs()
    );
    apply_spatial(&grid, &params)?.save_png(&out)?;
    println!("wrote {out}");
    Ok(())
}
