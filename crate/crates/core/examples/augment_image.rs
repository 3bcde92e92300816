//! One full draw on an image file: augment, save, and replay the recipe from
//! its JSON form.
//!
//! ```text
//! cargo run --release --example augment_image <input> [out.png] [seed]
//! ```

use prime::{apply_recipe, prime_augment, Image, PrimeConfig, Recipe, RngState};

fn main() -> prime::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(input) = args.next() else {
        eprintln!("usage: augment_image <input> [out.png] [seed]");
        std::process::exit(1);
    };
    let out = args.next().unwrap_or_else(|| "augmented.png".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let img = Image::load(&input)?;
    let cfg = if img.height().max(img.width()) > 64 {
        PrimeConfig::imagenet()
    } else {
        PrimeConfig::cifar()
    };
    let (augmented, recipe) = prime_augment(&img, &cfg, &RngState::derive(seed, &[]))?;
    for (i, chain) in recipe.chains.iter().enumerate() {
        let names: Vec<&str> = chain
            .iter()
            .map(|s| s.primitive().map_or("identity", |p| p.name()))
            .collect();
        println!(
            "chain {}: {} (weight {:.3})",
            i + 1,
            names.join(" -> "),
            recipe.weights[i + 1]
        );
    }
    println!("clean image weight {:.3}", recipe.weights[0]);
    let json = recipe.to_json();
    let replayed = apply_recipe(&img, &Recipe::from_json(&json)?)?;
    assert_eq!(replayed, augmented);
    println!(
        "recipe: {} bytes of JSON, replay is bit-identical",
        json.len()
    );
    augmented.save_png(&out)?;
    println!("wrote {out}");
    Ok(())
}
