//! Stochastic compose-and-mix augmentation.
//!
//! A draw builds `width` chains. Every chain starts from the clean image and
//! applies `depth` steps, each picked uniformly from identity plus the
//! enabled primitives, with freshly sampled parameters. The clean image and
//! the chain outputs are then mixed with Dir(1) weights, index 0 being the
//! clean image. The full draw is captured in a [`Recipe`] that replays
//! bit-for-bit.
//!
//! Random streams: step `j` of chain `i` (both 1-based) reads
//! `rng.child(i).child(j)`; the mixing weights read `rng.child(0)`.

use serde::{Deserialize, Serialize};

use crate::color::{apply_color, sample_color_params, ColorParams};
use crate::config::{PrimeConfig, Primitive};
use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::rng::RngState;
use crate::spatial::{apply_spatial, sample_spatial_params, SpatialParams};
use crate::spectral::{apply_spectral, sample_spectral_params, SpectralParams};

pub const RECIPE_SCHEMA_VERSION: u32 = 1;

/// Where the additive noise realization comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    /// Hex-encoded 256-bit stream key; values are drawn row-major,
    /// channel-interleaved, one standard normal per value.
    Seeded(String),
    /// Explicit per-value noise (already scaled), row-major.
    Realized(Vec<f64>),
}

/// Frozen draw of the additive Gaussian primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveParams {
    pub sigma: f64,
    pub noise: NoiseSource,
}

impl AdditiveParams {
    pub fn seeded(sigma: f64, key: [u8; 32]) -> Self {
        Self {
            sigma,
            noise: NoiseSource::Seeded(hex::encode(key)),
        }
    }

    /// The noise values for an image with `len` scalars.
    pub fn realize(&self, len: usize) -> Result<Vec<f64>> {
        match &self.noise {
            NoiseSource::Seeded(key) => {
                let bytes =
                    hex::decode(key).map_err(|e| invalid!("bad additive noise key: {e}"))?;
                let key: [u8; 32] = bytes
                    .try_into()
                    .map_err(|_| invalid!("additive noise key must be 32 bytes"))?;
                if self.sigma == 0.0 {
                    return Ok(vec![0.0; len]);
                }
                let mut rng = RngState::from_key(key);
                Ok((0..len)
                    .map(|_| self.sigma * rng.standard_normal())
                    .collect())
            }
            NoiseSource::Realized(values) => {
                if values.len() != len {
                    return Err(invalid!(
                        "noise realization has {} values, image has {len}",
                        values.len()
                    ));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Samples `σ ~ U[0, α σ_max]` and a fresh noise key.
pub fn sample_additive_params(
    rng: &mut RngState,
    sigma_max: f64,
    alpha: f64,
) -> Result<AdditiveParams> {
    if !(sigma_max >= 0.0) || !(alpha >= 0.0) {
        return Err(invalid!("additive sigma_max and alpha must be >= 0"));
    }
    let sigma = rng.uniform(0.0, alpha * sigma_max)?;
    Ok(AdditiveParams::seeded(sigma, rng.fork().key()))
}

/// Adds the noise realization and clamps.
pub fn apply_additive(img: &Image, params: &AdditiveParams) -> Result<Image> {
    let noise = params.realize(img.data().len())?;
    let mut out = img.clone();
    for (v, n) in out.data_mut().iter_mut().zip(&noise) {
        *v += n;
    }
    out.clamp_in_place();
    Ok(out)
}

/// One step of a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Step {
    Identity,
    Spectral(SpectralParams),
    Spatial(SpatialParams),
    Color(ColorParams),
    Additive(AdditiveParams),
}

impl Step {
    pub fn primitive(&self) -> Option<Primitive> {
        match self {
            Step::Identity => None,
            Step::Spectral(_) => Some(Primitive::Spectral),
            Step::Spatial(_) => Some(Primitive::Spatial),
            Step::Color(_) => Some(Primitive::Color),
            Step::Additive(_) => Some(Primitive::Additive),
        }
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        match self {
            Step::Identity => Ok(img.clone()),
            Step::Spectral(p) => apply_spectral(img, p),
            Step::Spatial(p) => apply_spatial(img, p),
            Step::Color(p) => apply_color(img, p),
            Step::Additive(p) => apply_additive(img, p),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Step::Identity => Ok(()),
            Step::Spectral(p) => p.validate(),
            Step::Spatial(p) => p.validate(),
            Step::Color(p) => p.validate(),
            Step::Additive(p) => match &p.noise {
                NoiseSource::Seeded(key) if hex::decode(key).map(|k| k.len()) != Ok(32) => {
                    Err(invalid!("additive noise key must be 64 hex digits"))
                }
                _ if !(p.sigma >= 0.0) => Err(invalid!("additive sigma must be >= 0")),
                _ => Ok(()),
            },
        }
        .map_err(|e| Error::Recipe(e.to_string()))
    }
}

/// The complete record of one draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub schema_version: u32,
    /// `width` chains of `depth` steps.
    pub chains: Vec<Vec<Step>>,
    /// Mixing weights; index 0 is the clean image, index `i` chain `i`.
    pub weights: Vec<f64>,
}

impl Recipe {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != RECIPE_SCHEMA_VERSION {
            return Err(Error::Recipe(format!(
                "unsupported recipe schema version {} (expected {RECIPE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.weights.len() != self.chains.len() + 1 {
            return Err(Error::Recipe(format!(
                "{} weights for {} chains; expected one more weight than chains",
                self.weights.len(),
                self.chains.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Recipe(
                "mixing weights must be finite and >= 0".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Recipe(format!(
                "mixing weights sum to {total}, not 1"
            )));
        }
        self.chains.iter().flatten().try_for_each(Step::validate)
    }

    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.chains.iter().flatten()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("recipe serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let recipe: Self = serde_json::from_str(text).map_err(|e| Error::Recipe(e.to_string()))?;
        recipe.validate()?;
        Ok(recipe)
    }
}

fn check_image_fits(cfg: &PrimeConfig, height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::Config(format!(
            "cannot augment an empty {height}x{width} image"
        )));
    }
    let prims = cfg.primitives();
    if prims.contains(&Primitive::Spectral) && cfg.spectral.kernel_size > height.min(width) {
        return Err(Error::Config(format!(
            "spectral kernel {} does not fit a {height}x{width} image",
            cfg.spectral.kernel_size
        )));
    }
    if prims.contains(&Primitive::Spatial) && (height < 2 || width < 2) {
        return Err(Error::Config(format!(
            "spatial warps need at least 2x2 images, got {height}x{width}"
        )));
    }
    Ok(())
}

/// Samples parameters for one primitive with the configured strengths.
pub fn sample_step(rng: &mut RngState, cfg: &PrimeConfig, primitive: Primitive) -> Result<Step> {
    let a = cfg.alpha;
    Ok(match primitive {
        Primitive::Spectral => Step::Spectral(sample_spectral_params(
            rng,
            cfg.spectral.kernel_size,
            cfg.spectral.sigma_max,
            a,
        )?),
        Primitive::Spatial => Step::Spatial(sample_spatial_params(
            rng,
            cfg.spatial.cut_frequency,
            (cfg.spatial.sigma_min, cfg.spatial.sigma_max),
            a,
        )?),
        Primitive::Color => Step::Color(sample_color_params(
            rng,
            cfg.color.max_frequency,
            cfg.color.band_width,
            cfg.color.sigma_max,
            a,
        )?),
        Primitive::Additive => {
            Step::Additive(sample_additive_params(rng, cfg.additive.sigma_max, a)?)
        }
    })
}

/// Picks the primitive for one step: `None` is identity, with every option
/// of `{Id} ∪ primitives` equally likely.
pub fn pick_primitive(step_rng: &mut RngState, primitives: &[Primitive]) -> Option<Primitive> {
    match step_rng.index(primitives.len() + 1) {
        0 => None,
        k => Some(primitives[k - 1]),
    }
}

/// The structural part of a draw: which primitive every step uses and the
/// mixing weights, without the primitive parameters. It consumes the same
/// streams as [`sample_recipe`], so both agree for a given state.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub chains: Vec<Vec<Option<Primitive>>>,
    pub weights: Vec<f64>,
}

pub fn sample_plan(rng: &RngState, cfg: &PrimeConfig) -> Result<Plan> {
    cfg.validate()?;
    let prims = cfg.primitives();
    let chains = (1..=cfg.width as u64)
        .map(|i| {
            let chain_rng = rng.child(i);
            (1..=cfg.depth as u64)
                .map(|j| pick_primitive(&mut chain_rng.child(j), &prims))
                .collect()
        })
        .collect();
    let weights = rng.child(0).dirichlet_uniform(cfg.width + 1)?;
    Ok(Plan { chains, weights })
}

/// Draws a recipe for an image of the given size.
pub fn sample_recipe(
    rng: &RngState,
    cfg: &PrimeConfig,
    height: usize,
    width: usize,
) -> Result<Recipe> {
    cfg.validate()?;
    check_image_fits(cfg, height, width)?;
    let prims = cfg.primitives();
    let mut chains = Vec::with_capacity(cfg.width);
    for i in 1..=cfg.width as u64 {
        let chain_rng = rng.child(i);
        let mut steps = Vec::with_capacity(cfg.depth);
        for j in 1..=cfg.depth as u64 {
            let mut step_rng = chain_rng.child(j);
            let step = match pick_primitive(&mut step_rng, &prims) {
                None => Step::Identity,
                Some(p) => sample_step(&mut step_rng, cfg, p)?,
            };
            steps.push(step);
        }
        chains.push(steps);
    }
    let weights = rng.child(0).dirichlet_uniform(cfg.width + 1)?;
    Ok(Recipe {
        schema_version: RECIPE_SCHEMA_VERSION,
        chains,
        weights,
    })
}

/// Runs every chain from the clean image.
pub fn chain_outputs(img: &Image, recipe: &Recipe) -> Result<Vec<Image>> {
    recipe.validate()?;
    recipe
        .chains
        .iter()
        .map(|chain| {
            chain
                .iter()
                .try_fold(img.clone(), |x, step| step.apply(&x))
                .map_err(|e| match e {
                    Error::InvalidParameter(msg) => Error::Recipe(msg),
                    other => other,
                })
        })
        .collect()
}

/// Convex combination of the clean image and the chain outputs, computed as
/// `x₀ + Σ_{i≥1} λᵢ (xᵢ - x₀)` so that chains equal to the clean image
/// contribute exactly nothing. Not clamped.
pub fn mix(clean: &Image, chains: &[Image], weights: &[f64]) -> Result<Image> {
    if weights.len() != chains.len() + 1 {
        return Err(invalid!(
            "{} weights for {} chains",
            weights.len(),
            chains.len()
        ));
    }
    let mut out = clean.clone();
    for (chain, &w) in chains.iter().zip(&weights[1..]) {
        if !chain.same_shape(clean) {
            return Err(invalid!("chain output shape differs from the clean image"));
        }
        if w == 0.0 {
            continue;
        }
        for ((o, &x), &c) in out
            .data_mut()
            .iter_mut()
            .zip(chain.data())
            .zip(clean.data())
        {
            *o += w * (x - c);
        }
    }
    Ok(out)
}

/// Deterministically replays a recipe.
pub fn apply_recipe(img: &Image, recipe: &Recipe) -> Result<Image> {
    let chains = chain_outputs(img, recipe)?;
    let mut out = mix(img, &chains, &recipe.weights)?;
    out.clamp_in_place();
    Ok(out)
}

/// Samples a recipe for `img` and applies it.
pub fn prime_augment(img: &Image, cfg: &PrimeConfig, rng: &RngState) -> Result<(Image, Recipe)> {
    let recipe = sample_recipe(rng, cfg, img.height(), img.width())?;
    let out = apply_recipe(img, &recipe)?;
    Ok((out, recipe))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(seed: u64, h: usize, w: usize) -> Image {
        let mut rng = RngState::derive(seed, &[999]);
        Image::from_fn(h, w, |_, _, _| rng.uniform(0.0, 1.0).unwrap())
    }

    #[test]
    fn default_shape_of_recipe() {
        let cfg = PrimeConfig::cifar();
        let recipe = sample_recipe(&RngState::derive(1, &[0, 1]), &cfg, 32, 32).unwrap();
        assert_eq!(recipe.chains.len(), 3);
        assert!(recipe.chains.iter().all(|c| c.len() == 3));
        assert_eq!(recipe.weights.len(), 4);
        recipe.validate().unwrap();
    }

    #[test]
    fn identity_only_config() {
        let mut cfg = PrimeConfig::cifar();
        cfg.enabled.clear();
        cfg.identity_only = true;
        let img = random_image(2, 8, 8);
        let (out, recipe) = prime_augment(&img, &cfg, &RngState::derive(2, &[])).unwrap();
        assert!(recipe.steps().all(|s| *s == Step::Identity));
        assert_eq!(out, img);
    }

    #[test]
    fn zero_alpha_is_identity() {
        let mut cfg = PrimeConfig::cifar();
        cfg.alpha = 0.0;
        cfg.enabled = Primitive::ALL.to_vec();
        for seed in 0..10 {
            let img = random_image(seed, 16, 16);
            let (out, _) = prime_augment(&img, &cfg, &RngState::derive(seed, &[])).unwrap();
            assert_eq!(out, img);
        }
    }

    #[test]
    fn clean_weight_one_returns_input() {
        let cfg = PrimeConfig::cifar();
        let img = random_image(3, 16, 16);
        let mut recipe = sample_recipe(&RngState::derive(3, &[]), &cfg, 16, 16).unwrap();
        recipe.weights = vec![1.0, 0.0, 0.0, 0.0];
        assert_eq!(apply_recipe(&img, &recipe).unwrap(), img);
    }

    #[test]
    fn constant_mix() {
        let clean = Image::filled(4, 4, 0.2);
        let chain = Image::filled(4, 4, 0.9);
        let out = mix(&clean, &[chain], &[0.3, 0.7]).unwrap();
        let expected = 0.3 * 0.2 + 0.7 * 0.9;
        assert!(out.data().iter().all(|v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn replay_and_determinism() {
        let mut cfg = PrimeConfig::cifar();
        cfg.enabled = Primitive::ALL.to_vec();
        let img = random_image(4, 32, 32);
        let rng = RngState::derive(4, &[1, 2]);
        let (a, ra) = prime_augment(&img, &cfg, &rng).unwrap();
        let (b, rb) = prime_augment(&img, &cfg, &rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(apply_recipe(&img, &ra).unwrap(), a);
        let parsed = Recipe::from_json(&ra.to_json()).unwrap();
        assert_eq!(parsed, ra);
        assert_eq!(apply_recipe(&img, &parsed).unwrap(), a);
    }

    #[test]
    fn mixed_output_is_convex() {
        let cfg = PrimeConfig::cifar();
        let img = random_image(5, 16, 16);
        let recipe = sample_recipe(&RngState::derive(5, &[]), &cfg, 16, 16).unwrap();
        let chains = chain_outputs(&img, &recipe).unwrap();
        let mixed = mix(&img, &chains, &recipe.weights).unwrap();
        for (i, &v) in mixed.data().iter().enumerate() {
            let vals = std::iter::once(img.data()[i]).chain(chains.iter().map(|c| c.data()[i]));
            let (lo, hi) = vals.fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn additive_noise() {
        let img = Image::filled(64, 64, 0.5);
        let zero = AdditiveParams::seeded(0.0, [7; 32]);
        assert_eq!(apply_additive(&img, &zero).unwrap(), img);

        let params = AdditiveParams::seeded(0.1, [9; 32]);
        let out = apply_additive(&img, &params).unwrap();
        let n = out.data().len() as f64;
        let mean = out.data().iter().sum::<f64>() / n;
        let var = out.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / 0.01 - 1.0).abs() < 0.1, "var {var}");

        let mut rng = RngState::from_key([9; 32]);
        for (o, x) in out.data().iter().zip(img.data()) {
            assert_eq!(*o, (x + 0.1 * rng.standard_normal()).clamp(0.0, 1.0));
        }

        let short = AdditiveParams {
            sigma: 0.1,
            noise: NoiseSource::Realized(vec![0.0; 5]),
        };
        assert!(apply_additive(&img, &short).is_err());
    }

    #[test]
    fn malformed_recipes_rejected() {
        let cfg = PrimeConfig::cifar();
        let recipe = sample_recipe(&RngState::derive(6, &[]), &cfg, 16, 16).unwrap();
        let mut bad = recipe.clone();
        bad.weights.pop();
        assert!(matches!(bad.validate(), Err(Error::Recipe(_))));
        let mut bad = recipe.clone();
        bad.weights = vec![0.5, 0.5, 0.5, -0.5];
        assert!(bad.validate().is_err());
        let mut bad = recipe;
        bad.schema_version = 99;
        assert!(Recipe::from_json(&bad.to_json()).is_err());
        assert!(Recipe::from_json(
            r#"{"schema_version":1,"chains":[[{"kind":"warp"}]],"weights":[0.5,0.5]}"#
        )
        .is_err());
    }

    #[test]
    fn plan_agrees_with_recipe() {
        let mut cfg = PrimeConfig::cifar();
        cfg.enabled = Primitive::ALL.to_vec();
        let rng = RngState::derive(8, &[4]);
        let plan = sample_plan(&rng, &cfg).unwrap();
        let recipe = sample_recipe(&rng, &cfg, 16, 16).unwrap();
        assert_eq!(plan.weights, recipe.weights);
        let kinds: Vec<Vec<Option<Primitive>>> = recipe
            .chains
            .iter()
            .map(|c| c.iter().map(Step::primitive).collect())
            .collect();
        assert_eq!(plan.chains, kinds);
    }

    #[test]
    fn step_choice_is_uniform() {
        let cfg = PrimeConfig::cifar();
        let draws = 100_000 / 9 + 1;
        let mut counts = [0usize; 4];
        let mut steps = 0;
        for t in 0..draws {
            let plan = sample_plan(&RngState::derive(9, &[t as u64]), &cfg).unwrap();
            for choice in plan.chains.iter().flatten() {
                let slot = match choice {
                    None => 0,
                    Some(Primitive::Spectral) => 1,
                    Some(Primitive::Spatial) => 2,
                    Some(_) => 3,
                };
                counts[slot] += 1;
                steps += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / steps as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn oversized_kernel_is_config_error() {
        let mut cfg = PrimeConfig::cifar();
        cfg.spectral.kernel_size = 9;
        assert!(matches!(
            sample_recipe(&RngState::derive(0, &[]), &cfg, 8, 8),
            Err(Error::Config(_))
        ));
    }
}
