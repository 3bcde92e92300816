//! Monte-Carlo self-checks of the sampling laws.
//!
//! Every check draws from its own label subtree of a fixed seed, compares a
//! statistic against its analytic value and passes when the deviation is
//! within four standard errors (or an exact tolerance for properties that
//! hold by construction). With correct samplers each check fails with
//! probability well under 1%.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::augment::sample_plan;
use crate::color::{apply_color, ColorParams};
use crate::config::PrimeConfig;
use crate::error::{invalid, Result};
use crate::image::Image;
use crate::rng::RngState;
use crate::spatial::{displacement_field, sample_spatial_params, SpatialParams};
use crate::spectral::SpectralParams;

pub const MIN_TRIALS: usize = 1000;
pub const DEFAULT_VALIDATION_SEED: u64 = 0x5eed_a11d;

/// Deviation allowed for statistical checks, in standard errors.
const SIGMAS: f64 = 4.0;
/// Significance level of the band placement goodness-of-fit test.
const CHI_SQUARE_LEVEL: f64 = 1e-3;
/// Frequency pairs whose coefficient variance is probed.
const BETA_PROBES: [(u32, u32); 10] = [
    (1, 1),
    (1, 2),
    (2, 1),
    (2, 2),
    (1, 3),
    (3, 4),
    (4, 3),
    (2, 5),
    (5, 5),
    (3, 7),
];
/// Cut frequency used to draw the probes; the law of each probed
/// coefficient does not depend on it.
const PROBE_CUT: u32 = 8;
const BORDER_FIELDS: usize = 100;
const BORDER_SIZES: [usize; 2] = [32, 224];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub samples: usize,
    pub statistic: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `|statistic - expected| <= tolerance`.
    fn within(
        name: impl Into<String>,
        samples: usize,
        statistic: f64,
        expected: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            samples,
            statistic,
            expected,
            tolerance,
            passed: (statistic - expected).abs() <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<34} {:>9} {:>14} {:>14} {:>12}  result\n",
            "check", "samples", "statistic", "expected", "tolerance"
        );
        for c in &self.checks {
            out.push_str(&format!(
                "{:<34} {:>9} {:>14.6e} {:>14.6e} {:>12.3e}  {}\n",
                c.name,
                c.samples,
                c.statistic,
                c.expected,
                c.tolerance,
                if c.passed { "pass" } else { "FAIL" }
            ));
        }
        out.push_str(if self.passed() {
            "all checks passed\n"
        } else {
            "some checks FAILED\n"
        });
        out
    }
}

/// Test hooks that deliberately break a sampler.
#[derive(Clone, Debug)]
pub struct ValidationHooks {
    /// Multiplies the variance of every spatial coefficient.
    pub beta_variance_scale: f64,
}

impl Default for ValidationHooks {
    fn default() -> Self {
        Self {
            beta_variance_scale: 1.0,
        }
    }
}

/// Runs every check with the default seed.
pub fn validate_statistics(cfg: &PrimeConfig, trials: usize) -> Result<ValidationReport> {
    validate_statistics_with(
        cfg,
        trials,
        DEFAULT_VALIDATION_SEED,
        &ValidationHooks::default(),
    )
}

pub fn validate_statistics_with(
    cfg: &PrimeConfig,
    trials: usize,
    seed: u64,
    hooks: &ValidationHooks,
) -> Result<ValidationReport> {
    if trials < MIN_TRIALS {
        return Err(invalid!(
            "validation needs at least {MIN_TRIALS} trials, got {trials}"
        ));
    }
    cfg.validate()?;
    let root = RngState::derive(seed, &[]);
    let mut checks = Vec::new();
    checks.push(spectral_equipartition(cfg, trials, root.child(1))?);
    checks.extend(spatial_coefficient_law(cfg, trials, root.child(2), hooks)?);
    checks.push(border_fixing(cfg, trials, root.child(3))?);
    checks.push(color_endpoints(cfg, trials, root.child(4))?);
    checks.push(color_coefficient_variance(cfg, trials, root.child(5))?);
    checks.push(color_band_placement(cfg, trials, root.child(6))?);
    checks.extend(mixing_laws(cfg, trials, root.child(7))?);
    checks.extend(rng_moments(trials, root.child(8))?);
    Ok(ValidationReport {
        trials,
        seed,
        checks,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean of `‖ω'‖²` at fixed `σ = α σ_max` against `K² σ²`.
fn spectral_equipartition(cfg: &PrimeConfig, trials: usize, rng: RngState) -> Result<Check> {
    let k = cfg.spectral.kernel_size;
    let sigma = cfg.alpha * cfg.spectral.sigma_max;
    let energies = (0..trials as u64)
        .map(|t| SpectralParams::sample_with_sigma(&mut rng.child(t), k, sigma).map(|p| p.energy()))
        .collect::<Result<Vec<_>>>()?;
    let expected = (k * k) as f64 * sigma * sigma;
    // Var ‖ω'‖² = 2 K² σ⁴.
    let se = expected * (2.0 / ((k * k) as f64 * trials as f64)).sqrt();
    Ok(Check::within(
        "spectral_equipartition",
        trials,
        mean(&energies),
        expected,
        SIGMAS * se,
    ))
}

/// `Var β(i, j) · (i² + j²)` against `σ²`, both axes pooled, per probe.
fn spatial_coefficient_law(
    cfg: &PrimeConfig,
    trials: usize,
    rng: RngState,
    hooks: &ValidationHooks,
) -> Result<Vec<Check>> {
    let sigma = cfg.alpha * cfg.spatial.sigma_max;
    let mut draws = vec![Vec::with_capacity(2 * trials); BETA_PROBES.len()];
    for t in 0..trials as u64 {
        let params = SpatialParams::sample_scaled(
            &mut rng.child(t),
            PROBE_CUT,
            sigma,
            hooks.beta_variance_scale,
        )?;
        for (slot, &(i, j)) in draws.iter_mut().zip(&BETA_PROBES) {
            let radius = f64::from(i * i + j * j);
            for axis in 0..2 {
                let beta = params
                    .coefficient(axis, i, j)
                    .expect("probe lies in the disc");
                slot.push(beta * radius.sqrt());
            }
        }
    }
    let expected = sigma * sigma;
    Ok(draws
        .iter()
        .zip(&BETA_PROBES)
        .map(|(xs, (i, j))| {
            let n = xs.len();
            let se = expected * (2.0 / (n - 1) as f64).sqrt();
            Check::within(
                format!("spatial_beta_law({i},{j})"),
                n,
                sample_variance(xs),
                expected,
                SIGMAS * se,
            )
        })
        .collect())
}

/// Largest border displacement over sampled fields at two image sizes.
fn border_fixing(cfg: &PrimeConfig, trials: usize, rng: RngState) -> Result<Check> {
    let fields = trials.min(BORDER_FIELDS);
    let mut worst = 0.0f64;
    for (s, &size) in BORDER_SIZES.iter().enumerate() {
        for t in 0..fields as u64 {
            let mut r = rng.child(s as u64).child(t);
            let sp = &cfg.spatial;
            let params = sample_spatial_params(
                &mut r,
                sp.cut_frequency,
                (sp.sigma_min, sp.sigma_max),
                cfg.alpha,
            )?;
            worst = worst.max(displacement_field(&params, size, size)?.border_max_abs());
        }
    }
    Ok(Check::within(
        "spatial_border_zero",
        fields * BORDER_SIZES.len(),
        worst,
        0.0,
        1e-12,
    ))
}

/// Black and white pixels through sampled color curves, exact.
fn color_endpoints(cfg: &PrimeConfig, trials: usize, rng: RngState) -> Result<Check> {
    let c = &cfg.color;
    let sigma = cfg.alpha * c.sigma_max;
    let img = Image::new(1, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0])?;
    let mut worst = 0.0f64;
    for t in 0..trials as u64 {
        let params = ColorParams::sample_with_sigma(
            &mut rng.child(t),
            c.max_frequency,
            c.band_width,
            sigma,
        )?;
        let out = apply_color(&img, &params)?;
        for (a, b) in out.data().iter().zip(img.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check::within(
        "color_endpoints_fixed",
        trials,
        worst,
        0.0,
        0.0,
    ))
}

/// Pooled variance of every band coefficient against `σ²`.
fn color_coefficient_variance(cfg: &PrimeConfig, trials: usize, rng: RngState) -> Result<Check> {
    let c = &cfg.color;
    let sigma = cfg.alpha * c.sigma_max;
    let mut xs = Vec::with_capacity(trials * c.band_width as usize * 3);
    for t in 0..trials as u64 {
        let params = ColorParams::sample_with_sigma(
            &mut rng.child(t),
            c.max_frequency,
            c.band_width,
            sigma,
        )?;
        xs.extend(params.coefficients.iter().flatten());
    }
    let expected = sigma * sigma;
    let se = expected * (2.0 / (xs.len() - 1) as f64).sqrt();
    Ok(Check::within(
        "color_beta_variance",
        xs.len(),
        sample_variance(&xs),
        expected,
        SIGMAS * se,
    ))
}

/// Chi-square goodness of fit of the band start against the uniform law on
/// `0..=K-Δ+1`. Adjacent placements are grouped so that every group expects
/// at least five draws.
fn color_band_placement(cfg: &PrimeConfig, trials: usize, rng: RngState) -> Result<Check> {
    let c = &cfg.color;
    let placements = (c.max_frequency + 2 - c.band_width) as usize;
    let mut counts = vec![0usize; placements];
    for t in 0..trials as u64 {
        let params =
            ColorParams::sample_with_sigma(&mut rng.child(t), c.max_frequency, c.band_width, 0.0)?;
        counts[params.band_start as usize] += 1;
    }
    let name = "color_band_start_uniform";
    if placements == 1 {
        return Ok(Check::within(name, trials, 0.0, 0.0, 0.0));
    }
    let group = (5 * placements).div_ceil(trials).max(1);
    let mut chi2 = 0.0;
    let mut groups = 0;
    for chunk in counts.chunks(group) {
        let expected = trials as f64 * chunk.len() as f64 / placements as f64;
        let observed = chunk.iter().sum::<usize>() as f64;
        chi2 += (observed - expected).powi(2) / expected;
        groups += 1;
    }
    let df = (groups - 1) as f64;
    let critical = ChiSquared::new(df)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - CHI_SQUARE_LEVEL);
    Ok(Check {
        name: name.into(),
        samples: trials,
        statistic: chi2,
        expected: df,
        tolerance: critical - df,
        passed: chi2 <= critical,
    })
}

/// Step choice frequencies, all-identity chain frequency, Dirichlet means
/// and the simplex constraint, from `trials` sampled plans.
fn mixing_laws(cfg: &PrimeConfig, trials: usize, rng: RngState) -> Result<Vec<Check>> {
    let prims = cfg.primitives();
    let options = prims.len() + 1;
    let mut choice = vec![0usize; options];
    let mut identity_chains = 0usize;
    let mut weight_sums = vec![0.0; cfg.width + 1];
    let mut simplex_error = 0.0f64;
    for t in 0..trials as u64 {
        let plan = sample_plan(&rng.child(t), cfg)?;
        for chain in &plan.chains {
            for step in chain {
                let k = step.map_or(0, |p| {
                    1 + prims.iter().position(|&q| q == p).expect("enabled")
                });
                choice[k] += 1;
            }
            if chain.iter().all(Option::is_none) {
                identity_chains += 1;
            }
        }
        let total: f64 = plan.weights.iter().sum();
        simplex_error = simplex_error.max((total - 1.0).abs());
        for (s, w) in weight_sums.iter_mut().zip(&plan.weights) {
            if *w < 0.0 {
                simplex_error = f64::INFINITY;
            }
            *s += w;
        }
    }
    let mut checks = Vec::new();
    let steps = trials * cfg.width * cfg.depth;
    let p = 1.0 / options as f64;
    let se = (p * (1.0 - p) / steps as f64).sqrt();
    for (k, &count) in choice.iter().enumerate() {
        let label = if k == 0 {
            "identity"
        } else {
            prims[k - 1].name()
        };
        checks.push(Check::within(
            format!("step_choice({label})"),
            steps,
            count as f64 / steps as f64,
            p,
            SIGMAS * se,
        ));
    }
    let chains = trials * cfg.width;
    let p0 = p.powi(cfg.depth as i32);
    let se = (p0 * (1.0 - p0) / chains as f64).sqrt();
    checks.push(Check::within(
        "identity_chain_frequency",
        chains,
        identity_chains as f64 / chains as f64,
        p0,
        SIGMAS * se,
    ));
    let k = (cfg.width + 1) as f64;
    let se = ((k - 1.0) / (k * k * (k + 1.0)) / trials as f64).sqrt();
    for (i, s) in weight_sums.iter().enumerate() {
        checks.push(Check::within(
            format!("dirichlet_mean({i})"),
            trials,
            s / trials as f64,
            1.0 / k,
            SIGMAS * se,
        ));
    }
    checks.push(Check::within(
        "dirichlet_simplex",
        trials,
        simplex_error,
        0.0,
        1e-9,
    ));
    Ok(checks)
}

/// First two moments of the Gaussian and uniform samplers.
fn rng_moments(trials: usize, rng: RngState) -> Result<Vec<Check>> {
    let n = 10 * trials;
    let mut g = rng.child(0);
    let xs = (0..n)
        .map(|_| g.gaussian(0.0, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let mut u = rng.child(1);
    let us = (0..n)
        .map(|_| u.uniform(0.0, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    Ok(vec![
        Check::within("gaussian_mean", n, mean(&xs), 0.0, SIGMAS / nf.sqrt()),
        Check::within(
            "gaussian_variance",
            n,
            sample_variance(&xs),
            1.0,
            SIGMAS * (2.0 / (nf - 1.0)).sqrt(),
        ),
        Check::within(
            "uniform_mean",
            n,
            mean(&us),
            0.5,
            SIGMAS * (1.0 / 12.0 / nf).sqrt(),
        ),
    ])
}
