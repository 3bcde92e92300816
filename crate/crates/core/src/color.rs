//! Random per-channel color curves `v ↦ v + Σ_n β_n sin(π n v)` over a band
//! of `Δ` consecutive frequencies.
//!
//! The curve is tabulated on a uniform grid together with its exact
//! derivative and evaluated with cubic Hermite interpolation. The grid has
//! at most [`LUT_NODES`] points and is coarsened when the fourth-derivative
//! error bound allows it. Every basis function vanishes at 0 and 1, so those
//! two values are fixed points of every curve and of the table.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::{Image, CHANNELS};
use crate::rng::RngState;

/// Largest number of table nodes per channel.
pub const LUT_NODES: usize = 4096;

/// Target for the Hermite error bound `h⁴ max|f''''| / 384`.
const LUT_ERROR_BOUND: f64 = 1e-6;

/// Interval counts dividing `LUT_NODES - 1 = 4095`, so every coarser grid
/// reuses the phase table of the finest one.
const LUT_INTERVALS: [usize; 13] = [
    63, 65, 91, 105, 117, 195, 273, 315, 455, 585, 819, 1365, 4095,
];

/// Frozen draw of the color primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorParams {
    pub max_frequency: u32,
    pub band_width: u32,
    pub band_start: u32,
    pub sigma: f64,
    /// One RGB triple per frequency `band_start..band_start + band_width`.
    pub coefficients: Vec<[f64; 3]>,
}

fn check_band(max_frequency: u32, band_width: u32) -> Result<()> {
    if band_width == 0 || band_width > max_frequency + 1 {
        return Err(invalid!(
            "color band width must be in 1..={} for K={max_frequency}, got {band_width}",
            max_frequency + 1
        ));
    }
    Ok(())
}

impl ColorParams {
    pub fn identity(max_frequency: u32, band_width: u32) -> Result<Self> {
        check_band(max_frequency, band_width)?;
        Ok(Self {
            max_frequency,
            band_width,
            band_start: 0,
            sigma: 0.0,
            coefficients: vec![[0.0; 3]; band_width as usize],
        })
    }

    /// Draws the band placement and coefficients with a fixed strength.
    pub fn sample_with_sigma(
        rng: &mut RngState,
        max_frequency: u32,
        band_width: u32,
        sigma: f64,
    ) -> Result<Self> {
        check_band(max_frequency, band_width)?;
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid!("color sigma must be finite and >= 0, got {sigma}"));
        }
        let placements = (max_frequency + 2 - band_width) as usize;
        let band_start = rng.index(placements) as u32;
        let coefficients = (0..band_width)
            .map(|_| {
                if sigma == 0.0 {
                    [0.0; 3]
                } else {
                    [
                        sigma * rng.standard_normal(),
                        sigma * rng.standard_normal(),
                        sigma * rng.standard_normal(),
                    ]
                }
            })
            .collect();
        Ok(Self {
            max_frequency,
            band_width,
            band_start,
            sigma,
            coefficients,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_band(self.max_frequency, self.band_width)?;
        if self.band_start + self.band_width - 1 > self.max_frequency {
            return Err(invalid!(
                "color band {}..{} exceeds K={}",
                self.band_start,
                self.band_start + self.band_width,
                self.max_frequency
            ));
        }
        if self.coefficients.len() != self.band_width as usize {
            return Err(invalid!(
                "color params carry {} coefficient triples, expected {}",
                self.coefficients.len(),
                self.band_width
            ));
        }
        if self.coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid!("color params contain non-finite coefficients"));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> impl Iterator<Item = u32> {
        self.band_start..self.band_start + self.band_width
    }

    pub fn is_identity(&self) -> bool {
        self.coefficients.iter().flatten().all(|&c| c == 0.0)
    }

    /// Direct evaluation of the curve for channel `ch`.
    pub fn map_exact(&self, value: f64, ch: usize) -> f64 {
        value
            + self
                .frequencies()
                .zip(&self.coefficients)
                .map(|(n, beta)| beta[ch] * (PI * f64::from(n) * value).sin())
                .sum::<f64>()
    }
}

/// Samples `n₀ ~ U{0, ..., K - Δ + 1}`, `σ ~ U[0, α σ_max]` and the band
/// coefficients from `N(0, σ² I₃)`.
pub fn sample_color_params(
    rng: &mut RngState,
    max_frequency: u32,
    band_width: u32,
    sigma_max: f64,
    alpha: f64,
) -> Result<ColorParams> {
    check_band(max_frequency, band_width)?;
    if !(sigma_max >= 0.0) || !(alpha >= 0.0) {
        return Err(invalid!("color sigma_max and alpha must be >= 0"));
    }
    let sigma = rng.uniform(0.0, alpha * sigma_max)?;
    ColorParams::sample_with_sigma(rng, max_frequency, band_width, sigma)
}

/// Tabulated curves for the three channels.
#[derive(Clone, Debug)]
pub struct ColorLut {
    intervals: usize,
    /// Per channel, the Hermite cubic of interval `i` in power form
    /// `[a, b, c, d]` at `4 i`, plus a constant sentinel piece for `v = 1`.
    pieces: [Vec<f64>; CHANNELS],
}

/// `sin` and `cos` of `π m / (LUT_NODES - 1)` for `m ∈ 0..2 (LUT_NODES - 1)`.
/// Node `k` sits at `v = k / (LUT_NODES - 1)`, so `π n v` reduces to entry
/// `n k mod 2 (LUT_NODES - 1)` with no rounding in the argument.
fn node_phases() -> &'static (Vec<f64>, Vec<f64>) {
    static PHASES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    PHASES.get_or_init(|| {
        let intervals = LUT_NODES - 1;
        (0..2 * intervals)
            .map(|m| {
                if m == 0 {
                    (0.0, 1.0)
                } else if m == intervals {
                    (0.0, -1.0)
                } else {
                    (PI * m as f64 / intervals as f64).sin_cos()
                }
            })
            .unzip()
    })
}

/// Coarsest grid whose Hermite error bound meets [`LUT_ERROR_BOUND`], capped
/// at `LUT_NODES - 1` intervals.
fn interval_count(params: &ColorParams) -> usize {
    let fourth: f64 = params
        .frequencies()
        .zip(&params.coefficients)
        .map(|(n, beta)| {
            let largest = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
            largest * (PI * f64::from(n)).powi(4)
        })
        .sum();
    let needed = (fourth / (384.0 * LUT_ERROR_BOUND)).powf(0.25);
    LUT_INTERVALS
        .into_iter()
        .find(|&m| m as f64 >= needed)
        .unwrap_or(LUT_NODES - 1)
}

impl ColorLut {
    pub fn new(params: &ColorParams) -> Result<Self> {
        params.validate()?;
        let (sines, cosines) = node_phases();
        let period = 2 * (LUT_NODES - 1);
        let intervals = interval_count(params);
        let stride = (LUT_NODES - 1) / intervals;
        let nodes = intervals + 1;
        let last = intervals as f64;
        let band: Vec<(f64, [f64; 3])> = params
            .frequencies()
            .zip(&params.coefficients)
            .map(|(n, beta)| (PI * f64::from(n), *beta))
            .collect();
        let mut values: [Vec<f64>; CHANNELS] = std::array::from_fn(|_| vec![0.0; nodes]);
        let mut slopes: [Vec<f64>; CHANNELS] = std::array::from_fn(|_| vec![1.0; nodes]);
        for node in 0..nodes {
            let step = node * stride;
            let mut phase = params.band_start as usize * step % period;
            let mut sum = [0.0; CHANNELS];
            let mut der = [0.0; CHANNELS];
            for &(w, beta) in &band {
                let (s, c) = (sines[phase], cosines[phase]);
                for ch in 0..CHANNELS {
                    sum[ch] += beta[ch] * s;
                    der[ch] += beta[ch] * w * c;
                }
                phase += step;
                if phase >= period {
                    phase -= period;
                }
            }
            let v = node as f64 / last;
            for ch in 0..CHANNELS {
                values[ch][node] = v + sum[ch];
                slopes[ch][node] = 1.0 + der[ch];
            }
        }
        let h = 1.0 / last;
        let pieces = std::array::from_fn(|ch| {
            let (y, s) = (&values[ch], &slopes[ch]);
            let mut out = Vec::with_capacity(4 * nodes);
            for i in 0..intervals {
                let (y0, y1, m0, m1) = (y[i], y[i + 1], h * s[i], h * s[i + 1]);
                out.extend_from_slice(&[
                    y0,
                    m0,
                    3.0 * (y1 - y0) - 2.0 * m0 - m1,
                    2.0 * (y0 - y1) + m0 + m1,
                ]);
            }
            out.extend_from_slice(&[y[intervals], 0.0, 0.0, 0.0]);
            out
        });
        Ok(Self { intervals, pieces })
    }

    /// Number of grid intervals in use.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Evaluates channel `ch` at `value ∈ [0, 1]`. Grid nodes, and so 0 and
    /// 1, evaluate to their tabulated values exactly.
    #[inline]
    pub fn map(&self, value: f64, ch: usize) -> f64 {
        let pos = value.clamp(0.0, 1.0) * self.intervals as f64;
        let i = pos as usize;
        let t = pos - i as f64;
        let piece = &self.pieces[ch][4 * i..4 * i + 4];
        ((piece[3] * t + piece[2]) * t + piece[1]) * t + piece[0]
    }
}

/// Applies the per-channel curves to every pixel, then clamps to [0, 1].
pub fn apply_color(img: &Image, params: &ColorParams) -> Result<Image> {
    params.validate()?;
    if params.is_identity() {
        return Ok(img.clamped());
    }
    let lut = ColorLut::new(params)?;
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(CHANNELS) {
        for (ch, v) in px.iter_mut().enumerate() {
            *v = lut.map(*v, ch).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(value: f64, params: &ColorParams, ch: usize) -> f64 {
        let mut out = value;
        for (t, n) in (params.band_start..params.band_start + params.band_width).enumerate() {
            out += params.coefficients[t][ch] * (PI * n as f64 * value).sin();
        }
        out.clamp(0.0, 1.0)
    }

    #[test]
    fn band_width_bounds() {
        let mut rng = RngState::derive(0, &[]);
        assert!(sample_color_params(&mut rng, 10, 0, 0.01, 1.0).is_err());
        assert!(sample_color_params(&mut rng, 10, 12, 0.01, 1.0).is_err());
        let full = sample_color_params(&mut rng, 10, 11, 0.01, 1.0).unwrap();
        assert_eq!(full.band_start, 0);
        assert_eq!(
            full.frequencies().collect::<Vec<_>>(),
            (0..=10).collect::<Vec<_>>()
        );
    }

    #[test]
    fn zero_strength_is_identity() {
        let mut rng = RngState::derive(1, &[]);
        let params = sample_color_params(&mut rng, 10, 11, 0.0, 1.0).unwrap();
        assert!(params.is_identity());
        let img = Image::from_fn(4, 5, |_, _, _| rng.uniform(0.0, 1.0).unwrap());
        assert_eq!(apply_color(&img, &params).unwrap(), img);
    }

    #[test]
    fn single_frequency_analytic() {
        let params = ColorParams {
            max_frequency: 1,
            band_width: 1,
            band_start: 1,
            sigma: 0.1,
            coefficients: vec![[0.1, 0.0, 0.0]],
        };
        let img = Image::filled(1, 1, 0.5);
        let out = apply_color(&img, &params).unwrap();
        assert!((out.get(0, 0, 0) - 0.6).abs() < 1e-6);
        assert_eq!(out.get(0, 0, 1), 0.5);
        assert_eq!(out.get(0, 0, 2), 0.5);
    }

    #[test]
    fn endpoints_are_fixed() {
        let mut rng = RngState::derive(2, &[]);
        for _ in 0..200 {
            let params = ColorParams::sample_with_sigma(&mut rng, 500, 20, 0.5).unwrap();
            let img = Image::new(1, 2, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
            assert_eq!(apply_color(&img, &params).unwrap(), img);
        }
    }

    #[test]
    fn table_matches_direct_sum() {
        let mut rng = RngState::derive(3, &[]);
        for (k, delta, sigma) in [(10, 11, 0.01), (500, 20, 0.05), (40, 8, 0.2)] {
            for _ in 0..20 {
                let params = ColorParams::sample_with_sigma(&mut rng, k, delta, sigma).unwrap();
                let lut = ColorLut::new(&params).unwrap();
                for _ in 0..500 {
                    let v = rng.uniform(0.0, 1.0).unwrap();
                    for ch in 0..3 {
                        let exact = params.map_exact(v, ch);
                        assert!(
                            (lut.map(v, ch) - exact).abs() < 1e-4,
                            "K={k}: {} vs {exact}",
                            lut.map(v, ch)
                        );
                        assert!((exact.clamp(0.0, 1.0) - naive(v, &params, ch)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn grid_coarsens_for_smooth_curves() {
        let mut rng = RngState::derive(6, &[]);
        let smooth = ColorParams::sample_with_sigma(&mut rng, 10, 11, 0.01).unwrap();
        assert!(ColorLut::new(&smooth).unwrap().intervals() < 500);
        let rough = ColorParams::sample_with_sigma(&mut rng, 500, 20, 0.05).unwrap();
        assert_eq!(ColorLut::new(&rough).unwrap().intervals(), LUT_NODES - 1);
        assert_eq!(
            ColorLut::new(&ColorParams::identity(10, 11).unwrap())
                .unwrap()
                .intervals(),
            63
        );
    }

    #[test]
    fn pixels_do_not_interact() {
        let mut rng = RngState::derive(4, &[]);
        let params = ColorParams::sample_with_sigma(&mut rng, 10, 11, 0.05).unwrap();
        let img = Image::from_fn(6, 6, |_, _, _| rng.uniform(0.0, 1.0).unwrap());
        let mut poked = img.clone();
        poked.set(3, 2, 1, 0.123);
        let a = apply_color(&img, &params).unwrap();
        let b = apply_color(&poked, &params).unwrap();
        for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
            if i != img.index(3, 2, 1) {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn band_start_covers_range() {
        let mut rng = RngState::derive(5, &[]);
        let mut seen = vec![0usize; 482];
        for _ in 0..10_000 {
            let p = sample_color_params(&mut rng, 500, 20, 0.05, 1.0).unwrap();
            assert!(p.band_start <= 481);
            seen[p.band_start as usize] += 1;
        }
        assert!(seen.iter().filter(|&&c| c > 0).count() > 470);
    }
}
