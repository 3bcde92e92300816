//! Random spectral transform: convolution with `δ + ω'`, where `ω'` is a
//! square FIR filter with i.i.d. Gaussian taps.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::{Image, CHANNELS};
use crate::rng::RngState;

/// Frozen draw of the spectral primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    /// Odd side length of the filter.
    pub kernel_size: usize,
    /// Standard deviation the taps were drawn with.
    pub sigma: f64,
    /// Row-major `kernel_size²` taps of `ω'` (without the identity tap).
    pub coefficients: Vec<f64>,
}

impl SpectralParams {
    pub fn identity(kernel_size: usize) -> Result<Self> {
        check_kernel_size(kernel_size)?;
        Ok(Self {
            kernel_size,
            sigma: 0.0,
            coefficients: vec![0.0; kernel_size * kernel_size],
        })
    }

    /// Draws taps with a fixed strength.
    pub fn sample_with_sigma(rng: &mut RngState, kernel_size: usize, sigma: f64) -> Result<Self> {
        check_kernel_size(kernel_size)?;
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid!(
                "spectral sigma must be finite and >= 0, got {sigma}"
            ));
        }
        let coefficients = (0..kernel_size * kernel_size)
            .map(|_| {
                if sigma == 0.0 {
                    0.0
                } else {
                    sigma * rng.standard_normal()
                }
            })
            .collect();
        Ok(Self {
            kernel_size,
            sigma,
            coefficients,
        })
    }

    /// Squared L2 norm of `ω'`.
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    pub fn validate(&self) -> Result<()> {
        check_kernel_size(self.kernel_size)?;
        if self.coefficients.len() != self.kernel_size * self.kernel_size {
            return Err(invalid!(
                "spectral filter has {} taps, expected {}",
                self.coefficients.len(),
                self.kernel_size * self.kernel_size
            ));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid!("spectral filter has non-finite taps"));
        }
        Ok(())
    }

    /// Full filter `δ + ω'`, row-major.
    pub fn filter(&self) -> Vec<f64> {
        let mut taps = self.coefficients.clone();
        let center = self.kernel_size / 2;
        taps[center * self.kernel_size + center] += 1.0;
        taps
    }
}

fn check_kernel_size(kernel_size: usize) -> Result<()> {
    if kernel_size == 0 || kernel_size.is_multiple_of(2) {
        return Err(invalid!(
            "spectral kernel size must be odd and positive, got {kernel_size}"
        ));
    }
    Ok(())
}

/// Samples `σ ~ U[0, α σ_max]` and then `K²` taps from `N(0, σ²)`.
pub fn sample_spectral_params(
    rng: &mut RngState,
    kernel_size: usize,
    sigma_max: f64,
    alpha: f64,
) -> Result<SpectralParams> {
    check_kernel_size(kernel_size)?;
    if !(sigma_max >= 0.0) || !(alpha >= 0.0) {
        return Err(invalid!("spectral sigma_max and alpha must be >= 0"));
    }
    let sigma = rng.uniform(0.0, alpha * sigma_max)?;
    SpectralParams::sample_with_sigma(rng, kernel_size, sigma)
}

/// Mirror index without repeating the edge sample (`-1 → 1`, `n → n - 2`).
#[inline]
fn reflect(idx: isize, len: usize) -> usize {
    let last = len as isize - 1;
    let i = if idx < 0 {
        -idx
    } else if idx > last {
        2 * last - idx
    } else {
        idx
    };
    i as usize
}

/// Same-size convolution of every channel with `δ + ω'`, reflect padding,
/// then clamping to [0, 1].
pub fn apply_spectral(img: &Image, params: &SpectralParams) -> Result<Image> {
    params.validate()?;
    let (h, w) = (img.height(), img.width());
    let k = params.kernel_size;
    if img.is_empty() {
        return Err(invalid!("cannot filter an empty image"));
    }
    if k > h.min(w) {
        return Err(invalid!("kernel of size {k} does not fit a {h}x{w} image"));
    }
    let half = k / 2;
    let taps = params.filter();

    // Reflect-padded copy, (h + 2 half) x (w + 2 half) x 3.
    let pw = w + 2 * half;
    let ph = h + 2 * half;
    let src = img.data();
    let mut padded = vec![0.0; ph * pw * CHANNELS];
    for pr in 0..ph {
        let r = reflect(pr as isize - half as isize, h);
        for pc in 0..pw {
            let c = reflect(pc as isize - half as isize, w);
            let s = (r * w + c) * CHANNELS;
            let d = (pr * pw + pc) * CHANNELS;
            padded[d..d + CHANNELS].copy_from_slice(&src[s..s + CHANNELS]);
        }
    }

    // out(p, q) = Σ_ab taps(a, b) · x(p + half - a, q + half - b); in padded
    // coordinates the source sits at (p + 2 half - a, q + 2 half - b).
    let mut out = vec![0.0; h * w * CHANNELS];
    let row_len = w * CHANNELS;
    for p in 0..h {
        let dst = &mut out[p * row_len..(p + 1) * row_len];
        for a in 0..k {
            let pr = p + 2 * half - a;
            for b in 0..k {
                let tap = taps[a * k + b];
                if tap == 0.0 {
                    continue;
                }
                let start = (pr * pw + 2 * half - b) * CHANNELS;
                let src_row = &padded[start..start + row_len];
                for (o, s) in dst.iter_mut().zip(src_row) {
                    *o += tap * s;
                }
            }
        }
    }
    let mut out = Image::new(h, w, out)?;
    out.clamp_in_place();
    Ok(out)
}
