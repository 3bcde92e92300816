//! Random smooth warps driven by a band-limited sine-series displacement
//! field, applied by backward bilinear sampling.
//!
//! Each displacement axis is
//! `Σ β(i, j) sin(π i r1) sin(π j r2)` over `i, j ≥ 1` with `i² + j² ≤ K²`
//! and `β(i, j) ~ N(0, σ² / (i² + j²))`. The field vanishes on the image
//! border, so border pixels never move.
//!
//! On a grid with `N + 1` samples per axis the basis `sin(π i p / N)` only
//! depends on `i mod 2N`, and frequencies past `N` fold back onto `1..N`
//! with a sign. The evaluator folds the coefficient disc into a dense
//! `(N1 - 1) × (N2 - 1)` matrix and computes the field as `S1 · C · S2ᵀ`,
//! which is exact on the grid and independent of `K` after folding.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::{Image, CHANNELS};
use crate::rng::RngState;

/// Axis 0 displaces `r1` (rows); axis 1 displaces `r2` (columns).
pub const AXES: usize = 2;

/// Frozen draw of the spatial primitive.
///
/// Coefficients are stored densely in canonical pair order: `i` ascending,
/// then `j` ascending, over the quarter disc `i, j ≥ 1, i² + j² ≤ K²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpatialWire", into = "SpatialWire")]
pub struct SpatialParams {
    pub cut_frequency: u32,
    pub sigma: f64,
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

/// Serialized form: a sparse `(axis, i, j, value)` list.
#[derive(Serialize, Deserialize)]
struct SpatialWire {
    cut_frequency: u32,
    sigma: f64,
    coefficients: Vec<(u8, u32, u32, f64)>,
}

impl From<SpatialParams> for SpatialWire {
    fn from(p: SpatialParams) -> Self {
        let mut coefficients = Vec::with_capacity(p.row.len() + p.col.len());
        for (axis, values) in [(0u8, &p.row), (1u8, &p.col)] {
            for ((i, j), &v) in frequency_pairs(p.cut_frequency).zip(values.iter()) {
                coefficients.push((axis, i, j, v));
            }
        }
        SpatialWire {
            cut_frequency: p.cut_frequency,
            sigma: p.sigma,
            coefficients,
        }
    }
}

impl TryFrom<SpatialWire> for SpatialParams {
    type Error = Error;

    fn try_from(w: SpatialWire) -> Result<Self> {
        let k = w.cut_frequency;
        if k == 0 {
            return Err(Error::Recipe("spatial cut frequency must be >= 1".into()));
        }
        let count = pair_count(k);
        let mut slots: [Vec<Option<f64>>; AXES] = [vec![None; count], vec![None; count]];
        let offsets = row_offsets(k);
        for (axis, i, j, v) in w.coefficients {
            let axis = axis as usize;
            if axis >= AXES
                || i == 0
                || j == 0
                || u64::from(i).pow(2) + u64::from(j).pow(2) > u64::from(k).pow(2)
            {
                return Err(Error::Recipe(format!(
                    "spatial coefficient ({axis}, {i}, {j}) lies outside the K={k} disc"
                )));
            }
            let idx = offsets[i as usize - 1] + j as usize - 1;
            if slots[axis][idx].replace(v).is_some() {
                return Err(Error::Recipe(format!(
                    "duplicate spatial coefficient ({axis}, {i}, {j})"
                )));
            }
        }
        let [row, col] = slots.map(|axis| axis.into_iter().collect::<Option<Vec<f64>>>());
        match (row, col) {
            (Some(row), Some(col)) => Ok(SpatialParams {
                cut_frequency: k,
                sigma: w.sigma,
                row,
                col,
            }),
            _ => Err(Error::Recipe(format!(
                "spatial coefficient list for K={k} is incomplete"
            ))),
        }
    }
}

/// Largest `j ≥ 0` with `i² + j² ≤ k²`.
fn max_column(k: u32, i: u32) -> u32 {
    (u64::from(k) * u64::from(k) - u64::from(i) * u64::from(i)).isqrt() as u32
}

/// Frequency pairs of the quarter disc in canonical order.
pub fn frequency_pairs(k: u32) -> impl Iterator<Item = (u32, u32)> {
    (1..=k).flat_map(move |i| (1..=max_column(k, i)).map(move |j| (i, j)))
}

/// Number of lattice points with `i, j ≥ 1` and `i² + j² ≤ k²`.
pub fn pair_count(k: u32) -> usize {
    (1..=k).map(|i| max_column(k, i) as usize).sum()
}

/// `1 / sqrt(i² + j²)` over the quarter disc in canonical order, cached per `k`.
fn inverse_radii(k: u32) -> Arc<Vec<f64>> {
    static CACHE: TableCache<u32> = OnceLock::new();
    cached(&CACHE, k, || {
        frequency_pairs(k)
            .map(|(i, j)| 1.0 / f64::from(i * i + j * j).sqrt())
            .collect()
    })
}

type TableCache<K> = OnceLock<Mutex<HashMap<K, Arc<Vec<f64>>>>>;

fn cached<K: std::hash::Hash + Eq + Copy>(
    cache: &TableCache<K>,
    key: K,
    build: impl FnOnce() -> Vec<f64>,
) -> Arc<Vec<f64>> {
    let map = cache.get_or_init(Default::default);
    if let Some(hit) = map.lock().expect("table cache poisoned").get(&key) {
        return Arc::clone(hit);
    }
    let table = Arc::new(build());
    map.lock()
        .expect("table cache poisoned")
        .entry(key)
        .or_insert(table)
        .clone()
}

/// Index of the first pair of each row `i` in canonical order.
fn row_offsets(k: u32) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(k as usize);
    let mut acc = 0;
    for i in 1..=k {
        offsets.push(acc);
        acc += max_column(k, i) as usize;
    }
    offsets
}

impl SpatialParams {
    pub fn identity(cut_frequency: u32) -> Self {
        let n = pair_count(cut_frequency);
        Self {
            cut_frequency,
            sigma: 0.0,
            row: vec![0.0; n],
            col: vec![0.0; n],
        }
    }

    /// Draws both axes with a fixed strength.
    pub fn sample_with_sigma(rng: &mut RngState, cut_frequency: u32, sigma: f64) -> Result<Self> {
        Self::sample_scaled(rng, cut_frequency, sigma, 1.0)
    }

    /// As [`Self::sample_with_sigma`] with every coefficient variance
    /// multiplied by `variance_scale`. Exists for fault injection.
    pub(crate) fn sample_scaled(
        rng: &mut RngState,
        cut_frequency: u32,
        sigma: f64,
        variance_scale: f64,
    ) -> Result<Self> {
        if cut_frequency == 0 {
            return Err(invalid!("spatial cut frequency must be >= 1"));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid!(
                "spatial sigma must be finite and >= 0, got {sigma}"
            ));
        }
        let scale = sigma * variance_scale.sqrt();
        let weights = inverse_radii(cut_frequency);
        let draw_axis = |rng: &mut RngState| -> Vec<f64> {
            if scale == 0.0 {
                return vec![0.0; weights.len()];
            }
            weights
                .iter()
                .map(|w| scale * w * rng.standard_normal())
                .collect()
        };
        let row = draw_axis(rng);
        let col = draw_axis(rng);
        Ok(Self {
            cut_frequency,
            sigma,
            row,
            col,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = pair_count(self.cut_frequency);
        if self.cut_frequency == 0 || self.row.len() != n || self.col.len() != n {
            return Err(invalid!(
                "spatial params for K={} need {n} coefficients per axis",
                self.cut_frequency
            ));
        }
        if self.row.iter().chain(&self.col).any(|v| !v.is_finite()) {
            return Err(invalid!("spatial params contain non-finite coefficients"));
        }
        Ok(())
    }

    /// Coefficient of `axis` at frequency `(i, j)`, if the pair is admissible.
    pub fn coefficient(&self, axis: usize, i: u32, j: u32) -> Option<f64> {
        let k = self.cut_frequency;
        if i == 0 || j == 0 || i > k || j > max_column(k, i) {
            return None;
        }
        let idx = row_offsets(k)[i as usize - 1] + j as usize - 1;
        [&self.row, &self.col].get(axis).map(|v| v[idx])
    }
}

/// Samples `σ ~ U[α σ_min, α σ_max]` and then both coefficient axes.
pub fn sample_spatial_params(
    rng: &mut RngState,
    cut_frequency: u32,
    sigma_range: (f64, f64),
    alpha: f64,
) -> Result<SpatialParams> {
    let (lo, hi) = sigma_range;
    if cut_frequency == 0 {
        return Err(invalid!("spatial cut frequency must be >= 1"));
    }
    if !(0.0 <= lo && lo <= hi) || !(alpha >= 0.0) {
        return Err(invalid!("spatial sigma range must satisfy 0 <= min <= max, alpha >= 0; got ({lo}, {hi}), {alpha}"));
    }
    let sigma = rng.uniform(alpha * lo, alpha * hi)?;
    SpatialParams::sample_with_sigma(rng, cut_frequency, sigma)
}

/// Per-pixel displacement in normalized coordinate units.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    pub height: usize,
    pub width: usize,
    /// Displacement of `r1`, row-major `height × width`.
    pub row: Vec<f64>,
    /// Displacement of `r2`, row-major `height × width`.
    pub col: Vec<f64>,
}

impl DisplacementField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            row: vec![0.0; height * width],
            col: vec![0.0; height * width],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.row.iter().chain(&self.col).all(|&v| v == 0.0)
    }

    /// Largest absolute component over the border pixels.
    pub fn border_max_abs(&self) -> f64 {
        let (h, w) = (self.height, self.width);
        let mut worst = 0.0f64;
        for p in 0..h {
            for q in 0..w {
                if p == 0 || q == 0 || p + 1 == h || q + 1 == w {
                    let i = p * w + q;
                    worst = worst.max(self.row[i].abs()).max(self.col[i].abs());
                }
            }
        }
        worst
    }

    /// Largest Euclidean displacement measured in pixels.
    pub fn max_pixel_displacement(&self) -> f64 {
        let sy = (self.height.max(2) - 1) as f64;
        let sx = (self.width.max(2) - 1) as f64;
        self.row
            .iter()
            .zip(&self.col)
            .map(|(dy, dx)| (dy * sy).hypot(dx * sx))
            .fold(0.0, f64::max)
    }
}

/// Where frequency `freq` lands on a grid with `n` intervals: its folded
/// index in `0..n - 1` (frequency `index + 1`) and sign, or `None` when the
/// basis function vanishes at every grid point.
#[inline]
fn fold(freq: u32, n: usize) -> Option<(usize, f64)> {
    let m = freq as usize % (2 * n);
    if m == 0 || m == n {
        None
    } else if m < n {
        Some((m - 1, 1.0))
    } else {
        Some((2 * n - m - 1, -1.0))
    }
}

/// `table[p * (n - 1) + (f - 1)] = sin(π f p / n)` for `p ∈ 0..=n`, `f ∈ 1..n`,
/// cached per `n`. Arguments are reduced in integer arithmetic, so rows
/// `p = 0` and `p = n` are exactly zero.
fn sine_table(n: usize) -> Arc<Vec<f64>> {
    static CACHE: TableCache<usize> = OnceLock::new();
    cached(&CACHE, n, || {
        let cols = n - 1;
        let mut table = vec![0.0; (n + 1) * cols];
        for p in 0..=n {
            for f in 1..n {
                let m = (f * p) % (2 * n);
                table[p * cols + f - 1] = if m == 0 || m == n {
                    0.0
                } else {
                    (std::f64::consts::PI * m as f64 / n as f64).sin()
                };
            }
        }
        table
    })
}

/// `out ((n + 1) × cols) = S · X` for the sine matrix `S = sine_table(n)` and
/// `X ((n - 1) × cols)` given by `x` with row/column strides `x_rs`, `x_cs`.
///
/// Row `n - p` of `S` equals row `p` with the sign of every even frequency
/// flipped, so only rows `0..=n/2` are multiplied, once against the odd and
/// once against the even frequencies.
fn sine_product(n: usize, x: &[f64], x_rs: usize, x_cs: usize, cols: usize, out: &mut [f64]) {
    let table = sine_table(n);
    let f = n - 1;
    let rows = n / 2 + 1;
    let (odd, even) = (f.div_ceil(2), f / 2);
    assert!(x.len() > (f - 1) * x_rs + (cols - 1) * x_cs && out.len() == (n + 1) * cols);
    let mut a = vec![0.0; rows * cols];
    let mut b = vec![0.0; rows * cols];
    // SAFETY: the assertion above bounds every index dgemm touches in `x`
    // and the scratch buffers are exactly `rows × cols`.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            odd,
            cols,
            1.0,
            table.as_ptr(),
            f as isize,
            2,
            x.as_ptr(),
            2 * x_rs as isize,
            x_cs as isize,
            0.0,
            a.as_mut_ptr(),
            cols as isize,
            1,
        );
        if even > 0 {
            matrixmultiply::dgemm(
                rows,
                even,
                cols,
                1.0,
                table.as_ptr().add(1),
                f as isize,
                2,
                x.as_ptr().add(x_rs),
                2 * x_rs as isize,
                x_cs as isize,
                0.0,
                b.as_mut_ptr(),
                cols as isize,
                1,
            );
        }
    }
    for p in 0..rows {
        let (ap, bp) = (&a[p * cols..(p + 1) * cols], &b[p * cols..(p + 1) * cols]);
        for (o, (u, v)) in out[p * cols..(p + 1) * cols]
            .iter_mut()
            .zip(ap.iter().zip(bp))
        {
            *o = u + v;
        }
        for (o, (u, v)) in out[(n - p) * cols..(n - p + 1) * cols]
            .iter_mut()
            .zip(ap.iter().zip(bp))
        {
            *o = u - v;
        }
    }
}

/// Evaluates both displacement axes on the `height × width` pixel grid.
pub fn displacement_field(
    params: &SpatialParams,
    height: usize,
    width: usize,
) -> Result<DisplacementField> {
    params.validate()?;
    if height < 2 || width < 2 {
        return Err(invalid!(
            "displacement field needs at least a 2x2 grid, got {height}x{width}"
        ));
    }
    let (n1, n2) = (height - 1, width - 1);
    let (f1, f2) = (n1 - 1, n2 - 1);
    if f1 == 0 || f2 == 0 || params.row.iter().chain(&params.col).all(|&v| v == 0.0) {
        return Ok(DisplacementField::zeros(height, width));
    }

    let k = params.cut_frequency;
    let fold_cols: Vec<Option<(usize, f64)>> = (1..=k).map(|j| fold(j, n2)).collect();
    let mut folded = [vec![0.0; f1 * f2], vec![0.0; f1 * f2]];
    let mut idx = 0;
    for i in 1..=k {
        let jmax = max_column(k, i) as usize;
        if let Some((a, sa)) = fold(i, n1) {
            for (j0, fc) in fold_cols[..jmax].iter().enumerate() {
                if let Some((b, sb)) = fc {
                    let t = idx + j0;
                    let s = sa * sb;
                    folded[0][a * f2 + b] += s * params.row[t];
                    folded[1][a * f2 + b] += s * params.col[t];
                }
            }
        }
        idx += jmax;
    }

    let mut out = [vec![0.0; height * width], vec![0.0; height * width]];
    let mut partial_t = vec![0.0; width * f1];
    for (c, dst) in folded.iter().zip(out.iter_mut()) {
        // Pᵀ (width × f1) = S2 · Cᵀ, then field (height × width) = S1 · P.
        sine_product(n2, c, 1, f2, f1, &mut partial_t);
        sine_product(n1, &partial_t, 1, f1, width, dst);
    }
    let [row, col] = out;
    Ok(DisplacementField {
        height,
        width,
        row,
        col,
    })
}

/// Backward-warps `img` through `field`: output pixel `r` samples the input
/// at `r + τ'(r)` with bilinear interpolation, source clamped to the image.
pub fn warp(img: &Image, field: &DisplacementField) -> Result<Image> {
    let (h, w) = (img.height(), img.width());
    if field.height != h || field.width != w {
        return Err(invalid!(
            "field is {}x{} but image is {h}x{w}",
            field.height,
            field.width
        ));
    }
    if h < 2 || w < 2 {
        return Err(invalid!("warping needs at least a 2x2 image, got {h}x{w}"));
    }
    let (sy, sx) = ((h - 1) as f64, (w - 1) as f64);
    let src = img.data();
    let mut out = vec![0.0; h * w * CHANNELS];
    for p in 0..h {
        for q in 0..w {
            let i = p * w + q;
            let y = (p as f64 + field.row[i] * sy).clamp(0.0, sy);
            let x = (q as f64 + field.col[i] * sx).clamp(0.0, sx);
            let y0 = (y.floor() as usize).min(h - 2);
            let x0 = (x.floor() as usize).min(w - 2);
            let fy = y - y0 as f64;
            let fx = x - x0 as f64;
            let base00 = (y0 * w + x0) * CHANNELS;
            let base10 = base00 + w * CHANNELS;
            for ch in 0..CHANNELS {
                let top = (1.0 - fx) * src[base00 + ch] + fx * src[base00 + CHANNELS + ch];
                let bottom = (1.0 - fx) * src[base10 + ch] + fx * src[base10 + CHANNELS + ch];
                out[i * CHANNELS + ch] = ((1.0 - fy) * top + fy * bottom).clamp(0.0, 1.0);
            }
        }
    }
    Image::new(h, w, out)
}

/// Evaluates the field for the image size and warps the image with it.
pub fn apply_spatial(img: &Image, params: &SpatialParams) -> Result<Image> {
    let field = displacement_field(params, img.height(), img.width())?;
    if field.is_zero() {
        return Ok(img.clamped());
    }
    warp(img, &field)
}
