//! Embedding-space coverage metric.
//!
//! For every clean image `n` and each of its corrupted versions `c`, the
//! distance to the closest of its `T` augmented versions is taken under the
//! cosine distance of some external feature extractor. The fitness is the
//! mean of those minima over all `N·C` pairs; the median and other
//! percentiles are computed over the same `N·C` population.
//!
//! # Embedding files
//!
//! Binary layout, all integers and floats little-endian:
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! | 0      | 8    | magic `PRIMEEMB`                        |
//! | 8      | 4    | format version, `1`                     |
//! | 12     | 4    | `N` images                              |
//! | 16     | 4    | `C` corruption embeddings per image     |
//! | 20     | 4    | `T` augmentation embeddings per image   |
//! | 24     | 4    | `d` dimension                           |
//! | 28     | 4    | float width in bits, `32` or `64`       |
//! | 32     | ...  | vectors                                 |
//!
//! Vectors are ordered by image, then group (the `C` corruption vectors
//! before the `T` augmentation vectors), then index within the group.
//!
//! A directory is read as the text format instead: one file per image,
//! taken in file-name order. Each non-empty line not starting with `#` is a
//! tag `c` (corruption) or `t` (augmentation) followed by `d`
//! whitespace-separated numbers.

use std::path::Path;

use crate::error::{invalid, Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"PRIMEEMB";
pub const EMBEDDING_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

/// Percentiles reported by [`FitnessReport`].
pub const REPORT_PERCENTILES: [f64; 5] = [5.0, 10.0, 25.0, 50.0, 75.0];

/// `1 - u·v / (‖u‖ ‖v‖)`, clamped to [0, 2].
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(invalid!("dimension mismatch: {} vs {}", u.len(), v.len()));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(invalid!("cosine distance is undefined for zero vectors"));
    }
    Ok(distance_with_norms(u, v, nu, nv))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn distance_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (1.0 - dot / (nu * nv)).clamp(0.0, 2.0)
}

/// Corruption and augmentation embeddings for `N` images.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    images: usize,
    corruptions: usize,
    augmentations: usize,
    dim: usize,
    /// `N × C × d`.
    corruption: Vec<f64>,
    /// `N × T × d`.
    augmentation: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new(
        images: usize,
        corruptions: usize,
        augmentations: usize,
        dim: usize,
        corruption: Vec<f64>,
        augmentation: Vec<f64>,
    ) -> Result<Self> {
        if images == 0 || corruptions == 0 || augmentations == 0 || dim == 0 {
            return Err(invalid!(
                "embedding set needs N, C, T, d >= 1, got {images}, {corruptions}, {augmentations}, {dim}"
            ));
        }
        if corruption.len() != images * corruptions * dim
            || augmentation.len() != images * augmentations * dim
        {
            return Err(invalid!("embedding buffers do not match N={images}, C={corruptions}, T={augmentations}, d={dim}"));
        }
        let set = Self {
            images,
            corruptions,
            augmentations,
            dim,
            corruption,
            augmentation,
        };
        let zero = set
            .corruption
            .chunks_exact(dim)
            .chain(set.augmentation.chunks_exact(dim))
            .any(|v| norm(v) == 0.0 || v.iter().any(|x| !x.is_finite()));
        if zero {
            return Err(invalid!("embedding vectors must be finite and nonzero"));
        }
        Ok(set)
    }

    pub fn images(&self) -> usize {
        self.images
    }

    pub fn corruptions(&self) -> usize {
        self.corruptions
    }

    pub fn augmentations(&self) -> usize {
        self.augmentations
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn corruption(&self, image: usize, c: usize) -> &[f64] {
        let start = (image * self.corruptions + c) * self.dim;
        &self.corruption[start..start + self.dim]
    }

    pub fn augmentation(&self, image: usize, t: usize) -> &[f64] {
        let start = (image * self.augmentations + t) * self.dim;
        &self.augmentation[start..start + self.dim]
    }

    /// Minimum cosine distance for every `(image, corruption)` pair, image-major.
    pub fn min_distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.images * self.corruptions);
        for n in 0..self.images {
            let aug: Vec<(&[f64], f64)> = (0..self.augmentations)
                .map(|t| {
                    let v = self.augmentation(n, t);
                    (v, norm(v))
                })
                .collect();
            for c in 0..self.corruptions {
                let u = self.corruption(n, c);
                let nu = norm(u);
                let best = aug
                    .iter()
                    .map(|&(v, nv)| distance_with_norms(u, v, nu, nv))
                    .fold(f64::INFINITY, f64::min);
                out.push(best);
            }
        }
        out
    }

    /// Reads the binary format from a file or the text format from a directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.is_dir() {
            read_text_dir(path)
        } else {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            Self::from_bytes(&bytes)
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let data_err = |msg: String| Error::Data(msg);
        if bytes.len() < HEADER_LEN || &bytes[..8] != EMBEDDING_MAGIC {
            return Err(data_err("not an embedding file (bad magic)".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let version = word(8) as u32;
        if version != EMBEDDING_VERSION {
            return Err(data_err(format!(
                "unsupported embedding format version {version}"
            )));
        }
        let (n, c, t, d, bits) = (word(12), word(16), word(20), word(24), word(28));
        let width = match bits {
            32 => 4,
            64 => 8,
            other => {
                return Err(data_err(format!(
                    "float width must be 32 or 64, got {other}"
                )))
            }
        };
        let count = n * (c + t) * d;
        if bytes.len() != HEADER_LEN + count * width {
            return Err(data_err(format!(
                "payload has {} bytes, header implies {}",
                bytes.len() - HEADER_LEN,
                count * width
            )));
        }
        let values: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(width)
            .map(|b| match width {
                4 => f64::from(f32::from_le_bytes(b.try_into().unwrap())),
                _ => f64::from_le_bytes(b.try_into().unwrap()),
            })
            .collect();
        let mut corruption = Vec::with_capacity(n * c * d);
        let mut augmentation = Vec::with_capacity(n * t * d);
        for block in values.chunks_exact((c + t) * d) {
            corruption.extend_from_slice(&block[..c * d]);
            augmentation.extend_from_slice(&block[c * d..]);
        }
        Self::new(n, c, t, d, corruption, augmentation).map_err(|e| data_err(e.to_string()))
    }

    /// Encodes in the binary format with 32- or 64-bit floats.
    pub fn to_bytes(&self, float_bits: u32) -> Result<Vec<u8>> {
        if float_bits != 32 && float_bits != 64 {
            return Err(invalid!("float width must be 32 or 64, got {float_bits}"));
        }
        let mut out = Vec::new();
        out.extend_from_slice(EMBEDDING_MAGIC);
        for v in [
            EMBEDDING_VERSION,
            self.images as u32,
            self.corruptions as u32,
            self.augmentations as u32,
            self.dim as u32,
            float_bits,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut push = |v: &[f64]| {
            for &x in v {
                if float_bits == 32 {
                    out.extend_from_slice(&(x as f32).to_le_bytes());
                } else {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        };
        for n in 0..self.images {
            for c in 0..self.corruptions {
                push(self.corruption(n, c));
            }
            for t in 0..self.augmentations {
                push(self.augmentation(n, t));
            }
        }
        Ok(out)
    }
}

fn read_text_dir(dir: &Path) -> Result<EmbeddingSet> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!(
            "{} contains no embedding files",
            dir.display()
        )));
    }
    let mut shape: Option<(usize, usize, usize)> = None;
    let (mut corruption, mut augmentation) = (Vec::new(), Vec::new());
    for file in &files {
        let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let (mut cs, mut ts) = (Vec::new(), Vec::new());
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tag = fields.next().unwrap_or_default();
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Data(format!("{}:{}: {e}", file.display(), lineno + 1)))?;
            if *dim.get_or_insert(values.len()) != values.len() {
                return Err(Error::Data(format!(
                    "{}:{}: inconsistent dimension",
                    file.display(),
                    lineno + 1
                )));
            }
            match tag {
                "c" => cs.extend(values),
                "t" => ts.extend(values),
                other => {
                    return Err(Error::Data(format!(
                        "{}:{}: unknown tag {other:?} (expected c or t)",
                        file.display(),
                        lineno + 1
                    )))
                }
            }
        }
        let d = dim.unwrap_or(0);
        if d == 0 {
            return Err(Error::Data(format!("{} has no vectors", file.display())));
        }
        let this = (cs.len() / d, ts.len() / d, d);
        if *shape.get_or_insert(this) != this {
            return Err(Error::Data(format!(
                "{} disagrees with earlier files on C, T or d",
                file.display()
            )));
        }
        corruption.extend(cs);
        augmentation.extend(ts);
    }
    let (c, t, d) = shape.unwrap();
    EmbeddingSet::new(files.len(), c, t, d, corruption, augmentation)
        .map_err(|e| Error::Data(e.to_string()))
}

/// Mean over all `(image, corruption)` pairs of the minimum cosine distance
/// to that image's augmentations.
pub fn min_distance_fitness(set: &EmbeddingSet) -> f64 {
    let d = set.min_distances();
    d.iter().sum::<f64>() / d.len() as f64
}

/// Nearest-rank percentile: the smallest value with at least `p`% of the
/// population at or below it. `sorted` must be ascending and nonempty.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty population");
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Mean, median and fixed percentiles of the minimum distances.
#[derive(Clone, Debug, PartialEq)]
pub struct FitnessReport {
    pub pairs: usize,
    pub mean: f64,
    pub median: f64,
    /// `(percentile, value)` for each of [`REPORT_PERCENTILES`].
    pub percentiles: Vec<(f64, f64)>,
}

impl FitnessReport {
    pub fn from_set(set: &EmbeddingSet) -> Self {
        Self::from_distances(set.min_distances())
    }

    pub fn from_distances(mut distances: Vec<f64>) -> Self {
        let mean = distances.iter().sum::<f64>() / distances.len() as f64;
        distances.sort_by(f64::total_cmp);
        let percentiles = REPORT_PERCENTILES
            .iter()
            .map(|&p| (p, nearest_rank(&distances, p)))
            .collect();
        Self {
            pairs: distances.len(),
            mean,
            median: nearest_rank(&distances, 50.0),
            percentiles,
        }
    }

    /// Percentile table with values scaled by 10³.
    pub fn table(&self, label: &str) -> String {
        let mut header = String::from("| Method |");
        let mut rule = String::from("|---|");
        let mut row = format!("| {label} |");
        for (p, v) in &self.percentiles {
            header.push_str(&format!(" {p}% |"));
            rule.push_str("---|");
            row.push_str(&format!(" {:.2} |", v * 1e3));
        }
        format!("Min. cosine distance (x10^-3)\n{header}\n{rule}\n{row}\n")
    }
}
