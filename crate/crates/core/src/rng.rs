//! Splittable deterministic random streams.
//!
//! Every stream is keyed by 256 bits of seed material obtained by hashing the
//! master seed and then folding in each label of a path such as
//! `(image, copy, chain, step)`. The key seeds a ChaCha8 block cipher used in
//! counter mode, so any node of the label tree can be materialized directly
//! without replaying its siblings. Results are therefore independent of how
//! work is scheduled across threads.
//!
//! Gaussian draws use the ziggurat method (`rand_distr::StandardNormal`) and
//! exponential draws use `rand_distr::Exp1`. Both are fixed for this crate;
//! bit equality is only promised within one build of it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

const DOMAIN: &[u8] = b"prime.rng.v1";

/// A positioned random stream identified by `(seed material, label path)`.
///
/// Cloning a state clones its position: both copies yield the same sequence.
#[derive(Clone, Debug)]
pub struct RngState {
    key: [u8; 32],
    labels: Vec<u64>,
    stream: ChaCha8Rng,
}

impl RngState {
    /// Derives the stream for `labels` under `master_seed`.
    ///
    /// `derive(s, &[a, b])` is the same stream as `derive(s, &[a]).child(b)`.
    pub fn derive(master_seed: u64, labels: &[u64]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(master_seed.to_le_bytes());
        let mut state = Self::from_key(hasher.finalize().into());
        for &label in labels {
            state = state.child(label);
        }
        state
    }

    /// Rebuilds a stream at its starting position from raw seed material.
    pub fn from_key(key: [u8; 32]) -> Self {
        Self {
            key,
            labels: Vec::new(),
            stream: ChaCha8Rng::from_seed(key),
        }
    }

    /// A fresh stream one level below this one. The parent's position is
    /// irrelevant: children depend only on the key and the label.
    pub fn child(&self, label: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update(label.to_le_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        let mut labels = self.labels.clone();
        labels.push(label);
        Self {
            key,
            labels,
            stream: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn key(&self) -> [u8; 32] {
        self.key
    }

    /// Labels folded in since the last [`RngState::from_key`] or master seed.
    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Splits off an independent stream seeded from the next 256 bits of
    /// this one.
    pub fn fork(&mut self) -> Self {
        let mut key = [0u8; 32];
        self.stream.fill_bytes(&mut key);
        Self::from_key(key)
    }

    /// A draw from N(0, 1).
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.stream.sample(StandardNormal)
    }

    /// A draw from N(mean, std²). `std == 0` returns `mean` exactly.
    pub fn gaussian(&mut self, mean: f64, std: f64) -> Result<f64> {
        if !(std >= 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(invalid!(
                "gaussian needs finite mean and std >= 0, got N({mean}, {std}^2)"
            ));
        }
        if std == 0.0 {
            return Ok(mean);
        }
        Ok(mean + std * self.standard_normal())
    }

    /// A draw from U[lo, hi]. `lo == hi` returns `lo` exactly.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid!("uniform needs finite lo <= hi, got [{lo}, {hi}]"));
        }
        if lo == hi {
            return Ok(lo);
        }
        let u: f64 = self.stream.random();
        Ok((lo + (hi - lo) * u).min(hi))
    }

    /// A uniform index in `0..n`. Panics if `n == 0`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.stream.random_range(0..n)
    }

    /// A draw from Dir(1, ..., 1) of dimension `k`, computed as `k` unit
    /// exponential draws normalized by their sum.
    pub fn dirichlet_uniform(&mut self, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(invalid!("dirichlet dimension must be >= 1"));
        }
        if k == 1 {
            return Ok(vec![1.0]);
        }
        let mut draws: Vec<f64> = (0..k).map(|_| self.stream.sample(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            draws.iter_mut().for_each(|x| *x /= total);
        } else {
            // Every exponential draw was exactly zero; the symmetric point is
            // the only unbiased answer.
            draws.iter_mut().for_each(|x| *x = 1.0 / k as f64);
        }
        Ok(draws)
    }
}
