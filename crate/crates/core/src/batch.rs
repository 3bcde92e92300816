//! Batch entry points over caller-owned `N × H × W × 3` `f32` buffers, for
//! foreign-language training loops.
//!
//! Element `i` of a batch augmented at `epoch` uses the stream
//! `RngState::derive(seed, &[epoch, i])`, so every element equals
//! [`prime_augment`] on the same image with that stream, independent of
//! batch composition and thread count.

use rayon::prelude::*;

use crate::augment::{apply_recipe, prime_augment, Recipe};
use crate::config::PrimeConfig;
use crate::error::{invalid, Error, Result};
use crate::image::{Image, CHANNELS};
use crate::rng::RngState;

/// Shape of a contiguous batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchShape {
    pub count: usize,
    pub height: usize,
    pub width: usize,
}

impl BatchShape {
    pub fn new(count: usize, height: usize, width: usize) -> Self {
        Self {
            count,
            height,
            width,
        }
    }

    pub fn element_len(&self) -> usize {
        self.height * self.width * CHANNELS
    }

    fn check(&self, buffer: &[f32]) -> Result<()> {
        let expected = self
            .count
            .checked_mul(self.element_len())
            .ok_or_else(|| invalid!("batch shape {self:?} overflows"))?;
        if buffer.len() != expected {
            return Err(invalid!(
                "batch buffer holds {} values, shape {}x{}x{}x{} needs {expected}",
                buffer.len(),
                self.count,
                self.height,
                self.width,
                CHANNELS
            ));
        }
        if let Some(pos) = buffer.iter().position(|v| !v.is_finite()) {
            return Err(invalid!("batch value at flat index {pos} is not finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AugmentedBatch {
    pub data: Vec<f32>,
    /// Serialized recipe per element.
    pub recipes: Vec<String>,
    /// Set when some input value lay outside [0, 1] and was clamped.
    pub clamped_input: bool,
}

fn element_image(chunk: &[f32], shape: BatchShape) -> Image {
    let data = chunk
        .iter()
        .map(|&v| f64::from(v).clamp(0.0, 1.0))
        .collect();
    Image::new(shape.height, shape.width, data).expect("chunk length checked")
}

/// Augments every element of `batch`.
pub fn augment_batch(
    batch: &[f32],
    shape: BatchShape,
    cfg: &PrimeConfig,
    master_seed: u64,
    epoch: u64,
) -> Result<AugmentedBatch> {
    shape.check(batch)?;
    cfg.validate()?;
    let clamped_input = batch.iter().any(|v| !(0.0..=1.0).contains(v));
    let len = shape.element_len().max(1);
    let results: Vec<(Vec<f32>, String)> = batch
        .par_chunks(len)
        .enumerate()
        .map(|(i, chunk)| {
            let img = element_image(chunk, shape);
            let rng = RngState::derive(master_seed, &[epoch, i as u64]);
            let (out, recipe) = prime_augment(&img, cfg, &rng)?;
            Ok((
                out.data().iter().map(|&v| v as f32).collect(),
                recipe.to_json(),
            ))
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(batch.len());
    let mut recipes = Vec::with_capacity(shape.count);
    for (d, r) in results {
        data.extend(d);
        recipes.push(r);
    }
    Ok(AugmentedBatch {
        data,
        recipes,
        clamped_input,
    })
}

/// Replays one serialized recipe per element. Every malformed or
/// inapplicable recipe is reported with its element index.
pub fn replay_batch(batch: &[f32], shape: BatchShape, recipes: &[String]) -> Result<Vec<f32>> {
    shape.check(batch)?;
    if recipes.len() != shape.count {
        return Err(invalid!(
            "{} recipes for a batch of {}",
            recipes.len(),
            shape.count
        ));
    }
    let len = shape.element_len().max(1);
    let results: Vec<Result<Vec<f32>>> = batch
        .par_chunks(len)
        .zip(recipes.par_iter())
        .map(|(chunk, text)| {
            let recipe = Recipe::from_json(text)?;
            let out = apply_recipe(&element_image(chunk, shape), &recipe)?;
            Ok(out.data().iter().map(|&v| v as f32).collect())
        })
        .collect();
    let failures: Vec<String> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| format!("element {i}: {e}")))
        .collect();
    if !failures.is_empty() {
        return Err(Error::Recipe(failures.join("; ")));
    }
    Ok(results
        .into_iter()
        .flat_map(|r| r.expect("failures handled"))
        .collect())
}
