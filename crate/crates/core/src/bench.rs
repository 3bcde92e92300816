//! Augmentation throughput measurement.
//!
//! Images are synthetic uniform noise generated before the clock starts.
//! Each sample times one full draw (recipe sampling, chains, mix); the
//! per-primitive breakdown times the individual chain steps of the same
//! draws.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::augment::{mix, sample_recipe, Step};
use crate::config::PrimeConfig;
use crate::error::{invalid, Result};
use crate::image::Image;
use crate::rng::RngState;

const BENCH_SEED: u64 = 0x62_656e_6368;

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub calls: usize,
    pub total_ms: f64,
    pub mean_us: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub height: usize,
    pub width: usize,
    pub threads: usize,
    /// Latency of every draw, in milliseconds, in image order.
    pub samples_ms: Vec<f64>,
    pub wall_secs: f64,
    pub images_per_sec: f64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    /// `sample`, `mix` and one entry per primitive (`identity` included).
    pub breakdown: Vec<StageTiming>,
}

impl BenchReport {
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{}x{} threads={} images={} : {:.1} images/s, latency mean {:.3} ms, p50 {:.3}, p90 {:.3}, p99 {:.3}\n",
            self.height,
            self.width,
            self.threads,
            self.samples_ms.len(),
            self.images_per_sec,
            self.mean_ms,
            self.p50_ms,
            self.p90_ms,
            self.p99_ms
        );
        for s in &self.breakdown {
            out.push_str(&format!(
                "  {:<9} calls {:>7}  total {:>10.2} ms  mean {:>9.2} us\n",
                s.stage, s.calls, s.total_ms, s.mean_us
            ));
        }
        out
    }
}

struct Timed {
    total: Duration,
    stages: Vec<(&'static str, Duration)>,
}

fn stage_name(step: &Step) -> &'static str {
    step.primitive().map_or("identity", |p| p.name())
}

fn timed_draw(img: &Image, cfg: &PrimeConfig, rng: &RngState) -> Result<Timed> {
    let start = Instant::now();
    let recipe = sample_recipe(rng, cfg, img.height(), img.width())?;
    let mut stages = vec![("sample", start.elapsed())];
    let mut chains = Vec::with_capacity(recipe.chains.len());
    for chain in &recipe.chains {
        let mut x = img.clone();
        for step in chain {
            let t = Instant::now();
            x = step.apply(&x)?;
            stages.push((stage_name(step), t.elapsed()));
        }
        chains.push(x);
    }
    let t = Instant::now();
    let mut out = mix(img, &chains, &recipe.weights)?;
    out.clamp_in_place();
    stages.push(("mix", t.elapsed()));
    std::hint::black_box(&out);
    Ok(Timed {
        total: start.elapsed(),
        stages,
    })
}

fn synthetic_image(index: u64, height: usize, width: usize) -> Image {
    let mut rng = RngState::derive(BENCH_SEED, &[u64::MAX, index]);
    Image::from_fn(height, width, |_, _, _| {
        rng.uniform(0.0, 1.0).expect("unit interval")
    })
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    crate::analysis::nearest_rank(sorted, p)
}

/// Times `count` draws on `threads` worker threads.
pub fn bench_throughput(
    cfg: &PrimeConfig,
    height: usize,
    width: usize,
    count: usize,
    threads: usize,
) -> Result<BenchReport> {
    if count == 0 || threads == 0 {
        return Err(invalid!("bench needs count >= 1 and threads >= 1"));
    }
    cfg.validate()?;
    let images: Vec<Image> = (0..count as u64)
        .map(|i| synthetic_image(i, height, width))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid!("cannot start {threads} worker threads: {e}"))?;
    // One untimed draw warms the caches and lazily built tables.
    timed_draw(
        &images[0],
        cfg,
        &RngState::derive(BENCH_SEED, &[u64::MAX - 1]),
    )?;
    let start = Instant::now();
    let timings: Vec<Timed> = pool.install(|| {
        images
            .par_iter()
            .enumerate()
            .map(|(i, img)| timed_draw(img, cfg, &RngState::derive(BENCH_SEED, &[i as u64])))
            .collect::<Result<_>>()
    })?;
    let wall_secs = start.elapsed().as_secs_f64();

    let samples_ms: Vec<f64> = timings
        .iter()
        .map(|t| t.total.as_secs_f64() * 1e3)
        .collect();
    let mut sorted = samples_ms.clone();
    sorted.sort_by(f64::total_cmp);
    let mut stages: BTreeMap<&str, (usize, Duration)> = BTreeMap::new();
    for (name, d) in timings.iter().flat_map(|t| &t.stages) {
        let e = stages.entry(name).or_default();
        e.0 += 1;
        e.1 += *d;
    }
    let breakdown = stages
        .into_iter()
        .map(|(stage, (calls, total))| StageTiming {
            stage: stage.to_string(),
            calls,
            total_ms: total.as_secs_f64() * 1e3,
            mean_us: total.as_secs_f64() * 1e6 / calls as f64,
        })
        .collect();
    Ok(BenchReport {
        height,
        width,
        threads,
        wall_secs,
        images_per_sec: count as f64 / wall_secs,
        mean_ms: samples_ms.iter().sum::<f64>() / count as f64,
        p50_ms: percentile(&sorted, 50.0),
        p90_ms: percentile(&sorted, 90.0),
        p99_ms: percentile(&sorted, 99.0),
        samples_ms,
        breakdown,
    })
}

/// Throughput at each thread count in `threads`, for scaling curves.
pub fn thread_scaling(
    cfg: &PrimeConfig,
    height: usize,
    width: usize,
    count: usize,
    threads: &[usize],
) -> Result<Vec<BenchReport>> {
    threads
        .iter()
        .map(|&t| bench_throughput(cfg, height, width, count, t))
        .collect()
}
