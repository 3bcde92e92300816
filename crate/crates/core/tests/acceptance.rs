//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Oracles below are written independently of the
//! library's fast paths.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use prime::analysis::{min_distance_fitness, EmbeddingSet, FitnessReport};
use prime::augment::{apply_additive, sample_additive_params, sample_recipe, Step};
use prime::bench::bench_throughput;
use prime::color::{apply_color, sample_color_params, ColorParams};
use prime::spatial::{apply_spatial, displacement_field, sample_spatial_params, SpatialParams};
use prime::spectral::{apply_spectral, sample_spectral_params, SpectralParams};
use prime::{prime_augment, Image, PrimeConfig, Primitive, RngState};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_image(rng: &mut RngState, h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |_, _, _| rng.uniform(0.0, 1.0).unwrap())
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn identity_law() -> Outcome {
    let mut rng = RngState::derive(1, &[]);
    let mut cfg = PrimeConfig::cifar();
    cfg.enabled = Primitive::ALL.to_vec();
    let mut failures = Vec::new();
    for n in 0..50u64 {
        let h = 8 + rng.index(40);
        let w = 8 + rng.index(40);
        let img = random_image(&mut rng, h, w);
        let mut r = RngState::derive(2, &[n]);
        let checks = [
            (
                "spectral",
                apply_spectral(&img, &sample_spectral_params(&mut r, 3, 4.0, 0.0).unwrap())
                    .unwrap(),
            ),
            (
                "spatial",
                apply_spatial(
                    &img,
                    &sample_spatial_params(&mut r, 100, (0.0, 0.0), 1.0).unwrap(),
                )
                .unwrap(),
            ),
            (
                "color",
                apply_color(
                    &img,
                    &sample_color_params(&mut r, 10, 11, 0.0, 1.0).unwrap(),
                )
                .unwrap(),
            ),
            (
                "additive",
                apply_additive(&img, &sample_additive_params(&mut r, 0.05, 0.0).unwrap()).unwrap(),
            ),
        ];
        for (name, out) in checks {
            if out != img {
                failures.push(format!("{name} on image {n}"));
            }
        }
        for (label, base) in [
            ("cifar", PrimeConfig::cifar()),
            ("imagenet", PrimeConfig::imagenet()),
        ] {
            let mut zero = base;
            zero.enabled = Primitive::ALL.to_vec();
            zero.alpha = 0.0;
            let (out, recipe) = prime_augment(&img, &zero, &RngState::derive(3, &[n])).unwrap();
            if out != img {
                failures.push(format!("{label} pipeline on image {n}"));
            }
            assert!(recipe.steps().count() == 9);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "50 images, 4 primitives + 2 presets at zero strength, bitwise; failures: {failures:?}"
        ),
    )
}

fn equipartition() -> Outcome {
    let mut rng = RngState::derive(4, &[]);
    let n = 10_000;
    let mean = (0..n)
        .map(|_| {
            SpectralParams::sample_with_sigma(&mut rng, 3, 4.0)
                .unwrap()
                .energy()
        })
        .sum::<f64>()
        / n as f64;
    outcome(
        (mean - 144.0).abs() <= 0.02 * 144.0,
        format!("mean |w'|^2 = {mean:.3}, target 144 +- 2%"),
    )
}

fn spatial_coefficient_law() -> Outcome {
    let probes = [
        (1u32, 1u32),
        (1, 2),
        (2, 1),
        (2, 3),
        (3, 4),
        (5, 5),
        (7, 1),
        (10, 10),
        (30, 40),
        (70, 70),
    ];
    let sigma = 0.7;
    let n = 10_000;
    let mut draws = vec![[Vec::with_capacity(n), Vec::with_capacity(n)]; probes.len()];
    let mut rng = RngState::derive(5, &[]);
    for _ in 0..n {
        let p = SpatialParams::sample_with_sigma(&mut rng, 100, sigma).unwrap();
        for (slot, &(i, j)) in draws.iter_mut().zip(&probes) {
            for (axis, values) in slot.iter_mut().enumerate() {
                values.push(p.coefficient(axis, i, j).unwrap());
            }
        }
    }
    let mut worst: f64 = 1.0;
    for (slot, &(i, j)) in draws.iter().zip(&probes) {
        for axis in slot {
            let ratio = sample_variance(axis) * f64::from(i * i + j * j) / (sigma * sigma);
            if (ratio - 1.0).abs() > (worst - 1.0).abs() {
                worst = ratio;
            }
        }
    }
    outcome(
        (0.94..=1.06).contains(&worst),
        format!(
            "10 pairs x 2 axes at K=100, worst normalized variance {worst:.4}, range [0.94, 1.06]"
        ),
    )
}

fn border_fixing() -> Outcome {
    let mut worst = 0.0f64;
    let mut warped_border_moves = 0;
    for (cfg, size) in [
        (PrimeConfig::cifar(), 32usize),
        (PrimeConfig::imagenet(), 224),
    ] {
        let sp = &cfg.spatial;
        let mut rng = RngState::derive(6, &[size as u64]);
        let img = random_image(&mut rng, size, size);
        for t in 0..100 {
            let params = sample_spatial_params(
                &mut rng,
                sp.cut_frequency,
                (sp.sigma_max, sp.sigma_max),
                1.0,
            )
            .unwrap();
            let field = displacement_field(&params, size, size).unwrap();
            for p in 0..size {
                for q in 0..size {
                    if p == 0 || q == 0 || p == size - 1 || q == size - 1 {
                        let i = p * size + q;
                        worst = worst.max(field.row[i].abs()).max(field.col[i].abs());
                    }
                }
            }
            if t < 5 {
                let out = apply_spatial(&img, &params).unwrap();
                for p in 0..size {
                    for q in [0, size - 1] {
                        for ch in 0..3 {
                            if out.get(p, q, ch) != img.get(p, q, ch)
                                || out.get(q, p, ch) != img.get(q, p, ch)
                            {
                                warped_border_moves += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-12 && warped_border_moves == 0,
        format!("100 fields each at 32x32 (K=100) and 224x224 (K=500), max border displacement {worst:e}"),
    )
}

fn color_endpoints() -> Outcome {
    let img = Image::new(2, 1, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
    let mut changed = 0;
    for (k, delta, sigma_max) in [(10, 11, 0.01), (500, 20, 0.05)] {
        let mut rng = RngState::derive(7, &[k]);
        for _ in 0..5_000 {
            let params = sample_color_params(&mut rng, k as u32, delta, sigma_max, 1.0).unwrap();
            if apply_color(&img, &params).unwrap() != img {
                changed += 1;
            }
        }
    }
    outcome(
        changed == 0,
        format!("10^4 sampled curves (half K=10, half K=500), {changed} moved an endpoint"),
    )
}

fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i as usize
}

fn naive_spectral(img: &Image, params: &SpectralParams) -> Image {
    let k = params.kernel_size;
    let half = (k / 2) as isize;
    let (h, w) = (img.height(), img.width());
    Image::from_fn(h, w, |p, q, ch| {
        let mut acc = 0.0;
        for a in 0..k {
            for b in 0..k {
                let mut tap = params.coefficients[a * k + b];
                if a == k / 2 && b == k / 2 {
                    tap += 1.0;
                }
                let r = mirror(p as isize + half - a as isize, h);
                let c = mirror(q as isize + half - b as isize, w);
                acc += tap * img.get(r, c, ch);
            }
        }
        acc.clamp(0.0, 1.0)
    })
}

fn naive_field(params: &SpatialParams, h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let k = params.cut_frequency;
    let mut terms = Vec::new();
    for i in 1..=k {
        for j in 1..=k {
            if i * i + j * j <= k * k {
                terms.push((
                    f64::from(i),
                    f64::from(j),
                    params.coefficient(0, i, j).unwrap(),
                    params.coefficient(1, i, j).unwrap(),
                ));
            }
        }
    }
    let mut row = vec![0.0; h * w];
    let mut col = vec![0.0; h * w];
    for p in 0..h {
        for q in 0..w {
            let (r1, r2) = (p as f64 / (h - 1) as f64, q as f64 / (w - 1) as f64);
            for &(i, j, b_row, b_col) in &terms {
                let basis = (PI * i * r1).sin() * (PI * j * r2).sin();
                row[p * w + q] += b_row * basis;
                col[p * w + q] += b_col * basis;
            }
        }
    }
    (row, col)
}

fn naive_warp(img: &Image, row: &[f64], col: &[f64]) -> Image {
    let (h, w) = (img.height(), img.width());
    Image::from_fn(h, w, |p, q, ch| {
        let y = (p as f64 + row[p * w + q] * (h - 1) as f64).clamp(0.0, (h - 1) as f64);
        let x = (q as f64 + col[p * w + q] * (w - 1) as f64).clamp(0.0, (w - 1) as f64);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let v = (1.0 - fy) * ((1.0 - fx) * img.get(y0, x0, ch) + fx * img.get(y0, x1, ch))
            + fy * ((1.0 - fx) * img.get(y1, x0, ch) + fx * img.get(y1, x1, ch));
        v.clamp(0.0, 1.0)
    })
}

fn naive_color(img: &Image, params: &ColorParams) -> Image {
    Image::from_fn(img.height(), img.width(), |p, q, ch| {
        let v = img.get(p, q, ch);
        let mut out = v;
        for (t, beta) in params.coefficients.iter().enumerate() {
            let n = f64::from(params.band_start) + t as f64;
            out += beta[ch] * (PI * n * v).sin();
        }
        out.clamp(0.0, 1.0)
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = RngState::derive(8, &[]);
    let (mut conv, mut field, mut warp, mut color) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n in 0..20 {
        let h = 8 + rng.index(9);
        let w = 8 + rng.index(9);
        let img = random_image(&mut rng, h, w);

        let k = [3, 5, 7][n % 3];
        let sigma = if n == 0 {
            4.0
        } else {
            rng.uniform(0.05, 0.5).unwrap()
        };
        let sp = SpectralParams::sample_with_sigma(&mut rng, k, sigma).unwrap();
        conv = conv.max(max_diff(
            apply_spectral(&img, &sp).unwrap().data(),
            naive_spectral(&img, &sp).data(),
        ));

        let cut = [5, 20, 100][n % 3];
        let sigma_t = rng.uniform(0.01, 0.05).unwrap();
        let tp = SpatialParams::sample_with_sigma(&mut rng, cut, sigma_t).unwrap();
        let f = displacement_field(&tp, h, w).unwrap();
        let (row, col) = naive_field(&tp, h, w);
        field = field
            .max(max_diff(&f.row, &row))
            .max(max_diff(&f.col, &col));
        warp = warp.max(max_diff(
            apply_spatial(&img, &tp).unwrap().data(),
            naive_warp(&img, &row, &col).data(),
        ));

        let (kc, delta) = [(10, 11), (40, 8), (500, 20)][n % 3];
        let sigma_c = rng.uniform(0.01, 0.05).unwrap();
        let cp = ColorParams::sample_with_sigma(&mut rng, kc, delta, sigma_c).unwrap();
        color = color.max(max_diff(
            apply_color(&img, &cp).unwrap().data(),
            naive_color(&img, &cp).data(),
        ));
    }
    outcome(
        conv <= 1e-6 && field <= 1e-6 && warp <= 1e-6 && color <= 1e-4,
        format!("20 instances 8..16 px: conv {conv:.1e}, field {field:.1e}, warp {warp:.1e} (<= 1e-6), color {color:.1e} (<= 1e-4)"),
    )
}

fn algorithm_statistics() -> Outcome {
    let cfg = PrimeConfig::cifar();
    let draws = 11_112;
    let mut choice = [0usize; 4];
    let mut identity_chains = 0;
    let mut weight_sums = [0.0; 4];
    for t in 0..draws {
        let recipe = sample_recipe(&RngState::derive(9, &[t]), &cfg, 32, 32).unwrap();
        for chain in &recipe.chains {
            for step in chain {
                let slot = match step {
                    Step::Identity => 0,
                    Step::Spectral(_) => 1,
                    Step::Spatial(_) => 2,
                    Step::Color(_) => 3,
                    Step::Additive(_) => unreachable!("additive is disabled by default"),
                };
                choice[slot] += 1;
            }
            identity_chains += chain.iter().all(|s| matches!(s, Step::Identity)) as usize;
        }
        for (s, w) in weight_sums.iter_mut().zip(&recipe.weights) {
            *s += w;
        }
    }
    let steps = (draws * 9) as f64;
    let freqs: Vec<f64> = choice.iter().map(|&c| c as f64 / steps).collect();
    let means: Vec<f64> = weight_sums.iter().map(|s| s / draws as f64).collect();
    let chains = (draws * 3) as f64;
    let p0 = 1.0 / 64.0;
    let identity_freq = identity_chains as f64 / chains;
    let se = (p0 * (1.0 - p0) / chains).sqrt();
    let passed = freqs.iter().all(|f| (f - 0.25).abs() <= 0.01)
        && means.iter().all(|m| (m - 0.25).abs() <= 0.01)
        && (identity_freq - p0).abs() <= 3.0 * se;
    outcome(
        passed,
        format!(
            "{steps} steps: choice {freqs:.4?}; Dirichlet means {means:.4?}; all-identity chains {identity_freq:.5} vs {p0:.5} +- {:.5}",
            3.0 * se
        ),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_prime"))
        .args(args)
        .output()
        .expect("run prime binary")
}

fn offline_pipeline() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let input = root.path().join("input");
    std::fs::create_dir(&input).unwrap();
    let mut rng = RngState::derive(10, &[]);
    for n in 0..20 {
        random_image(&mut rng, 32, 32)
            .save_png(input.join(format!("{n:02}.png")))
            .unwrap();
    }
    let run = |out: &Path| {
        run_cli(&[
            "augment",
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--copies",
            "4",
            "--seed",
            "77",
        ])
    };
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let (ra, rb) = (run(&a), run(&b));
    if !ra.status.success() || !rb.status.success() {
        return outcome(
            false,
            format!("augment failed: {}", String::from_utf8_lossy(&ra.stderr)),
        );
    }
    let manifest_a = std::fs::read(a.join("manifest.json")).unwrap();
    let manifest_b = std::fs::read(b.join("manifest.json")).unwrap();
    let manifest: prime::pipeline::Manifest = serde_json::from_slice(&manifest_a).unwrap();
    let mut files_match = true;
    for e in &manifest.entries {
        files_match &=
            std::fs::read(a.join(&e.output)).unwrap() == std::fs::read(b.join(&e.output)).unwrap();
    }
    let verify = run_cli(&["verify", "--output", a.to_str().unwrap()]);
    let passed = manifest_a == manifest_b
        && manifest.entries.len() == 80
        && files_match
        && verify.status.success();
    outcome(
        passed,
        format!(
            "20 images x 4 copies: {} outputs, manifests identical: {}, files identical: {files_match}, replay: {}",
            manifest.entries.len(),
            manifest_a == manifest_b,
            String::from_utf8_lossy(&verify.stdout).trim()
        ),
    )
}

fn fitness_metric() -> Outcome {
    let (n, c, t, d) = (5, 4, 6, 16);
    let mut rng = RngState::derive(11, &[]);
    let mut draw = |len: usize| {
        (0..len)
            .map(|_| rng.standard_normal())
            .collect::<Vec<f64>>()
    };
    let corruption = draw(n * c * d);
    let augmentation = draw(n * t * d);
    let set = EmbeddingSet::new(n, c, t, d, corruption.clone(), augmentation.clone()).unwrap();
    let cos = |u: &[f64], v: &[f64]| {
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        1.0 - dot / (nu * nv)
    };
    let mut minima = Vec::new();
    for i in 0..n {
        for j in 0..c {
            let u = &corruption[(i * c + j) * d..(i * c + j + 1) * d];
            let best = (0..t)
                .map(|k| cos(u, &augmentation[(i * t + k) * d..(i * t + k + 1) * d]))
                .fold(f64::INFINITY, f64::min);
            minima.push(best);
        }
    }
    let oracle = minima.iter().sum::<f64>() / minima.len() as f64;
    let got = min_distance_fitness(&set);
    minima.sort_by(f64::total_cmp);
    let rank = |p: f64| minima[((p / 100.0 * minima.len() as f64).ceil() as usize).max(1) - 1];
    let report = FitnessReport::from_set(&set);
    let table = report.table("prime");
    let expected_row = format!(
        "| prime | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |",
        rank(5.0) * 1e3,
        rank(10.0) * 1e3,
        rank(25.0) * 1e3,
        rank(50.0) * 1e3,
        rank(75.0) * 1e3
    );
    let layout =
        table.contains("| Method | 5% | 10% | 25% | 50% | 75% |") && table.contains(&expected_row);
    outcome(
        (got - oracle).abs() <= 1e-12 && layout,
        format!("N=5 C=4 T=6: fitness {got:.15} vs oracle {oracle:.15}; table row {expected_row}"),
    )
}

fn throughput() -> Outcome {
    let small = bench_throughput(&PrimeConfig::cifar(), 32, 32, 1000, 1).unwrap();
    let large = bench_throughput(&PrimeConfig::imagenet(), 224, 224, 60, 1).unwrap();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let scaling = if cores >= 4 {
        let one = bench_throughput(&PrimeConfig::cifar(), 32, 32, 2000, 1).unwrap();
        let two = bench_throughput(&PrimeConfig::cifar(), 32, 32, 2000, 2).unwrap();
        let ratio = two.images_per_sec / one.images_per_sec;
        format!("; 2-vs-1 thread ratio {ratio:.2}")
    } else {
        format!("; thread scaling not measured on a {cores}-core host")
    };
    outcome(
        small.images_per_sec >= 500.0 && large.images_per_sec >= 15.0,
        format!(
            "single thread: 32x32 {:.0}/s (budget 1000, asserted >= 500), 224x224 {:.1}/s (budget 30, asserted >= 15){scaling}",
            small.images_per_sec, large.images_per_sec
        ),
    )
}

type Criterion = (&'static str, f64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("identity law", 10.0, identity_law),
        ("equipartition", 5.0, equipartition),
        ("spatial coefficient law", 10.0, spatial_coefficient_law),
        ("border fixing", 10.0, border_fixing),
        ("color endpoint fixing", 5.0, color_endpoints),
        ("oracle equivalence", 10.0, oracle_equivalence),
        ("algorithm statistics", 30.0, algorithm_statistics),
        ("offline pipeline determinism", 30.0, offline_pipeline),
        ("fitness metric", 1.0, fitness_metric),
        ("throughput budget", 60.0, throughput),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let ok = result.passed && secs <= budget;
        failed += usize::from(!ok);
        println!(
            "{} {name} ({secs:.2} s, budget {budget} s): {}",
            if ok { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
