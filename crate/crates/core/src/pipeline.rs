//! Offline dataset augmentation, manifest replay and preview grids.
//!
//! `augment_dataset` reads every regular file of the input directory in
//! file-name order. File `n` (0-based, counting undecodable files too) gets
//! copies `k = 1..=copies`, each drawn with `RngState::derive(seed, &[n, k])`
//! and written as `<file name>.k<k>.png`. The manifest `manifest.json` in the
//! output directory lists every output with its recipe and the SHA-256 of
//! the written PNG bytes; replaying a recipe on its decoded source and
//! re-encoding reproduces those bytes.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{apply_recipe, prime_augment, Recipe};
use crate::config::PrimeConfig;
use crate::error::{invalid, Error, Result};
use crate::image::{Image, CHANNELS};
use crate::rng::RngState;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_SEPARATOR: usize = 2;

/// Where an entry's recipe lives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeRef {
    /// JSON file name relative to the output directory.
    File(String),
    Inline(Recipe),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source: PathBuf,
    pub image_index: u64,
    pub copy: u64,
    /// File name relative to the output directory.
    pub output: String,
    pub recipe: RecipeRef,
    /// Hex SHA-256 of the output file bytes.
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedInput {
    pub source: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub master_seed: u64,
    pub config: PrimeConfig,
    pub copies: u64,
    pub entries: Vec<ManifestEntry>,
    pub skipped: Vec<SkippedInput>,
    /// Set when an I/O failure stopped the run; `entries` then lists only
    /// the outputs that were fully written.
    pub partial: bool,
}

impl Manifest {
    pub fn load(output_dir: impl AsRef<Path>) -> Result<Self> {
        let path = output_dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported manifest schema version {}",
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }

    fn write(&self, output_dir: &Path) -> Result<()> {
        let path = output_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Resolves an entry's recipe, reading it from disk if stored by reference.
    pub fn recipe(&self, output_dir: impl AsRef<Path>, entry: &ManifestEntry) -> Result<Recipe> {
        match &entry.recipe {
            RecipeRef::Inline(r) => Ok(r.clone()),
            RecipeRef::File(name) => {
                let path = output_dir.as_ref().join(name);
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Recipe::from_json(&text)
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AugmentOptions {
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    /// Embed recipes in the manifest instead of writing one file per output.
    pub inline_recipes: bool,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn list_inputs(input_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(input_dir).map_err(|e| Error::io(input_dir, e))? {
        let entry = entry.map_err(|e| Error::io(input_dir, e))?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(invalid!("jobs must be >= 1"));
        }
        builder = builder.num_threads(j);
    }
    builder
        .build()
        .map_err(|e| invalid!("cannot start worker pool: {e}"))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

enum Outcome {
    Done(Vec<ManifestEntry>),
    Skipped(SkippedInput),
    Failed(Vec<ManifestEntry>, Error),
}

fn augment_one(
    index: u64,
    source: &Path,
    output_dir: &Path,
    copies: u64,
    cfg: &PrimeConfig,
    seed: u64,
    inline: bool,
) -> Outcome {
    let img = match Image::load(source) {
        Ok(img) => img,
        Err(e) => {
            return Outcome::Skipped(SkippedInput {
                source: source.to_path_buf(),
                reason: e.to_string(),
            })
        }
    };
    let name = file_name(source);
    let mut entries = Vec::with_capacity(copies as usize);
    for copy in 1..=copies {
        let rng = RngState::derive(seed, &[index, copy]);
        let (out, recipe) = match prime_augment(&img, cfg, &rng) {
            Ok(r) => r,
            Err(e) => {
                return Outcome::Skipped(SkippedInput {
                    source: source.to_path_buf(),
                    reason: e.to_string(),
                })
            }
        };
        let written = (|| -> Result<ManifestEntry> {
            let bytes = out.encode_png()?;
            let output = format!("{name}.k{copy}.png");
            let path = output_dir.join(&output);
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            let recipe = if inline {
                RecipeRef::Inline(recipe)
            } else {
                let recipe_name = format!("{name}.k{copy}.recipe.json");
                let path = output_dir.join(&recipe_name);
                fs::write(&path, recipe.to_json()).map_err(|e| Error::io(&path, e))?;
                RecipeRef::File(recipe_name)
            };
            Ok(ManifestEntry {
                source: source.to_path_buf(),
                image_index: index,
                copy,
                output,
                recipe,
                sha256: sha256_hex(&bytes),
            })
        })();
        match written {
            Ok(entry) => entries.push(entry),
            Err(e) => return Outcome::Failed(entries, e),
        }
    }
    Outcome::Done(entries)
}

/// Augments a directory with default options.
pub fn augment_dataset(
    input_dir: impl AsRef<Path>,
    output_dir: impl AsRef<Path>,
    copies: u64,
    cfg: &PrimeConfig,
    master_seed: u64,
) -> Result<Manifest> {
    augment_dataset_with(
        input_dir,
        output_dir,
        copies,
        cfg,
        master_seed,
        &AugmentOptions::default(),
    )
}

/// Writes `copies` augmented versions of every decodable image plus the
/// manifest. On an I/O failure the manifest is still written, flagged
/// partial, and the failure is returned.
pub fn augment_dataset_with(
    input_dir: impl AsRef<Path>,
    output_dir: impl AsRef<Path>,
    copies: u64,
    cfg: &PrimeConfig,
    master_seed: u64,
    options: &AugmentOptions,
) -> Result<Manifest> {
    let (input_dir, output_dir) = (input_dir.as_ref(), output_dir.as_ref());
    if copies == 0 {
        return Err(invalid!("copies must be >= 1"));
    }
    cfg.validate()?;
    let inputs = list_inputs(input_dir)?;
    if inputs.is_empty() {
        return Err(Error::Data(format!(
            "{} contains no files",
            input_dir.display()
        )));
    }
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let outcomes: Vec<Outcome> = pool(options.jobs)?.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, src)| {
                augment_one(
                    i as u64,
                    src,
                    output_dir,
                    copies,
                    cfg,
                    master_seed,
                    options.inline_recipes,
                )
            })
            .collect()
    });

    let mut manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        master_seed,
        config: cfg.clone(),
        copies,
        entries: Vec::new(),
        skipped: Vec::new(),
        partial: false,
    };
    let mut failure = None;
    for outcome in outcomes {
        match outcome {
            Outcome::Done(entries) => manifest.entries.extend(entries),
            Outcome::Skipped(s) => manifest.skipped.push(s),
            Outcome::Failed(entries, e) => {
                manifest.entries.extend(entries);
                manifest.partial = true;
                failure.get_or_insert(e);
            }
        }
    }
    if let Some(e) = failure {
        manifest.write(output_dir)?;
        return Err(e);
    }
    if manifest.entries.is_empty() {
        return Err(Error::Data(format!(
            "{} contains no decodable images",
            input_dir.display()
        )));
    }
    manifest.write(output_dir)?;
    Ok(manifest)
}

/// Outcome of replaying a manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    /// `output: reason` for every entry that did not reproduce.
    pub mismatches: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Replays every entry of the manifest in `output_dir` from its source and
/// compares the re-encoded bytes with both the stored checksum and the file
/// on disk.
pub fn verify_manifest(output_dir: impl AsRef<Path>, jobs: Option<usize>) -> Result<VerifyReport> {
    let output_dir = output_dir.as_ref();
    let manifest = Manifest::load(output_dir)?;
    let results: Vec<Option<String>> = pool(jobs)?.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let check = || -> Result<Option<String>> {
                    let recipe = manifest.recipe(output_dir, entry)?;
                    let img = Image::load(&entry.source)?;
                    let bytes = apply_recipe(&img, &recipe)?.encode_png()?;
                    if sha256_hex(&bytes) != entry.sha256 {
                        return Ok(Some(
                            "replayed bytes differ from the recorded checksum".into(),
                        ));
                    }
                    let path = output_dir.join(&entry.output);
                    let stored = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                    if stored != bytes {
                        return Ok(Some("file on disk differs from the replay".into()));
                    }
                    Ok(None)
                };
                match check() {
                    Ok(None) => None,
                    Ok(Some(reason)) => Some(format!("{}: {reason}", entry.output)),
                    Err(e) => Some(format!("{}: {e}", entry.output)),
                }
            })
            .collect()
    });
    Ok(VerifyReport {
        checked: results.len(),
        mismatches: results.into_iter().flatten().collect(),
    })
}

/// `rows × cols` tiles of independent draws of `img`, row-major, with the
/// clean image top-left. Tile `t` uses `RngState::derive(seed, &[t])`.
/// Tiles are separated by `separator` white pixels.
pub fn compose_preview(
    img: &Image,
    cfg: &PrimeConfig,
    seed: u64,
    rows: usize,
    cols: usize,
    separator: usize,
) -> Result<Image> {
    if rows == 0 || cols == 0 {
        return Err(invalid!(
            "preview grid must be at least 1x1, got {rows}x{cols}"
        ));
    }
    let (h, w) = (img.height(), img.width());
    let grid_h = rows * h + (rows - 1) * separator;
    let grid_w = cols * w + (cols - 1) * separator;
    let mut grid = Image::filled(grid_h, grid_w, 1.0);
    let tiles: Vec<Image> = (0..rows * cols)
        .into_par_iter()
        .map(|t| {
            if t == 0 {
                Ok(img.clamped())
            } else {
                prime_augment(img, cfg, &RngState::derive(seed, &[t as u64])).map(|(out, _)| out)
            }
        })
        .collect::<Result<_>>()?;
    for (t, tile) in tiles.iter().enumerate() {
        let (r0, c0) = ((t / cols) * (h + separator), (t % cols) * (w + separator));
        for p in 0..h {
            let src = &tile.data()[p * w * CHANNELS..(p + 1) * w * CHANNELS];
            let start = ((r0 + p) * grid_w + c0) * CHANNELS;
            grid.data_mut()[start..start + w * CHANNELS].copy_from_slice(src);
        }
    }
    Ok(grid)
}

/// [`compose_preview`] of an image file with the default separator.
pub fn preview_grid(
    img_path: impl AsRef<Path>,
    cfg: &PrimeConfig,
    seed: u64,
    rows: usize,
    cols: usize,
) -> Result<Image> {
    compose_preview(
        &Image::load(img_path)?,
        cfg,
        seed,
        rows,
        cols,
        DEFAULT_SEPARATOR,
    )
}
