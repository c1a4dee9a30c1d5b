//! Reproducible experiments on top of `pixbound`: noise synthesis,
//! calibration, prediction, evaluation and sampler benchmarks.
//!
//! Every command is a function of the configuration, the input files and the
//! seed. Images are processed in parallel but always aggregated in sorted
//! path order, and each image draws its noise from its own RNG stream.

// `!(x > 0.0)` is used on purpose so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pixbound::samplers::{diagnostics_observer, ChainStats};
use pixbound::{GaussianLikelihood, ImageGrid, PosteriorModel};

pub use config::{ExperimentConfig, PriorKind, SamplerKind};
pub use error::{CliError, Result};

use error::io_error;

/// Offset separating corruption noise streams from sampler streams.
pub const CORRUPTION_STREAM: u64 = 1 << 32;

/// An input grid and the name its outputs are derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageEntry {
    pub stem: String,
    pub path: PathBuf,
}

/// `.pgm` and `.cif` files directly inside `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<ImageEntry>> {
    let read = fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut out = Vec::new();
    for entry in read {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("pgm" | "cif")) || !path.is_file() {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        out.push(ImageEntry { stem, path });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    if out.is_empty() {
        return Err(io_error(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no .pgm or .cif images"),
        ));
    }
    Ok(out)
}

/// The entry of `entries` named `stem`.
pub fn find_image<'a>(entries: &'a [ImageEntry], stem: &str, dir: &Path) -> Result<&'a ImageEntry> {
    entries.iter().find(|e| e.stem == stem).ok_or_else(|| {
        io_error(
            dir.join(stem),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no matching image"),
        )
    })
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Buffered CSV file whose first line records the config hash.
pub fn csv_file(path: &Path, config_hash: &str) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# config_hash={config_hash}").map_err(|e| io_error(path, e))?;
    Ok(out)
}

pub fn finish(mut out: BufWriter<File>, path: &Path) -> Result<()> {
    out.flush().map_err(|e| io_error(path, e))
}

/// `z = x + sigma xi`, with `xi` from the given stream of `seed`.
pub fn corrupt_grid(x: &ImageGrid, sigma: f64, seed: u64, stream: u64) -> ImageGrid {
    let mut noise = pixbound::samplers::NoiseSource::new(seed, stream);
    let (h, w) = x.dims();
    ImageGrid::from_fn(h, w, |i, j| x.get(i, j) + sigma * noise.standard_normal())
}

/// Centred `side x side` crop; images smaller than `side` (or `side = 0`)
/// are returned unchanged.
pub fn center_crop(x: &ImageGrid, side: usize) -> ImageGrid {
    let (h, w) = x.dims();
    if side == 0 || h < side || w < side {
        return x.clone();
    }
    let (i0, j0) = ((h - side) / 2, (w - side) / 2);
    ImageGrid::from_fn(side, side, |i, j| x.get(i0 + i, j0 + j))
}

pub fn posterior_model(cfg: &ExperimentConfig, z: ImageGrid) -> Result<PosteriorModel> {
    Ok(PosteriorModel::new(
        GaussianLikelihood::new(cfg.noise_sigma, z)?,
        cfg.build_prior()?,
        cfg.lambda(),
    )?)
}

/// Runs the configured chain on observation `z`. With diagnostics enabled
/// the chain log goes to `diagnostics`.
pub fn sample_posterior(
    cfg: &ExperimentConfig,
    z: &ImageGrid,
    stream: u64,
    diagnostics: Option<&Path>,
) -> Result<ChainStats> {
    let model = posterior_model(cfg, z.clone())?;
    let sampler = cfg.sampler(stream);
    match diagnostics {
        Some(path) if cfg.diagnostics_every > 0 => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            let mut out = BufWriter::new(file);
            let mut observer = diagnostics_observer(&model, cfg.diagnostics_every, &mut out)?;
            let stats = sampler.run(&model, Some(&mut observer))?;
            drop(observer);
            out.flush().map_err(|e| io_error(path, e))?;
            Ok(stats)
        }
        _ => Ok(sampler.run(&model, None)?),
    }
}

/// File-name form of a quantile level, e.g. `0.9`.
pub fn q_label(q: f64) -> String {
    format!("{q}")
}

/// Loads `config` (or the defaults), then applies `KEY=VALUE` overrides in
/// order, then the dedicated seed, quantile and pooling flags.
pub fn resolve_config(
    config: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
    q: &[f64],
    pooling: Option<&str>,
) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for item in sets {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override '{item}' is not KEY=VALUE")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if !q.is_empty() {
        cfg.q = q.to_vec();
    }
    if let Some(p) = pooling {
        cfg.set("pooling", p)?;
    }
    Ok(cfg)
}
