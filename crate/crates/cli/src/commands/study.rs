//! Sampler accuracy against belief propagation on the discretized TV model.
//!
//! MD is the pixel average of the absolute difference between the chain's
//! running moments and the BP moments.

use std::io::Write;
use std::path::Path;

use pixbound::bp::{bp_moments, bp_sweep, compare_to_chain, BpOptions, LabelSpace, Marginals, MrfModel};
use pixbound::io::{read_grid, write_grid};
use pixbound::samplers::ChainEvent;
use pixbound::ImageGrid;

use crate::error::{io_error, CliError, Result};
use crate::{
    center_crop, corrupt_grid, create_dir, csv_file, finish, list_images, posterior_model, ExperimentConfig, PriorKind,
    CORRUPTION_STREAM,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointRow {
    pub thinning: usize,
    /// Chain iteration, counting burn-in.
    pub iteration: usize,
    /// Kept samples at this iteration.
    pub samples: u64,
    pub md_mean: f64,
    pub md_var: f64,
}

/// `count` iterations spaced by `factor`, ending at `iterations`:
/// `iterations / factor^(count-1), ..., iterations / factor, iterations`.
pub fn checkpoint_schedule(iterations: usize, count: usize, factor: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count)
        .rev()
        .filter_map(|j| {
            let d = (factor as u128).checked_pow(j as u32)?;
            Some((iterations as u128 / d) as usize)
        })
        .filter(|&k| k > 0)
        .collect();
    out.dedup();
    out
}

/// BP marginals and moments of the TV model for observation `z`.
pub fn bp_reference(cfg: &ExperimentConfig, z: &ImageGrid) -> Result<(Marginals, ImageGrid, ImageGrid)> {
    let labels = LabelSpace::new(cfg.labels)?;
    let mrf = MrfModel::tv_denoising(z, cfg.noise_sigma, cfg.lambda(), labels)?;
    let marginals = bp_sweep(&mrf, BpOptions::new(cfg.bp_iterations).with_damping(cfg.bp_damping))?;
    let (mean, var) = bp_moments(&marginals, labels)?;
    Ok((marginals, mean, var))
}

fn require_tv_model(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.prior == PriorKind::Foe {
        return Err(CliError::config("BP comparison needs prior tv or huber_tv"));
    }
    Ok(())
}

/// Runs the configured chain on `z` with thinning `thinning` and records
/// the MD to the BP moments at each checkpoint.
pub fn convergence_rows(
    cfg: &ExperimentConfig,
    z: &ImageGrid,
    bp_mean: &ImageGrid,
    bp_var: &ImageGrid,
    thinning: usize,
) -> Result<Vec<CheckpointRow>> {
    require_tv_model(cfg)?;
    let mut cfg = cfg.clone();
    cfg.thinning = thinning;
    cfg.validate()?;
    let model = posterior_model(&cfg, z.clone())?;
    let checkpoints = checkpoint_schedule(cfg.iterations, cfg.checkpoints, cfg.checkpoint_factor);
    let mut rows = Vec::new();
    let mut observer = |ev: ChainEvent<'_>| -> pixbound::Result<()> {
        if checkpoints.binary_search(&ev.iteration).is_ok() && ev.stats.count() > 0 {
            let gap = compare_to_chain(bp_mean, bp_var, ev.stats)?;
            rows.push(CheckpointRow {
                thinning,
                iteration: ev.iteration,
                samples: ev.stats.count(),
                md_mean: gap.mean,
                md_var: gap.variance,
            });
        }
        Ok(())
    };
    cfg.sampler(0).run(&model, Some(&mut observer))?;
    Ok(rows)
}

/// Ground truth and observation used by the BP studies.
fn study_image(cfg: &ExperimentConfig) -> Result<(ImageGrid, ImageGrid)> {
    let path = match &cfg.bp_image {
        Some(p) => p.clone(),
        None => list_images(&cfg.clean_dir)?.remove(0).path,
    };
    let x = center_crop(&read_grid(&path)?, cfg.crop);
    let z = corrupt_grid(&x, cfg.noise_sigma, cfg.seed, CORRUPTION_STREAM);
    Ok((x, z))
}

fn write_rows(path: &Path, hash: &str, rows: &[CheckpointRow]) -> Result<()> {
    let mut out = csv_file(path, hash)?;
    let io = |e| io_error(path, e);
    writeln!(out, "thinning,iteration,samples,md_mean,md_var").map_err(io)?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.thinning, r.iteration, r.samples, r.md_mean, r.md_var).map_err(io)?;
    }
    finish(out, path)
}

fn export_marginals(cfg: &ExperimentConfig, marginals: &Marginals, out_dir: &Path) -> Result<()> {
    let dir = out_dir.join("marginals");
    create_dir(&dir)?;
    for k in 0..marginals.label_count() {
        write_grid(dir.join(format!("label_{k:04}.cif")), &marginals.label_grid(k))?;
    }
    let path = out_dir.join(format!("marginals_row{}.csv", cfg.marginal_row));
    let mut out = csv_file(&path, &cfg.hash())?;
    marginals.write_row_csv(LabelSpace::new(cfg.labels)?, cfg.marginal_row, &mut out)?;
    finish(out, &path)
}

/// Writes `bp_compare.csv` for the configured chain and thinning.
pub fn bp_compare(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<CheckpointRow>> {
    cfg.validate()?;
    require_tv_model(cfg)?;
    let (_, z) = study_image(cfg)?;
    create_dir(out_dir)?;
    let (marginals, mean, var) = bp_reference(cfg, &z)?;
    if cfg.export_marginals {
        export_marginals(cfg, &marginals, out_dir)?;
    }
    let rows = convergence_rows(cfg, &z, &mean, &var, cfg.thinning)?;
    write_rows(&out_dir.join("bp_compare.csv"), &cfg.hash(), &rows)?;
    Ok(rows)
}

/// Repeats the comparison for every entry of `thinning_list` with the same
/// chain noise and writes `thinning_study.csv`.
pub fn thinning_study(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<CheckpointRow>> {
    cfg.validate()?;
    require_tv_model(cfg)?;
    let (_, z) = study_image(cfg)?;
    create_dir(out_dir)?;
    let (_, mean, var) = bp_reference(cfg, &z)?;
    let mut rows = Vec::new();
    for &h in &cfg.thinning_list {
        rows.extend(convergence_rows(cfg, &z, &mean, &var, h)?);
    }
    write_rows(&out_dir.join("thinning_study.csv"), &cfg.hash(), &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_checkpoints() {
        assert_eq!(checkpoint_schedule(50_000, 6, 4), vec![48, 195, 781, 3125, 12_500, 50_000]);
        assert_eq!(checkpoint_schedule(10, 6, 4), vec![2, 10]);
        assert_eq!(checkpoint_schedule(7, 1, 2), vec![7]);
    }
}
