use std::path::Path;

use pixbound::toy1d::{toy_pipeline_check, JointDensity, ToyReport};

use crate::error::Result;
use crate::{create_dir, csv_file, finish, q_label, ExperimentConfig};

/// Smallest squared error on the density grid.
const DENSITY_S_MIN: f64 = 1e-6;

/// Runs the calibration pipeline on the mixture model for every level and
/// writes `toy_q<q>.csv` plus the joint density grid `toy_density.csv`.
pub fn toy(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ToyReport>> {
    cfg.validate()?;
    let spec = cfg.mixture()?;
    create_dir(out_dir)?;
    let hash = cfg.hash();
    let mut reports = Vec::new();
    for &q in &cfg.q {
        let report = toy_pipeline_check(&spec, cfg.toy_m, cfg.toy_n, q, cfg.seed, cfg.binning())?;
        let path = out_dir.join(format!("toy_q{}.csv", q_label(q)));
        let mut out = csv_file(&path, &hash)?;
        report.write_csv(&mut out)?;
        finish(out, &path)?;
        reports.push(report);
    }

    let density = JointDensity::new(&spec)?;
    let (lo, hi) = density.t_range();
    let n = cfg.toy_density_points;
    // largest squared distance between a sample and any component centre
    let reach = spec.centers().iter().fold(0.0f64, |m, c| m.max(c.abs())) * 2.0 + 5.0 * cfg.toy_sigma_x;
    let s_max = reach * reach;
    let s_values: Vec<f64> = (0..n)
        .map(|i| DENSITY_S_MIN * (s_max / DENSITY_S_MIN).powf(i as f64 / (n - 1) as f64))
        .collect();
    let t_values: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect();
    let path = out_dir.join("toy_density.csv");
    let mut out = csv_file(&path, &hash)?;
    density.write_grid_csv(&s_values, &t_values, &mut out)?;
    finish(out, &path)?;
    Ok(reports)
}
