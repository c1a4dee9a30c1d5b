use std::io::Write;
use std::path::Path;

use pixbound::conformal::{coverage, dataset_coverage, mutual_information, records_from_maps, squared_error_map, MiOptions};
use pixbound::io::read_grid;
use pixbound::metrics::{psnr, ssim};
use rayon::prelude::*;

use crate::error::{io_error, Result};
use crate::{create_dir, csv_file, finish, list_images, q_label, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMetrics {
    pub stem: String,
    pub psnr: f64,
    pub ssim: f64,
    /// `NaN` when the image has too few pixels for the histogram.
    pub mutual_information: f64,
    /// One entry per level of `cfg.q`.
    pub coverage: Vec<f64>,
}

fn mean_of_finite(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Scores the predictions in `prediction_dir` against the ground truths in
/// `clean_dir` and writes `metrics.csv` with one row per image and a final
/// `mean` row.
pub fn evaluate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ImageMetrics>> {
    cfg.validate()?;
    let truths = list_images(&cfg.clean_dir)?;
    create_dir(out_dir)?;
    let metrics: Vec<ImageMetrics> = truths
        .par_iter()
        .map(|entry| {
            let x = read_grid(&entry.path)?;
            let pred = |suffix: String| read_grid(cfg.prediction_dir.join(format!("{}.{suffix}.cif", entry.stem)));
            let x_hat = pred("xhat".into())?;
            let t_hat = pred("that".into())?;
            let s = squared_error_map(&x_hat, &x)?;
            let coverage = cfg
                .q
                .iter()
                .map(|q| Ok(coverage(&s, &pred(format!("shat_q{}", q_label(*q)))?)?))
                .collect::<Result<Vec<_>>>()?;
            let mi = match mutual_information(&records_from_maps(&s, &t_hat)?, MiOptions::default()) {
                Ok(v) => v,
                Err(pixbound::Error::Statistical(_)) => f64::NAN,
                Err(e) => return Err(e.into()),
            };
            Ok(ImageMetrics {
                stem: entry.stem.clone(),
                psnr: psnr(&x_hat, &x)?,
                ssim: ssim(&x_hat, &x)?,
                mutual_information: mi,
                coverage,
            })
        })
        .collect::<Result<_>>()?;

    let path = out_dir.join("metrics.csv");
    let mut out = csv_file(&path, &cfg.hash())?;
    let io = |e| io_error(&path, e);
    let levels: Vec<String> = cfg.q.iter().map(|q| format!("coverage_q{}", q_label(*q))).collect();
    writeln!(out, "image,psnr,ssim,mi,{}", levels.join(",")).map_err(io)?;
    for m in &metrics {
        let cov: Vec<String> = m.coverage.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{},{},{},{},{}", m.stem, m.psnr, m.ssim, m.mutual_information, cov.join(",")).map_err(io)?;
    }
    let cov: Vec<String> = (0..cfg.q.len())
        .map(|i| dataset_coverage(&metrics.iter().map(|m| m.coverage[i]).collect::<Vec<_>>()).to_string())
        .collect();
    writeln!(
        out,
        "mean,{},{},{},{}",
        mean_of_finite(metrics.iter().map(|m| m.psnr)),
        mean_of_finite(metrics.iter().map(|m| m.ssim)),
        mean_of_finite(metrics.iter().map(|m| m.mutual_information)),
        cov.join(",")
    )
    .map_err(io)?;
    finish(out, &path)?;
    Ok(metrics)
}
