use std::path::{Path, PathBuf};

use pixbound::conformal::{squared_error_map, records_from_maps, write_records_csv, CalibrationTables};
use pixbound::io::read_grid;
use pixbound::ImageGrid;
use rayon::prelude::*;

use crate::error::Result;
use crate::{create_dir, csv_file, find_image, finish, list_images, q_label, sample_posterior, ExperimentConfig};

/// Location of the table for level `q` inside `dir`.
pub fn table_path(dir: &Path, q: f64) -> PathBuf {
    dir.join(format!("table_q{}.csv", q_label(q)))
}

/// Samples the posterior of every observation in `noisy_dir`, pairs it with
/// the ground truth of the same name and writes `records.csv` plus one
/// `table_q<q>.csv` per level. Returns the tables in `cfg.q` order.
pub fn calibrate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<CalibrationTables>> {
    cfg.validate()?;
    let noisy = list_images(&cfg.noisy_dir)?;
    let clean = list_images(&cfg.clean_dir)?;
    let pairs = noisy
        .iter()
        .map(|n| Ok((n, find_image(&clean, &n.stem, &cfg.clean_dir)?)))
        .collect::<Result<Vec<_>>>()?;
    create_dir(out_dir)?;
    let diag_dir = out_dir.join("diagnostics");
    if cfg.diagnostics_every > 0 {
        create_dir(&diag_dir)?;
    }

    let maps: Vec<(ImageGrid, ImageGrid)> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, (noisy, clean))| {
            let z = read_grid(&noisy.path)?;
            let x = read_grid(&clean.path)?;
            x.ensure_same_shape(&z)?;
            let diag = diag_dir.join(format!("{}.calibrate.csv", noisy.stem));
            let stats = sample_posterior(cfg, &z, k as u64, Some(&diag))?;
            Ok((squared_error_map(&stats.mean(), &x)?, stats.variance()))
        })
        .collect::<Result<_>>()?;

    let hash = cfg.hash();
    let path = out_dir.join("records.csv");
    let mut out = csv_file(&path, &hash)?;
    let mut records = Vec::new();
    for (s, t) in &maps {
        records.extend(records_from_maps(s, t)?);
    }
    write_records_csv(&records, &mut out)?;
    finish(out, &path)?;

    cfg.q
        .iter()
        .map(|&q| {
            let tables = CalibrationTables::calibrate(cfg.pooling, &maps, cfg.binning(), q, cfg.ess_sup)?;
            let path = table_path(out_dir, q);
            let mut out = csv_file(&path, &hash)?;
            tables.write_csv(&mut out)?;
            finish(out, &path)?;
            Ok(tables)
        })
        .collect()
}
