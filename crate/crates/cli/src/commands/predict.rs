use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use pixbound::conformal::CalibrationTables;
use pixbound::io::{read_grid, write_grid};
use rayon::prelude::*;

use super::calibrate::table_path;
use crate::error::{io_error, CliError, Result};
use crate::{create_dir, list_images, q_label, sample_posterior, ExperimentConfig};

/// Stream offset keeping prediction chains apart from calibration chains.
pub const PREDICTION_STREAM: u64 = 1 << 33;

/// For every observation in `noisy_dir` writes `<stem>.xhat.cif`,
/// `<stem>.that.cif` and `<stem>.shat_q<q>.cif` for each level in `cfg.q`,
/// using the tables in `table_dir`.
pub fn predict(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>> {
    cfg.validate()?;
    let tables = cfg
        .q
        .iter()
        .map(|&q| {
            let path = table_path(&cfg.table_dir, q);
            let file = File::open(&path).map_err(|e| io_error(&path, e))?;
            let table = CalibrationTables::read_csv(BufReader::new(file))?;
            if table.q() != q {
                return Err(CliError::config(format!(
                    "{} holds q = {}, expected {q}",
                    path.display(),
                    table.q()
                )));
            }
            Ok((q, table))
        })
        .collect::<Result<Vec<_>>>()?;
    let noisy = list_images(&cfg.noisy_dir)?;
    create_dir(out_dir)?;
    let diag_dir = out_dir.join("diagnostics");
    if cfg.diagnostics_every > 0 {
        create_dir(&diag_dir)?;
    }

    noisy
        .par_iter()
        .enumerate()
        .map(|(k, entry)| {
            let z = read_grid(&entry.path)?;
            let diag = diag_dir.join(format!("{}.predict.csv", entry.stem));
            let stats = sample_posterior(cfg, &z, PREDICTION_STREAM + k as u64, Some(&diag))?;
            let t_hat = stats.variance();
            write_grid(out_dir.join(format!("{}.xhat.cif", entry.stem)), &stats.mean())?;
            write_grid(out_dir.join(format!("{}.that.cif", entry.stem)), &t_hat)?;
            for (q, table) in &tables {
                let s_hat = table.predict_map(&t_hat)?;
                write_grid(out_dir.join(format!("{}.shat_q{}.cif", entry.stem, q_label(*q))), &s_hat)?;
            }
            Ok(entry.stem.clone())
        })
        .collect()
}
