use std::path::Path;

use pixbound::io::{read_grid, write_grid};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::{center_crop, corrupt_grid, create_dir, list_images, ExperimentConfig, CORRUPTION_STREAM};

/// Crops every image of `clean_dir` and writes `clean/<stem>.cif` and the
/// noisy `noisy/<stem>.cif` under `out_dir`. Returns the processed stems.
pub fn corrupt(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>> {
    // sigma = 0 is allowed here and copies the crops
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(CliError::config("noise_sigma must be nonnegative"));
    }
    let images = list_images(&cfg.clean_dir)?;
    let (clean_out, noisy_out) = (out_dir.join("clean"), out_dir.join("noisy"));
    create_dir(&clean_out)?;
    create_dir(&noisy_out)?;
    images
        .par_iter()
        .enumerate()
        .map(|(k, entry)| {
            let x = center_crop(&read_grid(&entry.path)?, cfg.crop);
            let z = if cfg.noise_sigma == 0.0 {
                x.clone()
            } else {
                corrupt_grid(&x, cfg.noise_sigma, cfg.seed, CORRUPTION_STREAM + k as u64)
            };
            write_grid(clean_out.join(format!("{}.cif", entry.stem)), &x)?;
            write_grid(noisy_out.join(format!("{}.cif", entry.stem)), &z)?;
            Ok(entry.stem.clone())
        })
        .collect()
}
