//! Empirical coverage and the mutual information between errors and
//! variance estimates.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

use super::records::CalibrationRecord;

/// Fraction of pixels whose error is bounded by the predicted quantile.
pub fn coverage(s_map: &ImageGrid, q_map: &ImageGrid) -> Result<f64> {
    s_map.ensure_same_shape(q_map)?;
    let hits = s_map
        .as_slice()
        .iter()
        .zip(q_map.as_slice())
        .filter(|(s, q)| s <= q)
        .count();
    Ok(hits as f64 / s_map.len() as f64)
}

/// Dataset coverage: the mean of per-image coverages.
pub fn dataset_coverage(per_image: &[f64]) -> f64 {
    if per_image.is_empty() {
        return f64::NAN;
    }
    per_image.iter().sum::<f64>() / per_image.len() as f64
}

/// Histogram settings for [`mutual_information`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiOptions {
    /// Cells per axis.
    pub bins: usize,
    pub min_records: usize,
    /// Adds the Miller-Madow term `(m_s + m_t - m_st - 1) / 2N` over the
    /// occupied marginal and joint cell counts, removing the first-order
    /// upward bias of the plug-in sum on independent data.
    pub bias_correction: bool,
}

impl Default for MiOptions {
    fn default() -> Self {
        Self {
            bins: 64,
            min_records: 1000,
            bias_correction: true,
        }
    }
}

/// Log of `v`, with zeros clamped to the smallest positive value present.
fn log_axis(values: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let floor = values
        .clone()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    // all zero: any constant works
    let floor = if floor.is_finite() { floor } else { 1.0 };
    values.map(|v| v.max(floor).ln()).collect()
}

fn cell_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0; values.len()];
    }
    let scale = bins as f64 / (hi - lo);
    values
        .iter()
        .map(|v| (((v - lo) * scale) as usize).min(bins - 1))
        .collect()
}

/// Estimate (nats) of `I(S; T_hat)` from a 2-D histogram over the
/// log-transformed occupied range of both variables. Negative corrected
/// estimates are clamped to zero.
pub fn mutual_information(records: &[CalibrationRecord], options: MiOptions) -> Result<f64> {
    if options.bins == 0 {
        return Err(Error::config("mutual information needs at least one cell per axis"));
    }
    if records.len() < options.min_records {
        return Err(Error::Statistical(format!(
            "{} records, mutual information needs at least {}",
            records.len(),
            options.min_records
        )));
    }
    if records.is_empty() {
        return Ok(0.0);
    }
    let b = options.bins;
    let s = cell_indices(&log_axis(records.iter().map(|r| r.s())), b);
    let t = cell_indices(&log_axis(records.iter().map(|r| r.t_hat())), b);
    let mut joint = vec![0u64; b * b];
    let mut ps = vec![0u64; b];
    let mut pt = vec![0u64; b];
    for (&i, &j) in s.iter().zip(&t) {
        joint[i * b + j] += 1;
        ps[i] += 1;
        pt[j] += 1;
    }
    let n = records.len() as f64;
    let mut mi = 0.0;
    for i in 0..b {
        for j in 0..b {
            let c = joint[i * b + j];
            if c == 0 {
                continue;
            }
            let pij = c as f64 / n;
            mi += pij * (pij * n * n / (ps[i] as f64 * pt[j] as f64)).ln();
        }
    }
    if options.bias_correction {
        let occupied = |c: &[u64]| c.iter().filter(|&&c| c > 0).count() as f64;
        mi += (occupied(&ps) + occupied(&pt) - occupied(&joint) - 1.0) / (2.0 * n);
    }
    Ok(mi.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_extremes() {
        let s = ImageGrid::from_fn(3, 3, |i, j| 0.1 * (i + j) as f64 + 0.01);
        assert_eq!(coverage(&s, &ImageGrid::filled(3, 3, 1.0)).unwrap(), 1.0);
        assert_eq!(coverage(&s, &ImageGrid::zeros(3, 3)).unwrap(), 0.0);
        let half = ImageGrid::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(coverage(&ImageGrid::new(1, 2, vec![0.5, 0.6]).unwrap(), &half).unwrap(), 0.5);
        assert!(coverage(&s, &ImageGrid::zeros(2, 2)).is_err());
        assert_eq!(dataset_coverage(&[1.0, 0.5]), 0.75);
    }

    #[test]
    fn deterministic_relation_gives_log_of_cells() {
        // 8 equally likely values spread over distinct cells
        let records: Vec<_> = (0..8000)
            .map(|i| {
                let v = 2f64.powi(i % 8) * 1e-3;
                CalibrationRecord::new(v, v).unwrap()
            })
            .collect();
        let plug_in = MiOptions {
            bias_correction: false,
            ..MiOptions::default()
        };
        let mi = mutual_information(&records, plug_in).unwrap();
        assert!((mi - 8f64.ln()).abs() < 1e-12, "{mi}");
        let corrected = mutual_information(&records, MiOptions::default()).unwrap();
        assert!((corrected - mi - 7.0 / 16000.0).abs() < 1e-12);
    }

    #[test]
    fn constant_input_has_no_information() {
        let records = vec![CalibrationRecord::new(0.0, 0.0).unwrap(); 2000];
        assert_eq!(mutual_information(&records, MiOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn correction_removes_independence_bias() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let records: Vec<_> = (0..20_000)
            .map(|_| CalibrationRecord::new(rng.random::<f64>() + 0.01, rng.random::<f64>() + 0.01).unwrap())
            .collect();
        let opts = MiOptions {
            bins: 16,
            ..MiOptions::default()
        };
        let raw = mutual_information(&records, MiOptions { bias_correction: false, ..opts }).unwrap();
        let corrected = mutual_information(&records, opts).unwrap();
        // E[raw] is about (16 - 1)^2 / 2N
        assert!(raw > 0.002 && raw < 0.01, "{raw}");
        assert!(corrected < 0.002, "{corrected}");
    }

    #[test]
    fn too_few_records() {
        let records = vec![CalibrationRecord::new(0.1, 0.1).unwrap(); 10];
        assert!(matches!(
            mutual_information(&records, MiOptions::default()),
            Err(Error::Statistical(_))
        ));
    }
}
