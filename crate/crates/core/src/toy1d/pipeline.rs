//! End-to-end conformal calibration on synthetic draws of the mixture model.

use std::io::Write;

use crate::conformal::{build_table, BinningParams, BinningScheme, CalibrationRecord};
use crate::error::{Error, Result};
use crate::samplers::NoiseSource;

use super::{bisect, error_given_z, posterior_moments, ErrorDistribution, MixtureSpec};

/// Nodes of the `z` quadrature behind [`exact_bin_quantile`].
const QUADRATURE_NODES: usize = 40_000;

/// `count` independent `(x, z)` draws.
pub fn sample_pairs(spec: &MixtureSpec, count: usize, noise: &mut NoiseSource) -> Vec<(f64, f64)> {
    (0..count).map(|_| spec.sample(noise.rng())).collect()
}

/// Records `(s, t)` with the exact posterior mean and variance standing in
/// for the sampled estimates.
pub fn sample_records(spec: &MixtureSpec, count: usize, noise: &mut NoiseSource) -> Vec<CalibrationRecord> {
    sample_pairs(spec, count, noise)
        .into_iter()
        .map(|(x, z)| {
            let p = posterior_moments(spec, z);
            CalibrationRecord::new((x - p.mean).powi(2), p.var).expect("finite draws")
        })
        .collect()
}

/// Law of `S` conditioned on `T` in `[lo, hi)`, from a `z` quadrature of
/// `P(S <= s | Z = z)` over `{z : t(z) in [lo, hi)}`.
#[derive(Debug, Clone)]
pub struct ExactBinLaw {
    nodes: Vec<(f64, ErrorDistribution)>,
    total: f64,
}

impl ExactBinLaw {
    /// `None` if no quadrature node falls in the bin.
    pub fn new(spec: &MixtureSpec, lo: f64, hi: f64) -> Option<Self> {
        let (mean, sd) = spec.observation_moments();
        let (a, b) = (mean - 8.0 * sd, mean + 8.0 * sd);
        let h = (b - a) / QUADRATURE_NODES as f64;
        let mut nodes = Vec::new();
        for i in 0..QUADRATURE_NODES {
            let z = a + (i as f64 + 0.5) * h;
            let dist = error_given_z(spec, z);
            let t = dist.posterior().var;
            if t >= lo && t < hi {
                nodes.push((spec.observation_pdf(z), dist));
            }
        }
        let total: f64 = nodes.iter().map(|n| n.0).sum();
        if nodes.is_empty() || total <= 0.0 {
            return None;
        }
        Some(Self { nodes, total })
    }

    pub fn cdf(&self, s: f64) -> f64 {
        self.nodes.iter().map(|(w, d)| w * d.cdf(s)).sum::<f64>() / self.total
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let mut upper = self.nodes.iter().map(|n| n.1.posterior().var).fold(0.0, f64::max);
        while self.cdf(upper) < q {
            upper *= 2.0;
        }
        bisect(|s| self.cdf(s) - q, 0.0, upper)
    }
}

/// The `q`-quantile of [`ExactBinLaw`].
pub fn exact_bin_quantile(spec: &MixtureSpec, lo: f64, hi: f64, q: f64) -> Option<f64> {
    ExactBinLaw::new(spec, lo, hi).map(|law| law.quantile(q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyBin {
    pub lo: f64,
    pub hi: f64,
    pub n_calibration: usize,
    pub n_test: usize,
    pub conformal_q: f64,
    /// `NaN` when no part of the model falls in the bin.
    pub exact_q: f64,
    /// `NaN` when the bin holds no test records.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyReport {
    pub q: f64,
    pub coverage: f64,
    pub bins: Vec<ToyBin>,
}

impl ToyReport {
    /// `q,coverage` block followed by one row per bin.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let io = |e| Error::io("<toy report>", e);
        writeln!(out, "q,coverage").map_err(io)?;
        writeln!(out, "{},{}", self.q, self.coverage).map_err(io)?;
        writeln!(out, "bin_lo,bin_hi,n,n_test,conformal_q,exact_q,per_bin_coverage").map_err(io)?;
        for b in &self.bins {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                b.lo, b.hi, b.n_calibration, b.n_test, b.conformal_q, b.exact_q, b.coverage
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// Calibrates on `m` draws and evaluates on `n` fresh draws, both seeded from
/// `seed` on separate streams. The error is unbounded, so bins without a
/// conformal rank predict `inf`.
pub fn toy_pipeline_check(
    spec: &MixtureSpec,
    m: usize,
    n: usize,
    q: f64,
    seed: u64,
    binning: BinningParams,
) -> Result<ToyReport> {
    if m < 100 || n < 100 {
        return Err(Error::config("toy pipeline needs at least 100 calibration and 100 test draws"));
    }
    let calibration = sample_records(spec, m, &mut NoiseSource::new(seed, 0));
    let test = sample_records(spec, n, &mut NoiseSource::new(seed, 1));
    let t: Vec<f64> = calibration.iter().map(|r| r.t_hat()).collect();
    let scheme = BinningScheme::fit(&t, binning.interior_bins, binning.scale)?;
    let table = build_table(&calibration, &scheme, q, f64::INFINITY)?;

    let k = scheme.bin_count();
    let mut n_test = vec![0usize; k];
    let mut hits = vec![0usize; k];
    for r in &test {
        let b = scheme.bin_index(r.t_hat());
        n_test[b] += 1;
        if r.s() <= table.quantiles()[b] {
            hits[b] += 1;
        }
    }
    let bins = (0..k)
        .map(|b| {
            let (lo, hi) = scheme.bin_range(b);
            ToyBin {
                lo,
                hi,
                n_calibration: table.counts()[b],
                n_test: n_test[b],
                conformal_q: table.quantiles()[b],
                exact_q: exact_bin_quantile(spec, lo, hi, q).unwrap_or(f64::NAN),
                coverage: if n_test[b] == 0 {
                    f64::NAN
                } else {
                    hits[b] as f64 / n_test[b] as f64
                },
            }
        })
        .collect();
    Ok(ToyReport {
        q,
        coverage: hits.iter().sum::<usize>() as f64 / n as f64,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::BinScale;

    #[test]
    fn single_component_bin_quantile_is_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let spec = MixtureSpec::new(vec![0.0], vec![0.2], vec![1.0], 0.2).unwrap();
        let q = exact_bin_quantile(&spec, 0.0, 1.0, 0.9).unwrap();
        let exact = 0.1 * ChiSquared::new(1.0).unwrap().inverse_cdf(0.9);
        assert!((q - exact).abs() < 1e-9);
        assert!(exact_bin_quantile(&spec, 0.5, 1.0, 0.9).is_none());
    }

    #[test]
    fn pipeline_is_deterministic_and_covers() {
        let spec = MixtureSpec::reference();
        let params = BinningParams {
            interior_bins: 8,
            scale: BinScale::Logarithmic,
        };
        let a = toy_pipeline_check(&spec, 5000, 2000, 0.9, 3, params).unwrap();
        let b = toy_pipeline_check(&spec, 5000, 2000, 0.9, 3, params).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert!(a.coverage > 0.87, "{}", a.coverage);
        assert_eq!(a.bins.iter().map(|b| b.n_calibration).sum::<usize>(), 5000);
        assert_eq!(a.bins.iter().map(|b| b.n_test).sum::<usize>(), 2000);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3 + a.bins.len());
        assert!(toy_pipeline_check(&spec, 50, 2000, 0.9, 3, params).is_err());
    }

    #[test]
    fn exact_quantile_predictor_reaches_nominal_coverage() {
        let spec = MixtureSpec::reference();
        let test = sample_records(&spec, 20_000, &mut NoiseSource::new(11, 0));
        let pairs = sample_pairs(&spec, 20_000, &mut NoiseSource::new(11, 0));
        let covered = pairs
            .iter()
            .zip(&test)
            .filter(|((_, z), r)| r.s() <= error_given_z(&spec, *z).quantile(0.9).unwrap())
            .count();
        let coverage = covered as f64 / 20_000.0;
        assert!((coverage - 0.9).abs() < 4.0 * (0.09f64 / 20_000.0).sqrt(), "{coverage}");
    }
}
