//! One-dimensional Gaussian-mixture denoising model with closed-form
//! posterior.
//!
//! `X ~ sum_k alpha_k N(c_k, sigma_xk^2)` and `Z = X + N(0, sigma_z^2)`. The
//! posterior `X | Z = z` is again a Gaussian mixture, so the posterior mean
//! `x_hat(z)`, the posterior variance `t(z)`, the law of the squared error
//! `S = (X - x_hat(Z))^2` given `Z` and the joint density of `(S, T)` are all
//! available without sampling.

mod density;
mod pipeline;

pub use density::{joint_st_density, Intersection, JointDensity, DEFAULT_GRID_NODES};
pub use pipeline::{exact_bin_quantile, ExactBinLaw, sample_pairs, sample_records, toy_pipeline_check, ToyBin, ToyReport};

use rand::Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean).powi(2) / var - 0.5 * var.ln() - LN_SQRT_2PI
}

/// Mixture prior and Gaussian noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    centers: Vec<f64>,
    component_vars: Vec<f64>,
    weights: Vec<f64>,
    noise_var: f64,
}

impl MixtureSpec {
    pub fn new(centers: Vec<f64>, component_vars: Vec<f64>, weights: Vec<f64>, noise_var: f64) -> Result<Self> {
        let k = centers.len();
        if k == 0 || component_vars.len() != k || weights.len() != k {
            return Err(Error::config("mixture needs equally many centers, variances and weights"));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("mixture centers must be finite"));
        }
        if component_vars.iter().chain([&noise_var]).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("mixture variances must be positive"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self {
            centers,
            component_vars,
            weights,
            noise_var,
        })
    }

    /// Three equally weighted components at -1, 0, 1 with standard deviation
    /// 0.05, observed under noise of standard deviation 0.3.
    pub fn reference() -> Self {
        Self::new(vec![-1.0, 0.0, 1.0], vec![0.05f64.powi(2); 3], vec![1.0 / 3.0; 3], 0.3f64.powi(2))
            .expect("reference mixture is valid")
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn component_vars(&self) -> &[f64] {
        &self.component_vars
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Mean and standard deviation of `Z`.
    pub fn observation_moments(&self) -> (f64, f64) {
        let mean: f64 = self.weights.iter().zip(&self.centers).map(|(a, c)| a * c).sum();
        let second: f64 = self
            .weights
            .iter()
            .zip(&self.centers)
            .zip(&self.component_vars)
            .map(|((a, c), v)| a * (v + c * c))
            .sum();
        (mean, (second - mean * mean + self.noise_var).sqrt())
    }

    /// Density of `Z`.
    pub fn observation_pdf(&self, z: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.centers)
            .zip(&self.component_vars)
            .map(|((a, c), v)| a * normal_log_pdf(z, *c, v + self.noise_var).exp())
            .sum()
    }

    /// Joint density of `(X, Z)`.
    pub fn joint_pdf(&self, x: f64, z: f64) -> f64 {
        let noise = normal_log_pdf(z, x, self.noise_var);
        self.weights
            .iter()
            .zip(&self.centers)
            .zip(&self.component_vars)
            .map(|((a, c), v)| a * (normal_log_pdf(x, *c, *v) + noise).exp())
            .sum()
    }

    /// Draws one `(x, z)` pair.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let g1: f64 = rng.sample(rand_distr::StandardNormal);
        let g2: f64 = rng.sample(rand_distr::StandardNormal);
        let x = self.centers[k] + self.component_vars[k].sqrt() * g1;
        (x, x + self.noise_var.sqrt() * g2)
    }
}

/// Posterior mixture `X | Z = z` and its first two moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMoments {
    pub mean: f64,
    pub var: f64,
    pub weights: Vec<f64>,
    pub comp_means: Vec<f64>,
    pub comp_vars: Vec<f64>,
}

impl PosteriorMoments {
    /// Posterior density `p(x | z)`.
    pub fn pdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.comp_means)
            .zip(&self.comp_vars)
            .map(|((w, m), v)| w * normal_log_pdf(x, *m, *v).exp())
            .sum()
    }

    /// `P(|X - mean| <= r | z)`.
    fn central_mass(&self, r: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.comp_means)
            .zip(&self.comp_vars)
            .map(|((w, m), v)| {
                let sd = v.sqrt();
                w * (normal_cdf((self.mean + r - m) / sd) - normal_cdf((self.mean - r - m) / sd))
            })
            .sum()
    }
}

pub fn posterior_moments(spec: &MixtureSpec, z: f64) -> PosteriorMoments {
    let k = spec.centers.len();
    let mut log_w = Vec::with_capacity(k);
    let mut comp_means = Vec::with_capacity(k);
    let mut comp_vars = Vec::with_capacity(k);
    for i in 0..k {
        let (c, vx) = (spec.centers[i], spec.component_vars[i]);
        let v = 1.0 / (1.0 / vx + 1.0 / spec.noise_var);
        comp_vars.push(v);
        comp_means.push(v * (c / vx + z / spec.noise_var));
        log_w.push(spec.weights[i].ln() + normal_log_pdf(z, c, vx + spec.noise_var));
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mean: f64 = weights.iter().zip(&comp_means).map(|(w, m)| w * m).sum();
    let var: f64 = weights
        .iter()
        .zip(&comp_means)
        .zip(&comp_vars)
        .map(|((w, m), v)| w * (v + (m - mean).powi(2)))
        .sum();
    PosteriorMoments {
        mean,
        var,
        weights,
        comp_means,
        comp_vars,
    }
}

/// Law of `S = (X - E[X | z])^2` given `Z = z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDistribution {
    posterior: PosteriorMoments,
}

pub fn error_given_z(spec: &MixtureSpec, z: f64) -> ErrorDistribution {
    ErrorDistribution {
        posterior: posterior_moments(spec, z),
    }
}

impl ErrorDistribution {
    pub fn posterior(&self) -> &PosteriorMoments {
        &self.posterior
    }

    pub fn cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.posterior.central_mass(s.sqrt()).clamp(0.0, 1.0)
    }

    /// Density of `S` at `s > 0`.
    pub fn pdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let r = s.sqrt();
        (self.posterior.pdf(self.posterior.mean + r) + self.posterior.pdf(self.posterior.mean - r)) / (2.0 * r)
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::config(format!("quantile level {q} must lie in (0, 1)")));
        }
        let mut hi = self.posterior.var.max(f64::MIN_POSITIVE);
        while self.cdf(hi) < q {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Domain("error quantile does not exist".into()));
            }
        }
        Ok(bisect(|s| self.cdf(s) - q, 0.0, hi))
    }
}

/// Root of a nondecreasing `f` on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::NoiseSource;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn single(c: f64, vx: f64, vz: f64) -> MixtureSpec {
        MixtureSpec::new(vec![c], vec![vx], vec![1.0], vz).unwrap()
    }

    #[test]
    fn validation() {
        assert!(MixtureSpec::new(vec![0.0], vec![1.0], vec![0.9], 1.0).is_err());
        assert!(MixtureSpec::new(vec![0.0], vec![0.0], vec![1.0], 1.0).is_err());
        assert!(MixtureSpec::new(vec![0.0, 1.0], vec![1.0], vec![0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn conjugate_single_component() {
        let spec = single(0.3, 0.04, 0.09);
        let expected = 1.0 / (1.0 / 0.04 + 1.0 / 0.09);
        for z in [-3.0, 0.0, 0.7, 5.0] {
            let p = posterior_moments(&spec, z);
            assert!((p.var - expected).abs() < 1e-15);
            assert!((p.mean - expected * (0.3 / 0.04 + z / 0.09)).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_reference_model() {
        let spec = MixtureSpec::reference();
        assert!(posterior_moments(&spec, 0.0).mean.abs() < 1e-15);
        for z in [0.1, 0.55, 1.3, 4.0] {
            let (a, b) = (posterior_moments(&spec, z), posterior_moments(&spec, -z));
            assert!((a.var - b.var).abs() < 1e-14);
            assert!((a.mean + b.mean).abs() < 1e-14);
        }
    }

    #[test]
    fn moments_match_quadrature() {
        let spec = MixtureSpec::new(vec![-0.4, 0.2, 1.1], vec![0.01, 0.09, 0.0225], vec![0.2, 0.5, 0.3], 0.05).unwrap();
        for z in [-1.0, 0.0, 0.37, 1.5] {
            let n = 10_000;
            let (a, b) = (-4.0, 5.0);
            let h = (b - a) / n as f64;
            let mut m0 = 0.0;
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for i in 0..=n {
                let x = a + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 } * spec.joint_pdf(x, z);
                m0 += w;
                m1 += w * x;
                m2 += w * x * x;
            }
            let mean = m1 / m0;
            let var = m2 / m0 - mean * mean;
            let p = posterior_moments(&spec, z);
            assert!((p.mean - mean).abs() < 1e-8, "{z}: {} vs {mean}", p.mean);
            assert!((p.var - var).abs() < 1e-8, "{z}: {} vs {var}", p.var);
            assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn single_component_error_is_scaled_chi_square() {
        let spec = single(0.0, 0.05, 0.1);
        let v = 1.0 / (1.0 / 0.05 + 1.0 / 0.1);
        let chi = ChiSquared::new(1.0).unwrap();
        let dist = error_given_z(&spec, 0.4);
        for q in [0.1, 0.5, 0.9, 0.99] {
            let exact = v * chi.inverse_cdf(q);
            assert!((dist.quantile(q).unwrap() - exact).abs() < 1e-9 * exact);
        }
    }

    #[test]
    fn quantiles_match_monte_carlo() {
        let spec = MixtureSpec::reference();
        for z in [0.0, 0.55] {
            let dist = error_given_z(&spec, z);
            let post = dist.posterior().clone();
            let mut rng = NoiseSource::new(7, z.to_bits());
            let draws = 1_000_000;
            let mut s: Vec<f64> = (0..draws)
                .map(|_| {
                    let u: f64 = rand::Rng::random(rng.rng());
                    let k = post.weights.iter().scan(0.0, |acc, w| {
                        *acc += w;
                        Some(*acc)
                    });
                    let k = k.take_while(|&c| c <= u).count().min(post.weights.len() - 1);
                    let x = post.comp_means[k] + post.comp_vars[k].sqrt() * rng.standard_normal();
                    (x - post.mean).powi(2)
                })
                .collect();
            s.sort_by(f64::total_cmp);
            for q in [0.5, 0.9, 0.95] {
                let empirical = s[(q * draws as f64) as usize];
                let exact = dist.quantile(q).unwrap();
                assert!((empirical / exact - 1.0).abs() < 0.01, "z={z} q={q}: {empirical} vs {exact}");
            }
        }
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_inverts_quantile(z in -3.0f64..3.0, q in 0.01f64..0.99) {
            let dist = error_given_z(&MixtureSpec::reference(), z);
            let s = dist.quantile(q).unwrap();
            prop_assert!((dist.cdf(s) - q).abs() < 1e-9);
            prop_assert!(dist.cdf(0.5 * s) <= dist.cdf(s));
            prop_assert_eq!(dist.cdf(0.0), 0.0);
            prop_assert!(dist.cdf(1e6) > 1.0 - 1e-12);
        }

        #[test]
        fn posterior_variance_positive(z in -20.0f64..20.0) {
            let p = posterior_moments(&MixtureSpec::reference(), z);
            prop_assert!(p.var > 0.0);
            prop_assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
