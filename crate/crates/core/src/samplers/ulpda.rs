//! Unadjusted Langevin primal-dual chain for `E(x) = g(x) + f(D x)`, with `g`
//! the Gaussian data term and `f = ||.||_1 / lambda` (anisotropic TV).
//!
//! Per iteration, in this order:
//!
//! ```text
//! p_bar   = p_k + theta (p_k - p_{k-1})
//! x_{k+1} = prox_{tau g}(x_k - tau D^* p_bar) + sqrt(2 tau) xi_k
//! p_{k+1} = prox_{sigma f^*}(p_k + sigma D x_{k+1})
//! ```
//!
//! with `p_{-1} = p_0 = 0`. Noise enters the primal variable only.

use crate::error::{Error, Result};
use crate::model::PosteriorModel;
use crate::priors::{project_box, DiffOperator, Prior};

use super::chain::{drive, Observer, Transition};
use super::config::UlpdaConfig;
use super::stats::ChainStats;

struct Ulpda<'m> {
    model: &'m PosteriorModel,
    cfg: UlpdaConfig,
    op: DiffOperator,
    x: Vec<f64>,
    p: Vec<f64>,
    p_prev: Vec<f64>,
    p_bar: Vec<f64>,
    dual_buf: Vec<f64>,
    primal_buf: Vec<f64>,
}

impl Transition for Ulpda<'_> {
    fn step(&mut self, k: usize, noise: &[f64]) {
        let factor = self.cfg.chain.schedule.factor(k);
        let tau = self.cfg.tau * factor;
        // keeps sigma_k tau_k fixed under a decaying schedule
        let sigma = self.cfg.sigma / factor;
        let theta = self.cfg.theta;
        let amp = (2.0 * tau).sqrt();
        let r = tau * self.model.likelihood().precision();
        let z = self.model.observation().as_slice();
        let weight = self.model.prior_weight();

        if weight == 0.0 {
            for i in 0..self.x.len() {
                self.x[i] = (self.x[i] + r * z[i]) / (1.0 + r) + amp * noise[i];
            }
            return;
        }

        for ((pb, &p), &pp) in self.p_bar.iter_mut().zip(&self.p).zip(&self.p_prev) {
            *pb = p + theta * (p - pp);
        }
        self.op.adjoint_into(&self.p_bar, &mut self.primal_buf);
        for i in 0..self.x.len() {
            let v = self.x[i] - tau * self.primal_buf[i];
            self.x[i] = (v + r * z[i]) / (1.0 + r) + amp * noise[i];
        }

        self.op.apply_into(&self.x, &mut self.dual_buf);
        std::mem::swap(&mut self.p_prev, &mut self.p);
        // p_prev now holds p_k; build p_{k+1} in p
        for ((p, &pk), &dx) in self.p.iter_mut().zip(&self.p_prev).zip(&self.dual_buf) {
            *p = pk + sigma * dx;
        }
        project_box(&mut self.p, weight);
    }

    fn state(&self) -> &[f64] {
        &self.x
    }
}

/// Runs the primal-dual Langevin chain from `x_0 = z`, `p_0 = 0`.
pub fn ulpda_run(model: &PosteriorModel, cfg: &UlpdaConfig) -> Result<ChainStats> {
    ulpda_run_observed(model, cfg, None)
}

pub fn ulpda_run_observed(
    model: &PosteriorModel,
    cfg: &UlpdaConfig,
    observer: Option<Observer<'_>>,
) -> Result<ChainStats> {
    let (h, w) = model.dims();
    let op = DiffOperator::new(h, w);
    cfg.validate(op.norm_sq_bound())?;
    match model.prior() {
        Prior::Tv | Prior::None => {}
        other => {
            return Err(Error::config(format!(
                "primal-dual sampler needs the TV prior, got '{}'",
                other.name()
            )))
        }
    }
    let d = h * w;
    let mut kernel = Ulpda {
        model,
        cfg: *cfg,
        op,
        x: model.observation().as_slice().to_vec(),
        p: vec![0.0; 2 * d],
        p_prev: vec![0.0; 2 * d],
        p_bar: vec![0.0; 2 * d],
        dual_buf: vec![0.0; 2 * d],
        primal_buf: vec![0.0; d],
    };
    drive(&mut kernel, (h, w), &cfg.chain, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ImageGrid;
    use crate::model::GaussianLikelihood;
    use crate::priors::HuberParams;
    use crate::samplers::{pula_run, ChainSettings, UlaConfig};

    #[test]
    fn prior_off_matches_proximal_ula() {
        let z = ImageGrid::from_fn(4, 5, |i, j| 0.1 * i as f64 + 0.05 * j as f64);
        let model = PosteriorModel::likelihood_only(GaussianLikelihood::new(0.2, z).unwrap());
        let chain = ChainSettings::new(300, 5);
        let a = ulpda_run(&model, &UlpdaConfig::new(1e-3, 1.0, 0.0, chain)).unwrap();
        let b = pula_run(&model, &UlaConfig::new(1e-3, chain)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_steps_and_priors() {
        let lik = GaussianLikelihood::new(0.1, ImageGrid::zeros(4, 4)).unwrap();
        let tv = PosteriorModel::new(lik.clone(), Prior::Tv, 0.1).unwrap();
        let chain = ChainSettings::new(10, 0);
        assert!(matches!(
            ulpda_run(&tv, &UlpdaConfig::new(1e-3, 1e3, 1.0, chain)),
            Err(Error::Config(_))
        ));
        let huber = PosteriorModel::new(lik, Prior::HuberTv(HuberParams::new(0.1).unwrap()), 0.1).unwrap();
        assert!(ulpda_run(&huber, &UlpdaConfig::with_max_dual_step(1e-3, 1.0, 8.0, chain)).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let z = ImageGrid::from_fn(6, 6, |i, j| if i + j < 6 { 0.3 } else { 0.7 });
        let lik = GaussianLikelihood::new(15.0 / 255.0, z).unwrap();
        let model = PosteriorModel::new(lik, Prior::Tv, 0.06).unwrap();
        let cfg = UlpdaConfig::with_max_dual_step(5e-5, 1.0, 8.0, ChainSettings::new(2000, 3));
        assert_eq!(ulpda_run(&model, &cfg).unwrap(), ulpda_run(&model, &cfg).unwrap());
        let other = UlpdaConfig { chain: cfg.chain.with_stream(1), ..cfg };
        assert_ne!(ulpda_run(&model, &cfg).unwrap(), ulpda_run(&model, &other).unwrap());
    }
}
