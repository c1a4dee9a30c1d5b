//! Unadjusted Langevin chains for differentiable energies.

use crate::error::{Error, Result};
use crate::model::PosteriorModel;

use super::chain::{drive, weighted_prior_gradient, Observer, Transition};
use super::config::UlaConfig;
use super::stats::ChainStats;

/// `x <- x - tau grad E(x) + sqrt(2 tau) xi`.
struct Ula<'m> {
    model: &'m PosteriorModel,
    cfg: UlaConfig,
    x: Vec<f64>,
    grad: Vec<f64>,
    scratch: Vec<f64>,
}

impl Transition for Ula<'_> {
    fn step(&mut self, k: usize, noise: &[f64]) {
        let tau = self.cfg.step * self.cfg.chain.schedule.factor(k);
        let amp = (2.0 * tau).sqrt();
        let prec = self.model.likelihood().precision();
        let z = self.model.observation().as_slice();
        weighted_prior_gradient(self.model, &self.x, &mut self.scratch, &mut self.grad);
        for i in 0..self.x.len() {
            let g = prec * (self.x[i] - z[i]) + self.grad[i];
            self.x[i] += -tau * g + amp * noise[i];
        }
    }

    fn state(&self) -> &[f64] {
        &self.x
    }
}

/// `x <- prox_{tau g}(x - tau grad prior(x) / lambda) + sqrt(2 tau) xi`, with
/// `g` the Gaussian data term.
struct ProxUla<'m> {
    model: &'m PosteriorModel,
    cfg: UlaConfig,
    x: Vec<f64>,
    grad: Vec<f64>,
    scratch: Vec<f64>,
}

impl Transition for ProxUla<'_> {
    fn step(&mut self, k: usize, noise: &[f64]) {
        let tau = self.cfg.step * self.cfg.chain.schedule.factor(k);
        let amp = (2.0 * tau).sqrt();
        let r = tau * self.model.likelihood().precision();
        let z = self.model.observation().as_slice();
        weighted_prior_gradient(self.model, &self.x, &mut self.scratch, &mut self.grad);
        for i in 0..self.x.len() {
            let v = self.x[i] - tau * self.grad[i];
            self.x[i] = (v + r * z[i]) / (1.0 + r) + amp * noise[i];
        }
    }

    fn state(&self) -> &[f64] {
        &self.x
    }
}

fn require_differentiable(model: &PosteriorModel) -> Result<f64> {
    model
        .prior()
        .gradient_lipschitz()
        .ok_or_else(|| Error::config(format!("prior '{}' is not differentiable", model.prior().name())))
}

fn validate_ula(model: &PosteriorModel, cfg: &UlaConfig) -> Result<()> {
    cfg.validate()?;
    require_differentiable(model)?;
    let lip = model.gradient_lipschitz().expect("differentiable");
    if cfg.step >= 2.0 / lip {
        return Err(Error::config(format!(
            "step {} must be below 2/L = {:e}",
            cfg.step,
            2.0 / lip
        )));
    }
    Ok(())
}

fn validate_pula(model: &PosteriorModel, cfg: &UlaConfig) -> Result<()> {
    cfg.validate()?;
    // only the prior is treated explicitly; the data term enters through its prox
    let lip = model.prior_weight() * require_differentiable(model)?;
    if lip > 0.0 && cfg.step >= 2.0 / lip {
        return Err(Error::config(format!(
            "step {} must be below 2/L_prior = {:e}",
            cfg.step,
            2.0 / lip
        )));
    }
    Ok(())
}

fn buffers(model: &PosteriorModel) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = model.observation().len();
    (model.observation().as_slice().to_vec(), vec![0.0; d], vec![0.0; 2 * d])
}

/// Runs ULA from `x_0 = z` and returns the statistics of the kept iterates.
pub fn ula_run(model: &PosteriorModel, cfg: &UlaConfig) -> Result<ChainStats> {
    ula_run_observed(model, cfg, None)
}

pub fn ula_run_observed(
    model: &PosteriorModel,
    cfg: &UlaConfig,
    observer: Option<Observer<'_>>,
) -> Result<ChainStats> {
    validate_ula(model, cfg)?;
    let (x, grad, scratch) = buffers(model);
    let mut kernel = Ula {
        model,
        cfg: *cfg,
        x,
        grad,
        scratch,
    };
    drive(&mut kernel, model.dims(), &cfg.chain, observer)
}

/// Runs the proximal-likelihood variant of ULA from `x_0 = z`.
pub fn pula_run(model: &PosteriorModel, cfg: &UlaConfig) -> Result<ChainStats> {
    pula_run_observed(model, cfg, None)
}

pub fn pula_run_observed(
    model: &PosteriorModel,
    cfg: &UlaConfig,
    observer: Option<Observer<'_>>,
) -> Result<ChainStats> {
    validate_pula(model, cfg)?;
    let (x, grad, scratch) = buffers(model);
    let mut kernel = ProxUla {
        model,
        cfg: *cfg,
        x,
        grad,
        scratch,
    };
    drive(&mut kernel, model.dims(), &cfg.chain, observer)
}
