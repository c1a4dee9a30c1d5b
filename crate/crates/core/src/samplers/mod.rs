//! Langevin posterior samplers and streaming chain statistics.
//!
//! Every chain starts at the observation, draws its noise from a seeded
//! [`NoiseSource`] and accumulates the kept iterates into [`ChainStats`].
//! A single chain is sequential; independent chains (one per image) run in
//! parallel with distinct RNG streams and combine with [`welford_merge`].

mod chain;
mod config;
mod rng;
mod stats;
mod ula;
mod ulpda;

pub use chain::{diagnostics_observer, ChainEvent, Observer};
pub use config::{ChainSettings, StepSchedule, UlaConfig, UlpdaConfig};
pub use rng::NoiseSource;
pub use stats::{welford_merge, welford_update, ChainStats};
pub use ula::{pula_run, pula_run_observed, ula_run, ula_run_observed};
pub use ulpda::{ulpda_run, ulpda_run_observed};

use crate::error::Result;
use crate::model::PosteriorModel;

/// A configured sampler, dispatching to the matching run function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Ula(UlaConfig),
    ProxUla(UlaConfig),
    PrimalDual(UlpdaConfig),
}

impl Sampler {
    pub fn chain(&self) -> &ChainSettings {
        match self {
            Sampler::Ula(c) | Sampler::ProxUla(c) => &c.chain,
            Sampler::PrimalDual(c) => &c.chain,
        }
    }

    pub fn chain_mut(&mut self) -> &mut ChainSettings {
        match self {
            Sampler::Ula(c) | Sampler::ProxUla(c) => &mut c.chain,
            Sampler::PrimalDual(c) => &mut c.chain,
        }
    }

    pub fn run(&self, model: &PosteriorModel, observer: Option<Observer<'_>>) -> Result<ChainStats> {
        match self {
            Sampler::Ula(c) => ula_run_observed(model, c, observer),
            Sampler::ProxUla(c) => pula_run_observed(model, c, observer),
            Sampler::PrimalDual(c) => ulpda_run_observed(model, c, observer),
        }
    }
}
