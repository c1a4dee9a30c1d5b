use std::io::Write;

use crate::error::{Error, Result};
use crate::model::PosteriorModel;
use crate::priors::{foe_gradient_into, huber_tv_gradient_into, DiffOperator, Prior};

use super::config::ChainSettings;
use super::rng::NoiseSource;
use super::stats::ChainStats;

/// Snapshot handed to chain observers after every iteration.
#[derive(Debug)]
pub struct ChainEvent<'a> {
    /// 1-based iteration index, counting burn-in.
    pub iteration: usize,
    pub state: &'a [f64],
    pub stats: &'a ChainStats,
    /// Whether this iterate entered `stats`.
    pub recorded: bool,
}

pub type Observer<'o> = &'o mut dyn FnMut(ChainEvent<'_>) -> Result<()>;

/// One Markov transition. `noise` holds standard normals already multiplied
/// by the chain's noise scale; the kernel applies its own `sqrt(2 tau_k)`.
pub(crate) trait Transition {
    fn step(&mut self, k: usize, noise: &[f64]);
    fn state(&self) -> &[f64];
}

pub(crate) fn drive<T: Transition>(
    kernel: &mut T,
    dims: (usize, usize),
    chain: &ChainSettings,
    mut observer: Option<Observer<'_>>,
) -> Result<ChainStats> {
    let d = dims.0 * dims.1;
    let mut stats = ChainStats::new(dims.0, dims.1);
    let mut noise_src = NoiseSource::new(chain.seed, chain.stream);
    let mut noise = vec![0.0; d];
    let scale = chain.noise_scale;

    for k in 0..chain.iterations {
        if scale != 0.0 {
            noise_src.fill_standard_normal(&mut noise);
            if scale != 1.0 {
                noise.iter_mut().for_each(|v| *v *= scale);
            }
        }
        kernel.step(k, &noise);
        let x = kernel.state();
        if let Some(pixel) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: k + 1,
                pixel,
            });
        }
        let recorded = chain.keeps(k + 1);
        if recorded {
            stats.push(x);
        }
        if let Some(obs) = observer.as_mut() {
            obs(ChainEvent {
                iteration: k + 1,
                state: x,
                stats: &stats,
                recorded,
            })?;
        }
    }
    Ok(stats)
}

/// Writes `(1/lambda) grad prior(x)` into `out`.
pub(crate) fn weighted_prior_gradient(
    model: &PosteriorModel,
    x: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let (h, w) = model.dims();
    let weight = model.prior_weight();
    match model.prior() {
        Prior::None => out.iter_mut().for_each(|v| *v = 0.0),
        Prior::HuberTv(params) => {
            huber_tv_gradient_into(&DiffOperator::new(h, w), *params, x, scratch, out);
            out.iter_mut().for_each(|v| *v *= weight);
        }
        Prior::Foe(spec) => {
            foe_gradient_into(spec, h, w, x, out);
            out.iter_mut().for_each(|v| *v *= weight);
        }
        Prior::Tv => unreachable!("validated: TV has no gradient"),
    }
}

/// Observer that streams `iteration,energy,mean_of_mean,mean_of_variance`
/// rows every `every` iterations.
pub fn diagnostics_observer<'a, W: Write>(
    model: &'a PosteriorModel,
    every: usize,
    out: &'a mut W,
) -> Result<impl FnMut(ChainEvent<'_>) -> Result<()> + 'a> {
    let every = every.max(1);
    writeln!(out, "iteration,energy,mean_of_mean,mean_of_variance")
        .map_err(|e| Error::io("<diagnostics>", e))?;
    let (h, w) = model.dims();
    Ok(move |ev: ChainEvent<'_>| {
        if !ev.iteration.is_multiple_of(every) {
            return Ok(());
        }
        let x = crate::grid::ImageGrid::from_vec_unchecked(h, w, ev.state.to_vec());
        let energy = model.energy(&x)?;
        let n = ev.stats.mean_slice().len() as f64;
        let mm = ev.stats.mean_slice().iter().sum::<f64>() / n;
        let mv = ev.stats.m2_slice().iter().sum::<f64>() / n / ev.stats.count().max(1) as f64;
        writeln!(out, "{},{:e},{:e},{:e}", ev.iteration, energy, mm, mv)
            .map_err(|e| Error::io("<diagnostics>", e))
    })
}
