//! Prior energies: anisotropic TV, Huber-smoothed TV and Fields of Experts.

mod diff;
mod foe;
mod tv;

pub use diff::{DiffOperator, StackedField, DIFF_NORM_SQ_BOUND};
pub use foe::{convolve, foe_energy, foe_gradient, FoESpec, Kernel};
pub use tv::{huber_tv_energy, huber_tv_gradient, l1_dual_prox, tv_energy, HuberParams};

pub(crate) use foe::foe_gradient_into;
pub(crate) use tv::{huber_tv_gradient_into, project_box};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Prior handle held by a posterior model.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// No prior; the posterior is the likelihood alone.
    None,
    /// Anisotropic TV. Not differentiable; sampled with the primal-dual chain.
    Tv,
    HuberTv(HuberParams),
    Foe(FoESpec),
}

impl Prior {
    pub fn name(&self) -> &'static str {
        match self {
            Prior::None => "none",
            Prior::Tv => "tv",
            Prior::HuberTv(_) => "huber_tv",
            Prior::Foe(_) => "foe",
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Prior::Tv)
    }

    pub fn energy(&self, x: &ImageGrid) -> Result<f64> {
        let op = DiffOperator::for_grid(x);
        match self {
            Prior::None => Ok(0.0),
            Prior::Tv => tv_energy(&op, x),
            Prior::HuberTv(p) => huber_tv_energy(&op, *p, x),
            Prior::Foe(spec) => foe_energy(spec, x),
        }
    }

    pub fn gradient(&self, x: &ImageGrid) -> Result<ImageGrid> {
        let op = DiffOperator::for_grid(x);
        match self {
            Prior::None => Ok(ImageGrid::zeros(x.height(), x.width())),
            Prior::Tv => Err(Error::config("TV prior has no gradient; use the primal-dual sampler")),
            Prior::HuberTv(p) => huber_tv_gradient(&op, *p, x),
            Prior::Foe(spec) => foe_gradient(spec, x),
        }
    }

    /// Lipschitz bound of the prior gradient, `None` for TV.
    pub fn gradient_lipschitz(&self) -> Option<f64> {
        match self {
            Prior::None => Some(0.0),
            Prior::Tv => None,
            Prior::HuberTv(p) => Some(p.gradient_lipschitz(&DiffOperator::new(1, 1))),
            Prior::Foe(spec) => Some(spec.gradient_lipschitz()),
        }
    }
}
