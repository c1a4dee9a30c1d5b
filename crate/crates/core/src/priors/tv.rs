use crate::error::{Error, Result};
use crate::grid::ImageGrid;

use super::diff::{DiffOperator, StackedField};

/// Anisotropic total variation `||D x||_1`.
pub fn tv_energy(op: &DiffOperator, x: &ImageGrid) -> Result<f64> {
    Ok(op.apply(x)?.l1_norm())
}

/// Threshold of the Huber function used to smooth TV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberParams {
    delta: f64,
}

impl HuberParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::config(format!("huber delta must be > 0, got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `h(t) = t^2 / (2 delta)` for `|t| <= delta`, `|t| - delta/2` otherwise.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= self.delta {
            t * t / (2.0 * self.delta)
        } else {
            a - 0.5 * self.delta
        }
    }

    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        (t / self.delta).clamp(-1.0, 1.0)
    }

    /// Lipschitz constant `L^2 / delta` of the Huber-TV gradient.
    pub fn gradient_lipschitz(&self, op: &DiffOperator) -> f64 {
        op.norm_sq_bound() / self.delta
    }
}

pub fn huber_tv_energy(op: &DiffOperator, params: HuberParams, x: &ImageGrid) -> Result<f64> {
    Ok(op
        .apply(x)?
        .as_slice()
        .iter()
        .map(|&t| params.value(t))
        .sum())
}

/// Gradient `D^*(clip(D x / delta, -1, 1))` of `sum_k h((D x)_k)`.
pub fn huber_tv_gradient(op: &DiffOperator, params: HuberParams, x: &ImageGrid) -> Result<ImageGrid> {
    let mut p = op.apply(x)?;
    for v in p.as_mut_slice() {
        *v = params.derivative(*v);
    }
    op.adjoint(&p)
}

/// Buffer form of [`huber_tv_gradient`]; `scratch` holds `2 * x.len()` values.
pub(crate) fn huber_tv_gradient_into(
    op: &DiffOperator,
    params: HuberParams,
    x: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) {
    op.apply_into(x, scratch);
    for v in scratch.iter_mut() {
        *v = params.derivative(*v);
    }
    op.adjoint_into(scratch, out);
}

/// Proximal map of `step * f^*` for `f = weight * ||.||_1`, i.e. the
/// pointwise projection onto `[-weight, weight]`. Independent of `step`.
pub fn l1_dual_prox(p: &StackedField, step: f64, weight: f64) -> StackedField {
    debug_assert!(step > 0.0);
    let mut out = p.clone();
    project_box(out.as_mut_slice(), weight);
    out
}

#[inline]
pub(crate) fn project_box(p: &mut [f64], weight: f64) {
    for v in p {
        *v = v.clamp(-weight, weight);
    }
}
