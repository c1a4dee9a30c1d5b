//! Pixel-wise error bounds with coverage guarantees for Bayesian image
//! reconstruction.
//!
//! A reconstruction method provides, for each pixel, a point estimate `x̂`
//! (posterior mean) and an uncertainty score `t̂` (posterior variance).
//! Squared errors `s = (x̂ - x)^2` observed on a calibration set are grouped by
//! `t̂` into bins; within every bin the conformalized `q`-quantile of `s` bounds
//! the error of a new pixel with probability at least `q`.
//!
//! Modules:
//!
//! * [`grid`], [`io`]: image grids and their file formats.
//! * [`model`], [`priors`]: Gaussian likelihood, TV / Huber-TV / FoE priors.
//! * [`samplers`]: ULA, proximal ULA and the primal-dual Langevin chain.
//! * [`bp`]: sum-product belief propagation on the discretized TV posterior.
//! * [`conformal`]: quantile tables, coverage, pooling, mutual information.
//! * [`toy1d`]: analytic Gaussian-mixture model for end-to-end checks.
//! * [`metrics`]: PSNR and SSIM.

// `!(x > 0.0)` is used on purpose so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bp;
pub mod conformal;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod model;
pub mod priors;
pub mod samplers;
pub mod toy1d;

pub use error::{Error, Result};
pub use grid::ImageGrid;
pub use model::{GaussianLikelihood, PosteriorModel};
pub use priors::Prior;
