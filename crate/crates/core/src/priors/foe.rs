//! Fields-of-Experts energy with fixed filters and Lorentzian experts
//! `phi(t) = alpha * log(1 + t^2)`.
//!
//! Filter responses use 2D convolution with symmetric boundary padding
//! (`x[-1] = x[0]`, `x[n] = x[n-1]`). The gradient scatters through the same
//! index map, so it is the exact adjoint of the padded convolution.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Square convolution stencil, row-major weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || weights.len() != size * size {
            return Err(Error::config(format!(
                "kernel of size {size} needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("kernel weights must be finite"));
        }
        Ok(Self { size, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The stencil whose convolution returns the input unchanged.
    pub fn identity(size: usize) -> Self {
        let mut weights = vec![0.0; size * size];
        let c = size / 2;
        weights[c * size + c] = 1.0;
        Self { size, weights }
    }

    fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoESpec {
    kernels: Vec<Kernel>,
    alphas: Vec<f64>,
}

impl FoESpec {
    pub fn new(kernels: Vec<Kernel>, alphas: Vec<f64>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::config("FoE needs at least one expert"));
        }
        if kernels.len() != alphas.len() {
            return Err(Error::config(format!(
                "{} kernels but {} alphas",
                kernels.len(),
                alphas.len()
            )));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::config(format!("FoE alphas must be positive, got {a}")));
        }
        Ok(Self { kernels, alphas })
    }

    /// The eight non-constant 3x3 DCT-II basis stencils, every `alpha = 1`.
    pub fn dct3() -> Self {
        let basis = |u: usize, i: usize| -> f64 {
            let c = if u == 0 { (1.0f64 / 3.0).sqrt() } else { (2.0f64 / 3.0).sqrt() };
            c * (PI * (2 * i + 1) as f64 * u as f64 / 6.0).cos()
        };
        let mut kernels = Vec::with_capacity(8);
        for u in 0..3 {
            for v in 0..3 {
                if u == 0 && v == 0 {
                    continue;
                }
                let weights = (0..9).map(|k| basis(u, k / 3) * basis(v, k % 3)).collect();
                kernels.push(Kernel { size: 3, weights });
            }
        }
        let alphas = vec![1.0; kernels.len()];
        Self { kernels, alphas }
    }

    /// Parses the kernel CSV format: one expert per row, `alpha` first,
    /// then the row-major stencil (a perfect-square count of weights).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut kernels = Vec::new();
        let mut alphas = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let values = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("kernel line {}: {e}", lineno + 1)))?;
            let (alpha, weights) = values
                .split_first()
                .ok_or_else(|| Error::Format(format!("kernel line {} is empty", lineno + 1)))?;
            let size = (weights.len() as f64).sqrt().round() as usize;
            if size * size != weights.len() || size == 0 {
                return Err(Error::Format(format!(
                    "kernel line {}: {} weights is not a perfect square",
                    lineno + 1,
                    weights.len()
                )));
            }
            kernels.push(Kernel::new(size, weights.to_vec())?);
            alphas.push(*alpha);
        }
        Self::new(kernels, alphas)
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Upper bound on the Lipschitz constant of [`foe_gradient`]:
    /// `sum_c 2 alpha_c ||k_c||_1^2`, since `|psi'| <= 2`.
    pub fn gradient_lipschitz(&self) -> f64 {
        self.kernels
            .iter()
            .zip(&self.alphas)
            .map(|(k, a)| 2.0 * a * k.l1_norm().powi(2))
            .sum()
    }

    fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        let largest = self.kernels.iter().map(Kernel::size).max().unwrap_or(0);
        if largest > height || largest > width {
            return Err(Error::config(format!(
                "kernel of size {largest} does not fit a {height}x{width} image"
            )));
        }
        Ok(())
    }
}

#[inline]
fn symmetric_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - i - 1
    } else {
        i
    };
    r as usize
}

/// Convolution index map for one output pixel: visits `(input index, weight)`.
#[inline]
fn for_each_tap(
    kernel: &Kernel,
    height: usize,
    width: usize,
    i: usize,
    j: usize,
    mut f: impl FnMut(usize, f64),
) {
    let s = kernel.size;
    let c = (s / 2) as isize;
    for a in 0..s {
        let ii = symmetric_index(i as isize + c - a as isize, height);
        for b in 0..s {
            let jj = symmetric_index(j as isize + c - b as isize, width);
            f(ii * width + jj, kernel.weights[a * s + b]);
        }
    }
}

/// Filter response `k * x` with symmetric padding.
pub fn convolve(kernel: &Kernel, x: &ImageGrid) -> Result<ImageGrid> {
    let (h, w) = x.dims();
    if kernel.size > h || kernel.size > w {
        return Err(Error::config("kernel larger than image"));
    }
    let src = x.as_slice();
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for_each_tap(kernel, h, w, i, j, |k, wt| acc += wt * src[k]);
            out[i * w + j] = acc;
        }
    }
    Ok(ImageGrid::from_vec_unchecked(h, w, out))
}

/// `sum_c sum_ij alpha_c log(1 + (k_c * x)_ij^2)`.
pub fn foe_energy(spec: &FoESpec, x: &ImageGrid) -> Result<f64> {
    spec.check_fits(x.height(), x.width())?;
    let mut total = 0.0;
    for (kernel, alpha) in spec.kernels.iter().zip(&spec.alphas) {
        let r = convolve(kernel, x)?;
        total += alpha * r.as_slice().iter().map(|t| (t * t).ln_1p()).sum::<f64>();
    }
    Ok(total)
}

pub fn foe_gradient(spec: &FoESpec, x: &ImageGrid) -> Result<ImageGrid> {
    spec.check_fits(x.height(), x.width())?;
    let mut out = vec![0.0; x.len()];
    foe_gradient_into(spec, x.height(), x.width(), x.as_slice(), &mut out);
    Ok(ImageGrid::from_vec_unchecked(x.height(), x.width(), out))
}

/// Buffer form of [`foe_gradient`]. Shapes are checked by the caller.
pub(crate) fn foe_gradient_into(
    spec: &FoESpec,
    height: usize,
    width: usize,
    x: &[f64],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (kernel, &alpha) in spec.kernels.iter().zip(&spec.alphas) {
        for i in 0..height {
            for j in 0..width {
                let mut r = 0.0;
                for_each_tap(kernel, height, width, i, j, |k, wt| r += wt * x[k]);
                let psi = alpha * 2.0 * r / (1.0 + r * r);
                if psi != 0.0 {
                    for_each_tap(kernel, height, width, i, j, |k, wt| out[k] += wt * psi);
                }
            }
        }
    }
}
