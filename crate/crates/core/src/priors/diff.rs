use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Squared operator-norm bound of the 2D forward-difference stencil.
pub const DIFF_NORM_SQ_BOUND: f64 = 8.0;

/// Two-channel field on an `M x N` grid, the codomain of [`DiffOperator`].
///
/// Channel 0 holds vertical differences `x[i+1,j] - x[i,j]`, channel 1 holds
/// horizontal differences `x[i,j+1] - x[i,j]`. Storage is channel-major,
/// each channel row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedField {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl StackedField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; 2 * height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * height * width {
            return Err(Error::Format(format!(
                "stacked field {height}x{width}x2 needs {} values, got {}",
                2 * height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn vertical(&self) -> &[f64] {
        &self.data[..self.height * self.width]
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.data[self.height * self.width..]
    }

    pub fn dot(&self, other: &StackedField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }
}

/// Forward-difference operator `D: R^{M x N} -> R^{M x N x 2}` with zero
/// differences on the last row (vertical channel) and last column
/// (horizontal channel).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffOperator {
    height: usize,
    width: usize,
}

impl DiffOperator {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn for_grid(x: &ImageGrid) -> Self {
        Self::new(x.height(), x.width())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Bound `L^2 <= 8` on the squared operator norm, used for step-size checks.
    pub fn norm_sq_bound(&self) -> f64 {
        DIFF_NORM_SQ_BOUND
    }

    fn check(&self, x: &ImageGrid) -> Result<()> {
        if x.dims() != self.dims() {
            return Err(Error::Shape {
                expected: self.dims(),
                got: x.dims(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &ImageGrid) -> Result<StackedField> {
        self.check(x)?;
        let mut out = StackedField::zeros(self.height, self.width);
        self.apply_into(x.as_slice(), &mut out.data);
        Ok(out)
    }

    pub fn adjoint(&self, p: &StackedField) -> Result<ImageGrid> {
        if p.dims() != self.dims() {
            return Err(Error::Shape {
                expected: self.dims(),
                got: p.dims(),
            });
        }
        let mut out = vec![0.0; self.height * self.width];
        self.adjoint_into(&p.data, &mut out);
        Ok(ImageGrid::from_vec_unchecked(self.height, self.width, out))
    }

    /// `out <- D x` on raw buffers (`out.len() == 2 * x.len()`).
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (m, n) = (self.height, self.width);
        let (dv, dh) = out.split_at_mut(m * n);
        for i in 0..m {
            let row = &x[i * n..(i + 1) * n];
            for j in 0..n {
                let k = i * n + j;
                dv[k] = if i + 1 < m { x[k + n] - row[j] } else { 0.0 };
                dh[k] = if j + 1 < n { row[j + 1] - row[j] } else { 0.0 };
            }
        }
    }

    /// `out <- D^* p` on raw buffers.
    pub(crate) fn adjoint_into(&self, p: &[f64], out: &mut [f64]) {
        let (m, n) = (self.height, self.width);
        let (pv, ph) = p.split_at(m * n);
        for i in 0..m {
            for j in 0..n {
                let k = i * n + j;
                let mut acc = 0.0;
                if i + 1 < m {
                    acc -= pv[k];
                }
                if i > 0 {
                    acc += pv[k - n];
                }
                if j + 1 < n {
                    acc -= ph[k];
                }
                if j > 0 {
                    acc += ph[k - 1];
                }
                out[k] = acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_image_has_zero_differences() {
        let d = DiffOperator::new(4, 5);
        let p = d.apply(&ImageGrid::filled(4, 5, 0.7)).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_by_two_stencil() {
        let x = ImageGrid::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let p = DiffOperator::new(2, 2).apply(&x).unwrap();
        assert_eq!(p.horizontal(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(p.vertical(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch() {
        let d = DiffOperator::new(3, 3);
        assert!(d.apply(&ImageGrid::zeros(3, 4)).is_err());
        assert!(d.adjoint(&StackedField::zeros(2, 3)).is_err());
    }

    #[test]
    fn norm_bound_holds_by_power_iteration() {
        let d = DiffOperator::new(16, 16);
        let mut x = ImageGrid::from_fn(16, 16, |i, j| ((i * 7 + j * 13) % 5) as f64 - 2.0);
        let mut est = 0.0;
        for _ in 0..500 {
            let y = d.adjoint(&d.apply(&x).unwrap()).unwrap();
            let nrm = y.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            est = nrm / x.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y.map(|v| v / nrm).unwrap();
        }
        assert!(est <= DIFF_NORM_SQ_BOUND && est > 7.0, "{est}");
    }

    fn pseudo(seed: u64, k: usize) -> f64 {
        let z = seed
            .wrapping_add(k as u64)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(17)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    proptest! {
        #[test]
        fn adjoint_identity(m in 2usize..=16, n in 2usize..=16, seed in any::<u64>()) {
            let d = DiffOperator::new(m, n);
            let x = ImageGrid::from_fn(m, n, |i, j| pseudo(seed, i * n + j));
            let p = StackedField::from_vec(m, n, (0..2 * m * n).map(|k| pseudo(!seed, k)).collect()).unwrap();
            let lhs = d.apply(&x).unwrap().dot(&p);
            let dstar = d.adjoint(&p).unwrap();
            let rhs: f64 = x.as_slice().iter().zip(dstar.as_slice()).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
