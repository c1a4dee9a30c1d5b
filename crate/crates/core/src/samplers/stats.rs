use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Streaming per-pixel mean and sum of squared deviations (Welford).
///
/// `variance = m2 / count`, the `1/K` convention of the sample estimators
/// used for the posterior mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats {
    height: usize,
    width: usize,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ChainStats {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            count: 0,
            mean: vec![0.0; height * width],
            m2: vec![0.0; height * width],
        }
    }

    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a ImageGrid>) -> Result<Self> {
        let mut iter = samples.into_iter().peekable();
        let first = iter
            .peek()
            .ok_or_else(|| Error::Statistical("no samples".into()))?;
        let mut stats = ChainStats::new(first.height(), first.width());
        for x in iter {
            stats.push_grid(x)?;
        }
        Ok(stats)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> ImageGrid {
        ImageGrid::from_vec_unchecked(self.height, self.width, self.mean.clone())
    }

    pub fn m2(&self) -> ImageGrid {
        ImageGrid::from_vec_unchecked(self.height, self.width, self.m2.clone())
    }

    /// Population variance `m2 / count`; zero before the first sample.
    pub fn variance(&self) -> ImageGrid {
        let n = self.count.max(1) as f64;
        ImageGrid::from_vec_unchecked(
            self.height,
            self.width,
            self.m2.iter().map(|v| v / n).collect(),
        )
    }

    pub(crate) fn mean_slice(&self) -> &[f64] {
        &self.mean
    }

    pub(crate) fn m2_slice(&self) -> &[f64] {
        &self.m2
    }

    #[inline]
    pub(crate) fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta * inv;
            *s += delta * (v - *m);
        }
    }

    pub fn push_grid(&mut self, x: &ImageGrid) -> Result<()> {
        if x.dims() != self.dims() {
            return Err(Error::Shape {
                expected: self.dims(),
                got: x.dims(),
            });
        }
        self.push(x.as_slice());
        Ok(())
    }

    /// Combines the statistics of two disjoint streams.
    pub fn merge(&self, other: &ChainStats) -> Result<ChainStats> {
        if self.dims() != other.dims() {
            return Err(Error::Shape {
                expected: self.dims(),
                got: other.dims(),
            });
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let mut out = ChainStats::new(self.height, self.width);
        out.count = self.count + other.count;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            out.mean[k] = self.mean[k] + delta * nb / n;
            out.m2[k] = self.m2[k] + other.m2[k] + delta * delta * na * nb / n;
        }
        Ok(out)
    }
}

/// Returns `stats` updated with one more sample.
pub fn welford_update(stats: &ChainStats, x: &ImageGrid) -> Result<ChainStats> {
    let mut next = stats.clone();
    next.push_grid(x)?;
    Ok(next)
}

pub fn welford_merge(a: &ChainStats, b: &ChainStats) -> Result<ChainStats> {
    a.merge(b)
}
