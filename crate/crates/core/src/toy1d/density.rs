//! Joint density of the squared error `S` and the posterior variance `T`
//! by a change of variables from `(X, Z)`.
//!
//! For given `(s, t)` every `z'` with `t(z') = t` is located by bracketing on
//! a dense `z` grid and refined by bisection. With `x' = x_hat(z') ± sqrt(s)`
//! the density is
//!
//! ```text
//! p(s, t) = sum over (x', z') of p_XZ(x', z') |1 / (2 sqrt(s)) (z1 - z0) / (t1 - t0)|
//! ```
//!
//! where `(z0, t0)`, `(z1, t1)` are the grid nodes bracketing `z'`, i.e. the
//! inverse `z(t)` is linearized on each bracket.

use std::io::Write;

use crate::error::{Error, Result};

use super::{bisect, posterior_moments, MixtureSpec, PosteriorMoments};

/// Grid nodes used to bracket the level sets of `t(z)`.
pub const DEFAULT_GRID_NODES: usize = 10_000;

/// Half-width of the bracketing grid in standard deviations of `Z`.
const GRID_HALF_WIDTH: f64 = 6.0;

/// A point `z'` with `t(z') = t` together with its local inverse slope.
#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub z: f64,
    /// `(z1 - z0) / (t1 - t0)` of the bracketing nodes.
    pub slope: f64,
    pub posterior: PosteriorMoments,
}

#[derive(Debug, Clone)]
pub struct JointDensity {
    spec: MixtureSpec,
    z: Vec<f64>,
    t: Vec<f64>,
    /// Inclusive node ranges on which `t` is strictly monotone.
    runs: Vec<(usize, usize)>,
}

impl JointDensity {
    pub fn new(spec: &MixtureSpec) -> Result<Self> {
        Self::with_nodes(spec, DEFAULT_GRID_NODES)
    }

    pub fn with_nodes(spec: &MixtureSpec, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::config("bracketing grid needs at least three nodes"));
        }
        let (mean, sd) = spec.observation_moments();
        let (a, b) = (mean - GRID_HALF_WIDTH * sd, mean + GRID_HALF_WIDTH * sd);
        let z: Vec<f64> = (0..nodes).map(|i| a + (b - a) * i as f64 / (nodes - 1) as f64).collect();
        let t: Vec<f64> = z.iter().map(|&z| posterior_moments(spec, z).var).collect();
        let mut runs = Vec::new();
        let mut start = 0;
        let mut dir = 0i8;
        for i in 0..nodes - 1 {
            let d = match t[i + 1].partial_cmp(&t[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
            if d == 0 {
                // flat bracket: no transversal crossing, close the run here
                if i > start {
                    runs.push((start, i));
                }
                start = i + 1;
                dir = 0;
                continue;
            }
            if dir != 0 && d != dir {
                runs.push((start, i));
                start = i;
            }
            dir = d;
        }
        if nodes - 1 > start {
            runs.push((start, nodes - 1));
        }
        Ok(Self {
            spec: spec.clone(),
            z,
            t,
            runs,
        })
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    /// Smallest and largest `t` on the grid.
    pub fn t_range(&self) -> (f64, f64) {
        let lo = self.t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Sorted `t` values at the ends of the monotone runs, where `t(z)` has
    /// local extrema and the density has integrable spikes.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.runs.iter().flat_map(|&(s, e)| [self.t[s], self.t[e]]).collect();
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        b
    }

    /// All level-set crossings `t(z') = t` found on the grid.
    pub fn intersections(&self, t: f64) -> Result<Vec<Intersection>> {
        let (lo, hi) = self.t_range();
        if !(t >= lo && t <= hi) {
            return Err(Error::Domain(format!("t = {t} outside the attainable range [{lo}, {hi}]")));
        }
        let mut out = Vec::new();
        for &(start, end) in &self.runs {
            let increasing = self.t[end] > self.t[start];
            let nodes = &self.t[start..=end];
            // orient so that the run is increasing
            let key = |i: usize| if increasing { nodes[i] } else { -nodes[i] };
            let target = if increasing { t } else { -t };
            if target < key(0) || target >= key(nodes.len() - 1) {
                continue;
            }
            let (mut a, mut b) = (0, nodes.len() - 1);
            while b - a > 1 {
                let mid = (a + b) / 2;
                if key(mid) <= target {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let (i0, i1) = (start + a, start + b);
            let (t0, t1) = (self.t[i0], self.t[i1]);
            if t1 == t0 {
                continue;
            }
            let (z0, z1) = (self.z[i0], self.z[i1]);
            let sign = if increasing { 1.0 } else { -1.0 };
            let z = bisect(|z| sign * (posterior_moments(&self.spec, z).var - t), z0, z1);
            out.push(Intersection {
                z,
                slope: (z1 - z0) / (t1 - t0),
                posterior: posterior_moments(&self.spec, z),
            });
        }
        Ok(out)
    }

    /// Density at `s` given precomputed crossings of one `t`.
    pub fn density_from(&self, crossings: &[Intersection], s: f64) -> f64 {
        if !(s > 0.0) {
            return 0.0;
        }
        let r = s.sqrt();
        crossings
            .iter()
            .map(|c| {
                let m = c.posterior.mean;
                let p = self.spec.joint_pdf(m + r, c.z) + self.spec.joint_pdf(m - r, c.z);
                p * (c.slope / (2.0 * r)).abs()
            })
            .fold(0.0, |acc, v| acc + v)
    }

    pub fn density(&self, s: f64, t: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("s = {s} must be positive")));
        }
        Ok(self.density_from(&self.intersections(t)?, s))
    }

    /// Writes `s,t,density` rows for every combination of the given values;
    /// `t` outside the attainable range gets density 0.
    pub fn write_grid_csv<W: Write>(&self, s_values: &[f64], t_values: &[f64], out: &mut W) -> Result<()> {
        let io = |e| Error::io("<density grid>", e);
        writeln!(out, "s,t,density").map_err(io)?;
        for &t in t_values {
            let crossings = self.intersections(t).unwrap_or_default();
            for &s in s_values {
                writeln!(out, "{s:e},{t:e},{:e}", self.density_from(&crossings, s)).map_err(io)?;
            }
        }
        Ok(())
    }
}

/// Joint density of `(S, T)` at one point. Builds the bracketing grid on
/// every call; reuse a [`JointDensity`] for repeated evaluation.
pub fn joint_st_density(spec: &MixtureSpec, s: f64, t: f64) -> Result<f64> {
    JointDensity::new(spec)?.density(s, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_model_has_symmetric_level_sets() {
        let d = JointDensity::new(&MixtureSpec::reference()).unwrap();
        let (lo, hi) = d.t_range();
        let t = lo + 0.3 * (hi - lo);
        let mut zs: Vec<f64> = d.intersections(t).unwrap().iter().map(|c| c.z).collect();
        assert!(zs.len() >= 4 && zs.len().is_multiple_of(2), "{zs:?}");
        zs.sort_by(f64::total_cmp);
        for (a, b) in zs.iter().zip(zs.iter().rev()) {
            assert!((a + b).abs() < 1e-6);
        }
        for z in &zs {
            assert!((posterior_moments(d.spec(), *z).var - t).abs() < 1e-12 * t.max(1.0));
        }
    }

    #[test]
    fn out_of_range_and_nonpositive_inputs() {
        let d = JointDensity::with_nodes(&MixtureSpec::reference(), 2000).unwrap();
        let (lo, hi) = d.t_range();
        assert!(matches!(d.density(0.1, 2.0 * hi), Err(Error::Domain(_))));
        assert!(matches!(d.density(0.1, 0.5 * lo), Err(Error::Domain(_))));
        assert!(d.density(0.0, 0.5 * (lo + hi)).is_err());
        assert!(d.density(1e-3, 0.5 * (lo + hi)).unwrap() >= 0.0);
    }

    #[test]
    fn single_component_matches_closed_form() {
        // t is constant; every bracket is flat and no density is reported
        let spec = MixtureSpec::new(vec![0.0], vec![0.1], vec![1.0], 0.1).unwrap();
        let d = JointDensity::with_nodes(&spec, 500).unwrap();
        assert!(d.intersections(d.t_range().0).unwrap().is_empty());
    }

    #[test]
    fn grid_dump_has_all_rows() {
        let d = JointDensity::with_nodes(&MixtureSpec::reference(), 1000).unwrap();
        let (lo, hi) = d.t_range();
        let mut buf = Vec::new();
        d.write_grid_csv(&[1e-4, 1e-2], &[lo * 0.5, 0.5 * (lo + hi)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().ends_with(",0e0"));
    }
}
