//! Sum-product belief propagation on a 4-connected grid MRF.
//!
//! The TV-ℓ2 posterior restricted to the labels `l_k = k/L` factors into
//! unary terms `(l - z)^2 / (2 sigma^2)` and pairwise terms `|l - l'| / lambda`
//! on horizontal and vertical neighbours. Messages live in the log domain
//! and are renormalized after every update. One iteration consists of four
//! raster sweeps (left→right, right→left, top→bottom, bottom→top), each
//! updating in place the messages pointing in its direction, so on a chain a
//! single iteration is an exact forward-backward pass.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::samplers::ChainStats;

/// Labels `l_k = k / levels`, `k = 0..=levels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSpace {
    levels: usize,
}

impl LabelSpace {
    pub fn new(levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::config("label space needs at least two labels"));
        }
        Ok(Self { levels })
    }

    /// Number of labels, `levels + 1`.
    pub fn count(&self) -> usize {
        self.levels + 1
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Label spacing `1 / levels`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.levels as f64
    }

    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        k as f64 / self.levels as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count()).map(|k| self.value(k)).collect()
    }
}

/// Grid MRF with per-pixel unary energies and `weight * |l - l'|` pairwise
/// energies on the 4-neighbourhood.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfModel {
    height: usize,
    width: usize,
    labels: LabelSpace,
    /// Pixel-major table of unary energies (negative log potentials).
    unary: Vec<f64>,
    pairwise_weight: f64,
}

impl MrfModel {
    pub fn new(
        height: usize,
        width: usize,
        labels: LabelSpace,
        unary: Vec<f64>,
        pairwise_weight: f64,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::config("MRF grid must be non-empty"));
        }
        let expected = height * width * labels.count();
        if unary.len() != expected {
            return Err(Error::Format(format!(
                "unary table needs {expected} entries, got {}",
                unary.len()
            )));
        }
        if unary.iter().any(|u| !u.is_finite()) {
            return Err(Error::Domain("unary energies must be finite".into()));
        }
        if !(pairwise_weight >= 0.0 && pairwise_weight.is_finite()) {
            return Err(Error::config("pairwise weight must be finite and non-negative"));
        }
        Ok(Self {
            height,
            width,
            labels,
            unary,
            pairwise_weight,
        })
    }

    /// Discretized TV-ℓ2 denoising posterior for the observation `z`.
    pub fn tv_denoising(z: &ImageGrid, sigma: f64, lambda: f64, labels: LabelSpace) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config("sigma and lambda must be positive"));
        }
        let c = 1.0 / (2.0 * sigma * sigma);
        let n = labels.count();
        let mut unary = Vec::with_capacity(z.len() * n);
        for &zv in z.as_slice() {
            unary.extend((0..n).map(|k| c * (labels.value(k) - zv).powi(2)));
        }
        Self::new(z.height(), z.width(), labels, unary, 1.0 / lambda)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> LabelSpace {
        self.labels
    }

    pub fn pairwise_weight(&self) -> f64 {
        self.pairwise_weight
    }

    pub fn unary(&self, pixel: usize) -> &[f64] {
        let n = self.labels.count();
        &self.unary[pixel * n..(pixel + 1) * n]
    }
}

/// Per-pixel label distributions, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    height: usize,
    width: usize,
    labels: usize,
    probs: Vec<f64>,
}

impl Marginals {
    pub fn new(height: usize, width: usize, labels: usize, probs: Vec<f64>) -> Result<Self> {
        if labels == 0 || probs.len() != height * width * labels {
            return Err(Error::Format("marginal table has the wrong size".into()));
        }
        for (p, row) in probs.chunks(labels).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("marginal of pixel {p} is not a distribution")));
            }
        }
        Ok(Self {
            height,
            width,
            labels,
            probs,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.probs[index * self.labels..(index + 1) * self.labels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of label `k` at every pixel.
    pub fn label_grid(&self, k: usize) -> ImageGrid {
        let data = (0..self.height * self.width).map(|p| self.pixel(p)[k]).collect();
        ImageGrid::from_vec_unchecked(self.height, self.width, data)
    }

    /// Writes `col,label,probability` rows for every pixel of image row `row`.
    pub fn write_row_csv<W: Write>(&self, labels: LabelSpace, row: usize, out: &mut W) -> Result<()> {
        if row >= self.height || labels.count() != self.labels {
            return Err(Error::Shape {
                expected: (self.height, self.labels),
                got: (row, labels.count()),
            });
        }
        let io = |e| Error::io("<marginal slice>", e);
        writeln!(out, "col,label,probability").map_err(io)?;
        for j in 0..self.width {
            for (k, p) in self.pixel(row * self.width + j).iter().enumerate() {
                writeln!(out, "{j},{},{p:e}", labels.value(k)).map_err(io)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpOptions {
    pub iterations: usize,
    /// Weight of the previous message in a convex update, `0` disables damping.
    pub damping: f64,
}

impl BpOptions {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            damping: 0.0,
        }
    }

    pub fn with_damping(self, damping: f64) -> Self {
        Self { damping, ..self }
    }
}

/// Above this pairwise weight `exp(-w |Δl|)` may underflow for far labels.
const LINEAR_KERNEL_LIMIT: f64 = 600.0;

/// Turns a cavity log-belief into an outgoing normalized log-message.
enum PairKernel {
    /// `exp(-w |l_a - l_b|)`, row-major.
    Linear(Vec<f64>),
    /// `w |l_a - l_b|`, evaluated with a full log-sum-exp.
    Log(Vec<f64>),
}

impl PairKernel {
    fn new(labels: LabelSpace, weight: f64) -> Self {
        let n = labels.count();
        let cost: Vec<f64> = (0..n * n)
            .map(|ab| weight * (labels.value(ab / n) - labels.value(ab % n)).abs())
            .collect();
        if weight < LINEAR_KERNEL_LIMIT {
            PairKernel::Linear(cost.into_iter().map(|c| (-c).exp()).collect())
        } else {
            PairKernel::Log(cost)
        }
    }

    fn message(&self, h: &[f64], out: &mut [f64], weights: &mut [f64]) {
        let n = h.len();
        let m = max(h);
        match self {
            PairKernel::Linear(k) => {
                for (w, &v) in weights.iter_mut().zip(h) {
                    *w = (v - m).exp();
                }
                out.iter_mut().for_each(|o| *o = 0.0);
                for (a, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &kab) in out.iter_mut().zip(&k[a * n..(a + 1) * n]) {
                        *o += w * kab;
                    }
                }
                out.iter_mut().for_each(|o| *o = o.ln());
            }
            PairKernel::Log(cost) => {
                for (b, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for a in 0..n {
                        acc += (h[a] - m - cost[a * n + b]).exp();
                    }
                    *o = acc.ln();
                }
            }
        }
        normalize_log(out);
    }
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn normalize_log(v: &mut [f64]) {
    let m = max(v);
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter_mut().for_each(|x| *x -= lse);
}

struct Scratch {
    belief: Vec<f64>,
    fresh: Vec<f64>,
    weights: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            belief: vec![0.0; n],
            fresh: vec![0.0; n],
            weights: vec![0.0; n],
        }
    }
}

/// `-unary + sum of the given incoming log-messages`.
fn accumulate<const K: usize>(unary: &[f64], incoming: [Option<&[f64]>; K], out: &mut [f64]) {
    for (o, &u) in out.iter_mut().zip(unary) {
        *o = -u;
    }
    for msg in incoming.into_iter().flatten() {
        for (o, &v) in out.iter_mut().zip(msg) {
            *o += v;
        }
    }
}

#[inline]
fn at(v: &[f64], pixel: usize, n: usize) -> &[f64] {
    &v[pixel * n..(pixel + 1) * n]
}

struct Engine<'a> {
    model: &'a MrfModel,
    kernel: PairKernel,
    damping: f64,
    n: usize,
    /// Message sent from each pixel to its right / left / lower / upper neighbour.
    right: Vec<f64>,
    left: Vec<f64>,
    down: Vec<f64>,
    up: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(model: &'a MrfModel, damping: f64) -> Self {
        let n = model.labels.count();
        let size = model.height * model.width * n;
        let uniform = -(n as f64).ln();
        Self {
            model,
            kernel: PairKernel::new(model.labels, model.pairwise_weight),
            damping,
            n,
            right: vec![uniform; size],
            left: vec![uniform; size],
            down: vec![uniform; size],
            up: vec![uniform; size],
        }
    }

    fn emit(&self, scratch: &mut Scratch, out: &mut [f64]) {
        self.kernel.message(&scratch.belief, &mut scratch.fresh, &mut scratch.weights);
        if self.damping > 0.0 {
            for (o, &f) in out.iter_mut().zip(&scratch.fresh) {
                *o = self.damping * *o + (1.0 - self.damping) * f;
            }
            normalize_log(out);
        } else {
            out.copy_from_slice(&scratch.fresh);
        }
    }

    /// Left→right (`forward`) or right→left sweep; rows are independent.
    fn sweep_horizontal(&mut self, forward: bool) {
        let (m, w, n) = (self.model.height, self.model.width, self.n);
        if w < 2 {
            return;
        }
        let mut target = std::mem::take(if forward { &mut self.right } else { &mut self.left });
        let this = &*self;
        target.par_chunks_mut(w * n).enumerate().for_each(|(i, row)| {
            let mut s = Scratch::new(n);
            let cols: Vec<usize> = if forward { (0..w - 1).collect() } else { (1..w).rev().collect() };
            for j in cols {
                let p = i * w + j;
                // the message arriving along the sweep was written one step earlier
                let along = if forward {
                    (j > 0).then(|| at(row, j - 1, n))
                } else {
                    (j + 1 < w).then(|| at(row, j + 1, n))
                };
                let above = (i > 0).then(|| at(&this.down, p - w, n));
                let below = (i + 1 < m).then(|| at(&this.up, p + w, n));
                accumulate(this.model.unary(p), [along, above, below], &mut s.belief);
                this.emit(&mut s, &mut row[j * n..(j + 1) * n]);
            }
        });
        *(if forward { &mut self.right } else { &mut self.left }) = target;
    }

    /// Top→bottom (`forward`) or bottom→top sweep; pixels of a row are
    /// independent.
    fn sweep_vertical(&mut self, forward: bool) {
        let (m, w, n) = (self.model.height, self.model.width, self.n);
        if m < 2 {
            return;
        }
        let mut target = std::mem::take(if forward { &mut self.down } else { &mut self.up });
        let this = &*self;
        let rows: Vec<usize> = if forward { (0..m - 1).collect() } else { (1..m).rev().collect() };
        for i in rows {
            let (before, rest) = target.split_at_mut(i * w * n);
            let (row, after) = rest.split_at_mut(w * n);
            let (before, after) = (&*before, &*after);
            row.par_chunks_mut(n).enumerate().for_each(|(j, out)| {
                let mut s = Scratch::new(n);
                let p = i * w + j;
                let along = if forward {
                    (i > 0).then(|| at(before, p - w, n))
                } else {
                    (i + 1 < m).then(|| at(after, j, n))
                };
                let left = (j > 0).then(|| at(&this.right, p - 1, n));
                let right = (j + 1 < w).then(|| at(&this.left, p + 1, n));
                accumulate(this.model.unary(p), [along, left, right], &mut s.belief);
                this.emit(&mut s, out);
            });
        }
        *(if forward { &mut self.down } else { &mut self.up }) = target;
    }

    fn iterate(&mut self) {
        self.sweep_horizontal(true);
        self.sweep_horizontal(false);
        self.sweep_vertical(true);
        self.sweep_vertical(false);
    }

    fn beliefs(&self) -> Marginals {
        let (m, w, n) = (self.model.height, self.model.width, self.n);
        let mut probs = vec![0.0; m * w * n];
        probs.par_chunks_mut(n).enumerate().for_each(|(p, out)| {
            let (i, j) = (p / w, p % w);
            let incoming = [
                (j > 0).then(|| at(&self.right, p - 1, n)),
                (j + 1 < w).then(|| at(&self.left, p + 1, n)),
                (i > 0).then(|| at(&self.down, p - w, n)),
                (i + 1 < m).then(|| at(&self.up, p + w, n)),
            ];
            accumulate(self.model.unary(p), incoming, out);
            normalize_log(out);
            out.iter_mut().for_each(|v| *v = v.exp());
            let total: f64 = out.iter().sum();
            out.iter_mut().for_each(|v| *v /= total);
        });
        Marginals {
            height: m,
            width: w,
            labels: n,
            probs,
        }
    }
}

fn check_options(options: &BpOptions) -> Result<()> {
    if options.iterations == 0 {
        return Err(Error::config("belief propagation needs at least one iteration"));
    }
    if !(0.0..1.0).contains(&options.damping) {
        return Err(Error::config("damping must lie in [0, 1)"));
    }
    Ok(())
}

/// Runs `options.iterations` sweep iterations from uniform messages and
/// returns the beliefs.
pub fn bp_sweep(model: &MrfModel, options: BpOptions) -> Result<Marginals> {
    check_options(&options)?;
    let mut engine = Engine::new(model, options.damping);
    for _ in 0..options.iterations {
        engine.iterate();
    }
    Ok(engine.beliefs())
}

/// Like [`bp_sweep`], also returning the largest absolute belief change of
/// every iteration.
pub fn bp_sweep_traced(model: &MrfModel, options: BpOptions) -> Result<(Marginals, Vec<f64>)> {
    check_options(&options)?;
    let mut engine = Engine::new(model, options.damping);
    let mut previous = engine.beliefs();
    let mut changes = Vec::with_capacity(options.iterations);
    for _ in 0..options.iterations {
        engine.iterate();
        let next = engine.beliefs();
        let delta = previous
            .probs
            .iter()
            .zip(&next.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        changes.push(delta);
        previous = next;
    }
    Ok((previous, changes))
}

/// Per-pixel mean and variance of the marginals.
pub fn bp_moments(marginals: &Marginals, labels: LabelSpace) -> Result<(ImageGrid, ImageGrid)> {
    if labels.count() != marginals.labels {
        return Err(Error::Shape {
            expected: (marginals.labels, 1),
            got: (labels.count(), 1),
        });
    }
    let values = labels.values();
    let d = marginals.height * marginals.width;
    let mut mean = Vec::with_capacity(d);
    let mut var = Vec::with_capacity(d);
    for p in 0..d {
        let probs = marginals.pixel(p);
        let mu: f64 = probs.iter().zip(&values).map(|(w, l)| w * l).sum();
        let v: f64 = probs.iter().zip(&values).map(|(w, l)| w * (l - mu).powi(2)).sum();
        mean.push(mu);
        var.push(v);
    }
    Ok((
        ImageGrid::from_vec_unchecked(marginals.height, marginals.width, mean),
        ImageGrid::from_vec_unchecked(marginals.height, marginals.width, var),
    ))
}

/// Mean absolute differences between BP moments and sampled chain moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentGap {
    pub mean: f64,
    pub variance: f64,
}

impl MomentGap {
    /// Mean absolute differences of two moment pairs.
    pub fn between(mean_a: &ImageGrid, var_a: &ImageGrid, mean_b: &ImageGrid, var_b: &ImageGrid) -> Result<Self> {
        Ok(MomentGap {
            mean: mean_a.mean_abs_diff(mean_b)?,
            variance: var_a.mean_abs_diff(var_b)?,
        })
    }
}

pub fn compare_to_chain(bp_mean: &ImageGrid, bp_var: &ImageGrid, chain: &ChainStats) -> Result<MomentGap> {
    MomentGap::between(bp_mean, bp_var, &chain.mean(), &chain.variance())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn softmax_neg(u: &[f64]) -> Vec<f64> {
        let m = u.iter().copied().fold(f64::INFINITY, f64::min);
        let e: Vec<f64> = u.iter().map(|v| (m - v).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    /// Exact marginals by enumerating all labelings.
    fn brute_force(model: &MrfModel) -> Vec<f64> {
        let (m, w) = model.dims();
        let labels = model.labels();
        let n = labels.count();
        let d = m * w;
        let mut energies = Vec::new();
        for code in 0..n.pow(d as u32) {
            let lab: Vec<usize> = (0..d).map(|p| code / n.pow(p as u32) % n).collect();
            let mut e = 0.0;
            for p in 0..d {
                e += model.unary(p)[lab[p]];
                let l = labels.value(lab[p]);
                if p % w + 1 < w {
                    e += model.pairwise_weight() * (l - labels.value(lab[p + 1])).abs();
                }
                if p + w < d {
                    e += model.pairwise_weight() * (l - labels.value(lab[p + w])).abs();
                }
            }
            energies.push((lab, e));
        }
        let emin = energies.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let mut probs = vec![0.0; d * n];
        let mut z = 0.0;
        for (lab, e) in &energies {
            let wgt = (emin - e).exp();
            z += wgt;
            for p in 0..d {
                probs[p * n + lab[p]] += wgt;
            }
        }
        probs.iter_mut().for_each(|v| *v /= z);
        probs
    }

    fn random_model(h: usize, w: usize, levels: usize, weight: f64, seed: u64) -> MrfModel {
        let labels = LabelSpace::new(levels).unwrap();
        let n = labels.count();
        let unary = (0..h * w * n)
            .map(|i| ((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 300.0)
            .collect();
        MrfModel::new(h, w, labels, unary, weight).unwrap()
    }

    fn max_gap(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn no_pairwise_gives_unary_softmax() {
        let model = random_model(3, 4, 5, 0.0, 1);
        let marg = bp_sweep(&model, BpOptions::new(3)).unwrap();
        for p in 0..12 {
            assert!(max_gap(marg.pixel(p), &softmax_neg(model.unary(p))) < 1e-12);
        }
    }

    #[test]
    fn chains_are_exact_after_one_iteration() {
        let row = random_model(1, 3, 2, 1.7, 3);
        let marg = bp_sweep(&row, BpOptions::new(1)).unwrap();
        assert!(max_gap(marg.as_slice(), &brute_force(&row)) < 1e-8);
        let column = random_model(4, 1, 3, 2.5, 8);
        let marg = bp_sweep(&column, BpOptions::new(1)).unwrap();
        assert!(max_gap(marg.as_slice(), &brute_force(&column)) < 1e-8);
    }

    #[test]
    fn loopy_grid_converges_and_approximates() {
        let model = random_model(3, 3, 4, 1.0, 5);
        let (_, changes) = bp_sweep_traced(&model, BpOptions::new(10)).unwrap();
        assert!(changes[9] < 1e-6, "{changes:?}");
        let model = random_model(3, 3, 2, 1.0, 5);
        let marg = bp_sweep(&model, BpOptions::new(10)).unwrap();
        let worst = max_gap(marg.as_slice(), &brute_force(&model));
        assert!(worst < 0.05, "{worst}");
    }

    #[test]
    fn log_kernel_path_agrees_with_linear() {
        let labels = LabelSpace::new(4).unwrap();
        let h = vec![-0.3, 0.2, -1.0, 0.5, 0.0];
        let lin = PairKernel::new(labels, 10.0);
        let log = PairKernel::Log(
            (0..25)
                .map(|ab| 10.0 * (labels.value(ab / 5) - labels.value(ab % 5)).abs())
                .collect(),
        );
        let (mut a, mut b, mut scratch) = (vec![0.0; 5], vec![0.0; 5], vec![0.0; 5]);
        lin.message(&h, &mut a, &mut scratch);
        log.message(&h, &mut b, &mut scratch);
        assert!(max_gap(&a, &b) < 1e-12);
        let strong = random_model(2, 2, 8, 5000.0, 4);
        let marg = bp_sweep(&strong, BpOptions::new(2)).unwrap();
        assert!(marg.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn moments_match_direct_sums() {
        let labels = LabelSpace::new(4).unwrap();
        let probs = vec![0.1, 0.2, 0.4, 0.2, 0.1, 1.0, 0.0, 0.0, 0.0, 0.0];
        let marg = Marginals::new(1, 2, 5, probs).unwrap();
        let (mean, var) = bp_moments(&marg, labels).unwrap();
        assert!((mean.as_slice()[0] - 0.5).abs() < 1e-15);
        let v = 2.0 * 0.1 * 0.25 + 2.0 * 0.2 * 0.0625;
        assert!((var.as_slice()[0] - v).abs() < 1e-15);
        assert_eq!(mean.as_slice()[1], 0.0);
        assert_eq!(var.as_slice()[1], 0.0);
    }

    #[test]
    fn refining_labels_moves_moments_less_than_spacing() {
        let z = ImageGrid::from_fn(4, 4, |i, j| 0.3 + 0.4 * ((i + j) % 2) as f64);
        let coarse = LabelSpace::new(32).unwrap();
        let fine = LabelSpace::new(64).unwrap();
        let m1 = MrfModel::tv_denoising(&z, 0.1, 0.2, coarse).unwrap();
        let m2 = MrfModel::tv_denoising(&z, 0.1, 0.2, fine).unwrap();
        let (a, _) = bp_moments(&bp_sweep(&m1, BpOptions::new(10)).unwrap(), coarse).unwrap();
        let (b, _) = bp_moments(&bp_sweep(&m2, BpOptions::new(10)).unwrap(), fine).unwrap();
        assert!(a.mean_abs_diff(&b).unwrap() < coarse.spacing());
    }

    #[test]
    fn damping_keeps_the_fixed_point() {
        let model = random_model(1, 4, 3, 1.2, 6);
        let exact = bp_sweep(&model, BpOptions::new(1)).unwrap();
        let damped = bp_sweep(&model, BpOptions::new(60).with_damping(0.5)).unwrap();
        assert!(max_gap(exact.as_slice(), damped.as_slice()) < 1e-8);
        assert!(bp_sweep(&model, BpOptions::new(1).with_damping(1.0)).is_err());
        assert!(bp_sweep(&model, BpOptions::new(0)).is_err());
    }

    #[test]
    fn row_csv_lists_every_label() {
        let labels = LabelSpace::new(2).unwrap();
        let marg = Marginals::new(2, 2, 3, vec![1.0 / 3.0; 12]).unwrap();
        let mut buf = Vec::new();
        marg.write_row_csv(labels, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        assert!(text.starts_with("col,label,probability\n0,0,"));
        assert!(marg.write_row_csv(labels, 2, &mut Vec::new()).is_err());
    }

    proptest! {
        #[test]
        fn beliefs_are_distributions(seed in 0u64..500, weight in 0.0f64..20.0, h in 1usize..4, w in 1usize..4) {
            let model = random_model(h, w, 3, weight, seed);
            let marg = bp_sweep(&model, BpOptions::new(3)).unwrap();
            for p in 0..h * w {
                let s: f64 = marg.pixel(p).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(marg.pixel(p).iter().all(|v| *v >= 0.0));
            }
        }
    }
}
