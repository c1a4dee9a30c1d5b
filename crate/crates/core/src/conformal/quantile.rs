//! Conformalized quantiles, variance binning and quantile tables.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

use super::records::CalibrationRecord;

fn check_level(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::config(format!("quantile level {q} must lie in (0, 1)")));
    }
    Ok(())
}

/// 1-based index `ceil((n + 1) q)` of the conformalized order statistic.
pub fn conformal_rank(n: usize, q: f64) -> usize {
    let x = (n as f64 + 1.0) * q;
    let nearest = x.round();
    // products such as 10 * 0.9 can land an ulp above the intended integer
    let rank = if (x - nearest).abs() <= 4.0 * f64::EPSILON * x { nearest } else { x.ceil() };
    (rank as usize).max(1)
}

/// The `ceil((N+1) q)`-th smallest value, or `ess_sup` if that rank exceeds `N`.
pub fn conformal_quantile(values: &[f64], q: f64, ess_sup: f64) -> Result<f64> {
    check_level(q)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("calibration values must be finite".into()));
    }
    let rank = conformal_rank(values.len(), q);
    if rank > values.len() {
        return Ok(ess_sup);
    }
    let mut sorted = values.to_vec();
    let (_, kth, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*kth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinScale {
    Linear,
    Logarithmic,
}

impl fmt::Display for BinScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinScale::Linear => "linear",
            BinScale::Logarithmic => "log",
        })
    }
}

impl FromStr for BinScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(BinScale::Linear),
            "log" | "logarithmic" => Ok(BinScale::Logarithmic),
            other => Err(Error::config(format!("unknown bin scale '{other}'"))),
        }
    }
}

/// Partition of `[0, inf)` by strictly increasing positive edges
/// `e_0 < ... < e_{K-1}` into `[0, e_0), [e_0, e_1), ..., [e_{K-1}, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningScheme {
    edges: Vec<f64>,
    scale: BinScale,
}

pub const DEFAULT_INTERIOR_BINS: usize = 25;

impl BinningScheme {
    pub fn from_edges(edges: Vec<f64>, scale: BinScale) -> Result<Self> {
        if edges.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::config("bin edges must be finite and positive"));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("bin edges must be strictly increasing"));
        }
        Ok(Self { edges, scale })
    }

    /// A single bin covering everything.
    pub fn single() -> Self {
        Self {
            edges: Vec::new(),
            scale: BinScale::Linear,
        }
    }

    /// `interior` equal-width (linear) or equal-ratio (log) bins spanning the
    /// range of the positive values of `t_hats`, plus open-ended outer bins.
    pub fn fit(t_hats: &[f64], interior: usize, scale: BinScale) -> Result<Self> {
        if interior == 0 {
            return Err(Error::config("need at least one interior bin"));
        }
        let positive = t_hats.iter().copied().filter(|t| *t > 0.0 && t.is_finite());
        let (lo, hi) = positive.fold((f64::INFINITY, 0.0f64), |(lo, hi), t| (lo.min(t), hi.max(t)));
        if !lo.is_finite() {
            return Err(Error::Statistical("no positive variance estimates to bin".into()));
        }
        if lo == hi {
            return Self::from_edges(vec![lo], scale);
        }
        let edges = (0..=interior)
            .map(|k| {
                let f = k as f64 / interior as f64;
                match (k, scale) {
                    (0, _) => lo,
                    (k, _) if k == interior => hi,
                    (_, BinScale::Linear) => lo + f * (hi - lo),
                    (_, BinScale::Logarithmic) => (lo.ln() + f * (hi.ln() - lo.ln())).exp(),
                }
            })
            .collect::<Vec<_>>();
        // exp/ln roundoff could break strict monotonicity for very narrow ranges
        let mut clean: Vec<f64> = Vec::with_capacity(edges.len());
        for e in edges {
            if clean.last().is_none_or(|&l| e > l) && e > 0.0 {
                clean.push(e);
            }
        }
        Self::from_edges(clean, scale)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn scale(&self) -> BinScale {
        self.scale
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() + 1
    }

    /// Index of the bin containing `t`; `t = 0` and anything below the first
    /// edge land in bin 0.
    pub fn bin_index(&self, t: f64) -> usize {
        self.edges.partition_point(|&e| e <= t)
    }

    /// `[lo, hi)` of bin `k`, with `lo = 0` for the first and `hi = inf` for
    /// the last bin.
    pub fn bin_range(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { 0.0 } else { self.edges[k - 1] };
        let hi = self.edges.get(k).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

/// Conformalized error quantile per variance bin.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    q: f64,
    ess_sup: f64,
    bins: BinningScheme,
    counts: Vec<usize>,
    quantiles: Vec<f64>,
}

/// Groups `records` by bin and takes the conformal quantile of each group.
pub fn build_table(records: &[CalibrationRecord], bins: &BinningScheme, q: f64, ess_sup: f64) -> Result<QuantileTable> {
    check_level(q)?;
    if records.is_empty() {
        return Err(Error::Statistical("no calibration records".into()));
    }
    if !(ess_sup >= 0.0) {
        return Err(Error::config("ess_sup must be non-negative"));
    }
    let mut groups = vec![Vec::new(); bins.bin_count()];
    for r in records {
        groups[bins.bin_index(r.t_hat())].push(r.s());
    }
    let counts = groups.iter().map(Vec::len).collect();
    let quantiles = groups
        .iter()
        .map(|g| conformal_quantile(g, q, ess_sup))
        .collect::<Result<_>>()?;
    Ok(QuantileTable {
        q,
        ess_sup,
        bins: bins.clone(),
        counts,
        quantiles,
    })
}

/// Table lookup `S_q(t_hat)`.
pub fn predict_quantile(table: &QuantileTable, t_hat: f64) -> f64 {
    table.quantiles[table.bins.bin_index(t_hat)]
}

impl QuantileTable {
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn ess_sup(&self) -> f64 {
        self.ess_sup
    }

    pub fn bins(&self) -> &BinningScheme {
        &self.bins
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn predict(&self, t_hat: f64) -> f64 {
        predict_quantile(self, t_hat)
    }

    /// Applies [`predict_quantile`] to every pixel of a variance map.
    pub fn predict_map(&self, t_hat: &ImageGrid) -> ImageGrid {
        let data = t_hat.as_slice().iter().map(|&t| self.predict(t)).collect();
        ImageGrid::from_vec_unchecked(t_hat.height(), t_hat.width(), data)
    }

    pub(crate) fn write_rows<W: Write>(&self, prefix: Option<usize>, out: &mut W) -> std::io::Result<()> {
        for (k, (&n, &quantile)) in self.counts.iter().zip(&self.quantiles).enumerate() {
            let (lo, hi) = self.bins.bin_range(k);
            if let Some(p) = prefix {
                write!(out, "{p},")?;
            }
            writeln!(out, "{lo},{hi},{n},{quantile}")?;
        }
        Ok(())
    }

    /// CSV with a `q,ess_sup,scale` header row followed by
    /// `t_lo,t_hi,n,quantile` rows, one per bin.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let io = |e| Error::io("<quantile table>", e);
        writeln!(out, "q,ess_sup,scale").map_err(io)?;
        writeln!(out, "{},{},{}", self.q, self.ess_sup, self.bins.scale).map_err(io)?;
        writeln!(out, "t_lo,t_hi,n,quantile").map_err(io)?;
        self.write_rows(None, out).map_err(io)
    }

    /// Parses the output of [`QuantileTable::write_csv`]; lines starting
    /// with `#` are ignored.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let lines = data_lines(input)?;
        let mut it = lines.iter();
        expect_header(it.next(), "q,ess_sup,scale")?;
        let meta = split(it.next(), 3)?;
        let (q, ess_sup, scale) = (parse_f64(meta[0])?, parse_f64(meta[1])?, meta[2].parse()?);
        expect_header(it.next(), "t_lo,t_hi,n,quantile")?;
        let rows = it.map(|l| split(Some(l), 4)).collect::<Result<Vec<_>>>()?;
        Self::from_rows(q, ess_sup, scale, &rows)
    }

    pub(crate) fn from_rows(q: f64, ess_sup: f64, scale: BinScale, rows: &[Vec<&str>]) -> Result<Self> {
        check_level(q)?;
        if rows.is_empty() {
            return Err(Error::Format("quantile table has no bins".into()));
        }
        let mut edges = Vec::new();
        let mut counts = Vec::new();
        let mut quantiles = Vec::new();
        for (k, row) in rows.iter().enumerate() {
            let lo = parse_f64(row[0])?;
            if k == 0 {
                if lo != 0.0 {
                    return Err(Error::Format("first bin must start at 0".into()));
                }
            } else {
                edges.push(lo);
            }
            counts.push(
                row[2]
                    .parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad count '{}'", row[2])))?,
            );
            quantiles.push(parse_f64(row[3])?);
        }
        if parse_f64(rows[rows.len() - 1][1])? != f64::INFINITY {
            return Err(Error::Format("last bin must be open-ended".into()));
        }
        let bins = BinningScheme::from_edges(edges, scale).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self {
            q,
            ess_sup,
            bins,
            counts,
            quantiles,
        })
    }
}

pub(crate) fn data_lines<R: BufRead>(input: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<csv>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(trimmed.to_string());
    }
    Ok(out)
}

pub(crate) fn expect_header(line: Option<&String>, header: &str) -> Result<()> {
    match line {
        Some(l) if l == header => Ok(()),
        Some(l) => Err(Error::Format(format!("expected header '{header}', got '{l}'"))),
        None => Err(Error::Format(format!("missing header '{header}'"))),
    }
}

pub(crate) fn split(line: Option<&String>, fields: usize) -> Result<Vec<&str>> {
    let line = line.ok_or_else(|| Error::Format("unexpected end of input".into()))?;
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != fields {
        return Err(Error::Format(format!("expected {fields} fields in '{line}'")));
    }
    Ok(parts)
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Format(format!("bad number '{s}'")))
}
