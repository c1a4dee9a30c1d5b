//! Calibration records, pixel pooling and pooled quantile tables.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

use super::quantile::{build_table, data_lines, expect_header, parse_f64, split, BinScale, BinningScheme, QuantileTable};

/// Squared error `s` of a pixel together with its estimated posterior
/// variance `t_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRecord {
    s: f64,
    t_hat: f64,
}

impl CalibrationRecord {
    pub fn new(s: f64, t_hat: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0 && t_hat.is_finite() && t_hat >= 0.0) {
            return Err(Error::Domain(format!(
                "record needs finite non-negative values, got s={s}, t_hat={t_hat}"
            )));
        }
        Ok(Self { s, t_hat })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t_hat(&self) -> f64 {
        self.t_hat
    }
}

/// Per-pixel squared error `(x_hat - x)^2`.
pub fn squared_error_map(x_hat: &ImageGrid, truth: &ImageGrid) -> Result<ImageGrid> {
    x_hat.zip_map(truth, |a, b| (a - b) * (a - b))
}

/// One record per pixel of an error map and a variance map.
pub fn records_from_maps(s: &ImageGrid, t_hat: &ImageGrid) -> Result<Vec<CalibrationRecord>> {
    s.ensure_same_shape(t_hat)?;
    s.as_slice()
        .iter()
        .zip(t_hat.as_slice())
        .map(|(&s, &t)| CalibrationRecord::new(s, t))
        .collect()
}

/// Writes a `s,t_hat` CSV.
pub fn write_records_csv<W: Write>(records: &[CalibrationRecord], out: &mut W) -> Result<()> {
    let io = |e| Error::io("<records>", e);
    writeln!(out, "s,t_hat").map_err(io)?;
    for r in records {
        writeln!(out, "{},{}", r.s, r.t_hat).map_err(io)?;
    }
    Ok(())
}

/// Reads a `s,t_hat` CSV, skipping `#` comment lines.
pub fn read_records_csv<R: BufRead>(input: R) -> Result<Vec<CalibrationRecord>> {
    let lines = data_lines(input)?;
    let mut it = lines.iter();
    expect_header(it.next(), "s,t_hat")?;
    it.map(|l| {
        let f = split(Some(l), 2)?;
        CalibrationRecord::new(parse_f64(f[0])?, parse_f64(f[1])?)
    })
    .collect()
}

/// How pixels of a dataset are grouped into calibration sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// All pixels of all images form one set.
    Joint,
    /// One set per pixel position, across images.
    Separate,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Joint => "joint",
            Pooling::Separate => "separate",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Pooling::Joint),
            "separate" => Ok(Pooling::Separate),
            other => Err(Error::config(format!("unknown pooling mode '{other}'"))),
        }
    }
}

/// Splits `(s, t_hat)` map pairs into calibration sets.
pub fn pool_records(mode: Pooling, images: &[(ImageGrid, ImageGrid)]) -> Result<Vec<Vec<CalibrationRecord>>> {
    let Some((first, _)) = images.first() else {
        return Ok(Vec::new());
    };
    for (s, t) in images {
        s.ensure_same_shape(t)?;
        if mode == Pooling::Separate {
            first.ensure_same_shape(s)?;
        }
    }
    match mode {
        Pooling::Joint => {
            let mut all = Vec::with_capacity(images.iter().map(|(s, _)| s.len()).sum());
            for (s, t) in images {
                all.extend(records_from_maps(s, t)?);
            }
            Ok(vec![all])
        }
        Pooling::Separate => (0..first.len())
            .map(|p| {
                images
                    .iter()
                    .map(|(s, t)| CalibrationRecord::new(s.as_slice()[p], t.as_slice()[p]))
                    .collect()
            })
            .collect(),
    }
}

/// Quantile tables for one quantile level under either pooling mode.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationTables {
    Joint(QuantileTable),
    Separate {
        height: usize,
        width: usize,
        tables: Vec<QuantileTable>,
    },
}

/// Binning applied to every calibration set before building its table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningParams {
    pub interior_bins: usize,
    pub scale: BinScale,
}

impl Default for BinningParams {
    fn default() -> Self {
        Self {
            interior_bins: super::quantile::DEFAULT_INTERIOR_BINS,
            scale: BinScale::Logarithmic,
        }
    }
}

fn table_for(records: &[CalibrationRecord], params: BinningParams, q: f64, ess_sup: f64) -> Result<QuantileTable> {
    let t: Vec<f64> = records.iter().map(|r| r.t_hat()).collect();
    let bins = match BinningScheme::fit(&t, params.interior_bins, params.scale) {
        Ok(b) => b,
        // every variance estimate is zero: nothing to condition on
        Err(Error::Statistical(_)) => BinningScheme::single(),
        Err(e) => return Err(e),
    };
    build_table(records, &bins, q, ess_sup)
}

impl CalibrationTables {
    pub fn calibrate(
        mode: Pooling,
        images: &[(ImageGrid, ImageGrid)],
        params: BinningParams,
        q: f64,
        ess_sup: f64,
    ) -> Result<Self> {
        let sets = pool_records(mode, images)?;
        if sets.is_empty() {
            return Err(Error::Statistical("no calibration images".into()));
        }
        match mode {
            Pooling::Joint => Ok(CalibrationTables::Joint(table_for(&sets[0], params, q, ess_sup)?)),
            Pooling::Separate => {
                let (height, width) = images[0].0.dims();
                let tables = sets
                    .iter()
                    .map(|set| table_for(set, params, q, ess_sup))
                    .collect::<Result<_>>()?;
                Ok(CalibrationTables::Separate { height, width, tables })
            }
        }
    }

    pub fn pooling(&self) -> Pooling {
        match self {
            CalibrationTables::Joint(_) => Pooling::Joint,
            CalibrationTables::Separate { .. } => Pooling::Separate,
        }
    }

    fn first(&self) -> &QuantileTable {
        match self {
            CalibrationTables::Joint(t) => t,
            CalibrationTables::Separate { tables, .. } => &tables[0],
        }
    }

    pub fn q(&self) -> f64 {
        self.first().q()
    }

    pub fn ess_sup(&self) -> f64 {
        self.first().ess_sup()
    }

    /// Predicted error quantile of every pixel.
    pub fn predict_map(&self, t_hat: &ImageGrid) -> Result<ImageGrid> {
        match self {
            CalibrationTables::Joint(t) => Ok(t.predict_map(t_hat)),
            CalibrationTables::Separate { height, width, tables } => {
                if t_hat.dims() != (*height, *width) {
                    return Err(Error::Shape {
                        expected: (*height, *width),
                        got: t_hat.dims(),
                    });
                }
                let data = t_hat.as_slice().iter().zip(tables).map(|(&t, table)| table.predict(t)).collect();
                Ok(ImageGrid::from_vec_unchecked(*height, *width, data))
            }
        }
    }

    /// Joint tables use the plain table layout; separate tables add a
    /// `height,width` block and a leading `pixel` column.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        match self {
            CalibrationTables::Joint(t) => t.write_csv(out),
            CalibrationTables::Separate { height, width, tables } => {
                let io = |e| Error::io("<quantile tables>", e);
                let first = &tables[0];
                writeln!(out, "q,ess_sup,scale").map_err(io)?;
                writeln!(out, "{},{},{}", first.q(), first.ess_sup(), first.bins().scale()).map_err(io)?;
                writeln!(out, "height,width").map_err(io)?;
                writeln!(out, "{height},{width}").map_err(io)?;
                writeln!(out, "pixel,t_lo,t_hi,n,quantile").map_err(io)?;
                for (p, t) in tables.iter().enumerate() {
                    t.write_rows(Some(p), out).map_err(io)?;
                }
                Ok(())
            }
        }
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let lines = data_lines(input)?;
        if lines.get(2).map(String::as_str) != Some("height,width") {
            let text = lines.join("\n");
            return Ok(CalibrationTables::Joint(QuantileTable::read_csv(text.as_bytes())?));
        }
        let mut it = lines.iter();
        expect_header(it.next(), "q,ess_sup,scale")?;
        let meta = split(it.next(), 3)?;
        let (q, ess_sup, scale): (f64, f64, BinScale) = (parse_f64(meta[0])?, parse_f64(meta[1])?, meta[2].parse()?);
        expect_header(it.next(), "height,width")?;
        let dims = split(it.next(), 2)?;
        let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad dimension '{s}'")));
        let (height, width) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
        expect_header(it.next(), "pixel,t_lo,t_hi,n,quantile")?;
        let mut per_pixel: Vec<Vec<Vec<&str>>> = vec![Vec::new(); height * width];
        for line in it {
            let f = split(Some(line), 5)?;
            let p = parse_dim(f[0])?;
            per_pixel
                .get_mut(p)
                .ok_or_else(|| Error::Format(format!("pixel index {p} out of range")))?
                .push(f[1..].to_vec());
        }
        let tables = per_pixel
            .iter()
            .map(|rows| QuantileTable::from_rows(q, ess_sup, scale, rows))
            .collect::<Result<_>>()?;
        Ok(CalibrationTables::Separate { height, width, tables })
    }
}
