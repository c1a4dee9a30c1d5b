//! Conformalized error quantiles conditioned on the estimated posterior
//! variance.
//!
//! Calibration records `(s, t_hat)` are grouped into variance bins; each bin
//! stores the `ceil((N+1) q)`-th smallest error of its `N` records, or the
//! essential supremum of the error when that rank does not exist. For an
//! exchangeable test pixel falling in the same bin the stored value bounds
//! its error with probability at least `q`.

mod evaluate;
mod quantile;
mod records;

pub use evaluate::{coverage, dataset_coverage, mutual_information, MiOptions};
pub use quantile::{
    build_table, conformal_quantile, conformal_rank, predict_quantile, BinScale, BinningScheme, QuantileTable,
    DEFAULT_INTERIOR_BINS,
};
pub use records::{
    pool_records, read_records_csv, records_from_maps, squared_error_map, write_records_csv, BinningParams,
    CalibrationRecord, CalibrationTables, Pooling,
};

/// Default essential supremum of the squared error of unit-range images.
pub const DEFAULT_ESS_SUP: f64 = 1.0;
