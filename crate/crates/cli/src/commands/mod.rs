//! One module per subcommand. Each entry point validates the whole
//! configuration before reading any image.

pub mod calibrate;
pub mod corrupt;
pub mod evaluate;
pub mod predict;
pub mod study;
pub mod toy;

pub use calibrate::{calibrate, table_path};
pub use corrupt::corrupt;
pub use evaluate::{evaluate, ImageMetrics};
pub use predict::predict;
pub use study::{bp_compare, checkpoint_schedule, convergence_rows, thinning_study, CheckpointRow};
pub use toy::toy;
