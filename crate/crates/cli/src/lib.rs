//! Configuration loading, experiment drivers and CSV output for the
//! `starswipt` command.

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, parse_spec, Axis, ExperimentSpec};
pub use run::{run_grid, run_optimize, Mode, Outcome};
