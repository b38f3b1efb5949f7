//! Configuration, experiment orchestration and result files for the
//! `gglab` simulator.
//!
//! A run is described by a JSON [`RunConfig`]; [`run_single`] integrates it
//! and writes `energy.csv`, `fit.json` and `summary.json`. Sweeps expand a
//! base config over dotted field paths and run the cells on a thread pool.
//! Convergence studies refine `dt` (and optionally `dx`) level by level.

pub mod config;
pub mod convergence;
pub mod output;
pub mod presets;
pub mod runner;
pub mod sweep;

pub use config::{load_config, ConfigError, RunConfig, ValidationErrors};
pub use convergence::{run_convergence, ConvergenceReport, Order, RefinementMode};
pub use runner::{run_single, simulate, RunReport, RunStatus};
pub use sweep::{run_sweep, Axis, SweepConfig, SweepReport};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INVALID: i32 = 1;
    pub const FAILED: i32 = 2;
}

/// Loads a sweep from a file or a `preset:NAME` reference.
pub fn load_sweep(source: &str) -> Result<SweepConfig, ConfigError> {
    if let Some(name) = source.strip_prefix("preset:") {
        return presets::sweep_preset(name);
    }
    SweepConfig::from_json(&config::read_text(std::path::Path::new(source))?)
}
