//! Experiment driver for the collaborative-perception simulator.
//!
//! The library behind the `camsim` binary. It layers three concerns on
//! top of [`camsim_core`]:
//!
//! * [`config`] — a versioned TOML run configuration with documented
//!   defaults, strict validation, and builders for every core model;
//! * [`sweep`] — seeded parameter sweeps over named axes, run through
//!   five end-to-end metric pipelines and rendered as deterministic
//!   CSV, plus pinned presets reproducing each studied effect;
//! * [`report`] — offline aggregation of sweep CSVs into summary
//!   tables.
//!
//! Determinism contract: every random stream derives from the single
//! `master_seed` in the config, and all outputs (CSV bytes included)
//! are identical across runs and worker counts.

pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use config::{load_config, save_config, RunConfig, SCHEMA_VERSION};
pub use error::CliError;
