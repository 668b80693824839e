//! Scenario runner behind the `pulsebranch` binary: a [`RunSpec`] describes
//! one pulse and statistics, [`run`] produces the population curves and
//! [`RunResult::write_csv`] the deterministic CSV.

pub mod run;
pub mod spec;

pub use run::{diagnose, run, sidecar_path, CliError, Diagnostics, Metadata, RunResult, Truncation, VERSION};
pub use spec::{RunSpec, Scenario, SpecError};
