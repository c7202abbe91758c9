//! Experiment runner: JSON experiment specs in, plottable CSV out.
//!
//! An experiment sweeps one parameter over a list of values, for one or
//! more series (curves), evaluating each point along the selected paths:
//! exact or ball-approximation Monte Carlo, the analytic approximation, or
//! the analytic lower bound.

pub mod run;
pub mod spec;

pub use run::{run_experiment, RunError, RunOptions, RunReport, CSV_HEADER};
pub use spec::{Diagnostic, EvalPath, ExperimentKind, ExperimentSpec};

use std::fs;
use std::path::Path;

/// Reads and parses a spec file; the error is a single printable message.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ExperimentSpec::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}
