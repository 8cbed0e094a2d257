//! Experiment plumbing behind the command line: bound tables, trace
//! certification and CSV reports.

pub mod bounds;
pub mod certify;
pub mod experiment;

pub use bounds::{bounds_table, BoundRow};
pub use certify::{certify, CertReport, Level};
pub use experiment::{run_experiment, ExperimentReport, ExperimentSpec};
