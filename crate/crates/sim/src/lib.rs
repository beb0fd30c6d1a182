//! Scenario runner, file formats and command-line support for the
//! `pvcoat-core` flight model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundled;
pub mod error;
pub mod harness;
pub mod io;
pub mod noise;
pub mod scenario;
pub mod synthetic;

pub use error::SimError;
pub use harness::{compute_rmse, run_scenario, LogRow, RunMetrics, RunOutput, TrackingSample};
pub use scenario::Scenario;
