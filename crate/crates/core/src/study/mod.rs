//! Configured experiments: parameter sweeps over the membrane thickness and
//! `z_m`, solver diagnostics, and their reports.

pub mod config;
pub mod diagnostics;
pub mod report;
pub mod runner;

pub use config::{StudyConfig, StudyKind};
pub use report::{emit_plot_data, write_outcome};
pub use runner::{run, Check, StudyOutcome};
