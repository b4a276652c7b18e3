//! Scenario files, the run pipeline and report emission for the
//! `spectral-dga` command line tool.

pub mod bundled;
pub mod error;
pub mod pipeline;
pub mod record;
pub mod report;
pub mod scenario;

pub use error::{HarnessError, Result};
pub use pipeline::{run_comparison, run_scenario, thread_count, validate_scenario, RunOptions, RunOutput, DEFAULT_MAX_DIM};
pub use record::{fmt_f64, CheckRecord, RunRecord, Timings, TOOL_VERSION};
pub use report::{emit_report, emit_timings, parse_json, render, Format};
pub use scenario::Scenario;
