//! Closed-loop trials, controller comparisons, reports and the data pipeline.

pub mod config;
mod grid;
pub mod pipeline;
mod report;
mod trial;

pub use config::{Scenario, ScenarioConfig};
pub use grid::{run_grid, trial_seeds, CellReport, ErrorReport, GridOutput, Models, TrialResult};
pub use report::{
    emit_report, hardware_result, markdown, read_trials_csv, trace_file_name, write_summary_csv, write_trace_csv,
    write_trials_csv, HardwareResult, HARDWARE_RESULTS,
};
pub use trial::{
    flight_log_header, run_trial, tracking_error, ControllerKind, FlightLog, LogRow, Predictor, TrajectoryChoice,
    TrialSpec,
};
