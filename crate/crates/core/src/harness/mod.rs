//! Experiment harness: training loop, LR sweeps and optimizer comparisons.

pub mod compare;
pub mod metrics;
pub mod run;
pub mod schedule;
pub mod sweep;
pub mod telemetry;

pub use compare::{compare, Comparison, ComparisonRow};
pub use metrics::{detect_loss_spike, global_grad_norm, steps_to_target};
pub use run::{run, run_with, RunResult};
pub use schedule::Schedule;
pub use sweep::{sweep, SweepPoint, SweepResult};
pub use telemetry::{read_records_csv, write_records_csv, StepRecord, CSV_HEADER};
