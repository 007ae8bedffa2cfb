//! Learning-rate sweeps run in parallel over a bounded worker pool.

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::HarnessError;
use crate::harness::run::{run, RunResult};
use crate::harness::telemetry::{write_atomic, write_records_csv};

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub lr: f64,
    pub result: RunResult,
    pub records_path: Option<String>,
}

impl SweepPoint {
    pub fn final_loss(&self) -> Option<f64> {
        self.result.final_val_loss
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// LR with the lowest finite final loss; ties go to the smaller LR.
    pub best_lr: Option<f64>,
}

impl SweepResult {
    pub fn all_diverged(&self) -> bool {
        self.points.iter().all(|p| p.result.diverged)
    }

    pub fn best(&self) -> Option<&SweepPoint> {
        let lr = self.best_lr?;
        self.points.iter().find(|p| p.lr == lr)
    }

    /// Summary with one entry per grid point; diverged points carry the
    /// string `"diverged"` in place of a loss.
    pub fn to_json(&self) -> Value {
        let points: Vec<Value> = self
            .points
            .iter()
            .map(|p| {
                json!({
                    "lr": p.lr,
                    "final_loss": p.final_loss().map_or(json!("diverged"), |l| json!(l)),
                    "records_path": p.records_path,
                })
            })
            .collect();
        json!({ "points": points, "best_lr": self.best_lr })
    }
}

pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Invalid(format!("cannot start worker pool: {e}")))
}

fn lr_file_name(index: usize, lr: f64) -> String {
    format!("lr{index:02}_{lr:e}.csv")
}

/// Runs `base` once per learning rate in `grid` with at most `jobs` runs in
/// flight. When `out_dir` is given each trace is written there as CSV along
/// with `summary.json`. Results are independent of `jobs`.
pub fn sweep(base: &RunConfig, grid: &[f64], jobs: usize, out_dir: Option<&Path>) -> Result<SweepResult, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Invalid("learning-rate grid is empty".into()));
    }
    let results: Vec<Result<SweepPoint, HarnessError>> = pool(jobs)?.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &lr)| {
                let mut cfg = base.clone();
                cfg.schedule.lr_peak = lr;
                let result = run(&cfg)?;
                let records_path = match out_dir {
                    Some(dir) => {
                        let path = dir.join(lr_file_name(i, lr));
                        write_records_csv(&path, &result.records)?;
                        Some(path.display().to_string())
                    }
                    None => None,
                };
                Ok(SweepPoint {
                    lr,
                    result,
                    records_path,
                })
            })
            .collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let best_lr = points
        .iter()
        .filter_map(|p| p.final_loss().map(|l| (l, p.lr)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|(_, lr)| lr);
    let result = SweepResult { points, best_lr };
    if let Some(dir) = out_dir {
        let text = serde_json::to_string_pretty(&result.to_json()).expect("json values serialize");
        write_atomic(&dir.join("summary.json"), text.as_bytes())?;
    }
    Ok(result)
}
