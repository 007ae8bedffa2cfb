//! Side-by-side runs of configs that differ only in their optimizer block.

use std::path::Path;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{ConfigError, HarnessError};
use crate::harness::metrics::steps_to_target;
use crate::harness::run::{run, RunResult};
use crate::harness::sweep::pool;
use crate::harness::telemetry::{write_atomic, write_records_csv};

/// Trailing window used to smooth the loss before steps-to-target.
pub const TARGET_WINDOW: usize = 20;

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub name: String,
    pub result: RunResult,
    pub steps_to_target: Option<u64>,
    pub records_path: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub target: Option<f64>,
    pub rows: Vec<ComparisonRow>,
}

fn smoothed_final(r: &RunResult) -> Option<f64> {
    if r.diverged || r.records.is_empty() {
        return None;
    }
    let tail: Vec<f64> = r.records.iter().rev().take(TARGET_WINDOW).map(|x| x.loss).collect();
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "diverged".to_string(), |v| format!("{v:.6}"))
}

impl Comparison {
    /// Plain-text table, one row per config.
    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!(
            "{:width$}  {:>24}  {:>12}  {:>12}  {:>15}  {:>11}\n",
            "name", "optimizer", "final_loss", "val_loss", "steps_to_target", "loss_spikes"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:width$}  {:>24}  {:>12}  {:>12}  {:>15}  {:>11}\n",
                r.name,
                r.result.optimizer,
                fmt_opt(r.result.final_train_loss()),
                fmt_opt(r.result.final_val_loss),
                r.steps_to_target.map_or_else(|| "n/a".to_string(), |s| s.to_string()),
                r.result.loss_spikes,
            ));
        }
        match self.target {
            Some(t) => out.push_str(&format!("target loss: {t:.6} (trailing mean over {TARGET_WINDOW} steps)\n")),
            None => out.push_str("target loss: n/a\n"),
        }
        out
    }

    /// `name,optimizer,final_loss,val_loss,steps_to_target,loss_spikes`.
    /// Final loss is the last logged training loss, exactly as in the run's
    /// own CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,optimizer,final_loss,val_loss,steps_to_target,loss_spikes\n");
        for r in &self.rows {
            let cell = |x: Option<f64>| x.map_or_else(|| "diverged".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.name,
                r.result.optimizer,
                cell(r.result.final_train_loss()),
                cell(r.result.final_val_loss),
                r.steps_to_target.map_or_else(|| "n/a".to_string(), |s| s.to_string()),
                r.result.loss_spikes
            ));
        }
        out
    }
}

/// Runs every config and reports final losses and steps to reach `target`.
///
/// Configs must agree on every key outside `optimizer.*`. Without an explicit
/// target, the smoothed final loss of the first config is used (or, if it
/// diverged, the worst smoothed final loss among the others).
pub fn compare(
    configs: &[(String, RunConfig)],
    target: Option<f64>,
    jobs: usize,
    out_dir: Option<&Path>,
) -> Result<Comparison, HarnessError> {
    let Some((_, first)) = configs.first() else {
        return Err(HarnessError::Invalid("nothing to compare".into()));
    };
    let mut diverging: Vec<&str> = Vec::new();
    for (_, c) in &configs[1..] {
        for k in first.non_optimizer_differences(c) {
            if !diverging.contains(&k) {
                diverging.push(k);
            }
        }
    }
    if !diverging.is_empty() {
        return Err(ConfigError::Incompatible {
            keys: diverging.join(", "),
        }
        .into());
    }

    let results: Vec<Result<RunResult, HarnessError>> =
        pool(jobs)?.install(|| configs.par_iter().map(|(_, c)| run(c)).collect());
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let target = target.or_else(|| {
        smoothed_final(&results[0]).or_else(|| results.iter().filter_map(smoothed_final).reduce(f64::max))
    });
    let mut rows = Vec::with_capacity(configs.len());
    for (i, ((name, _), result)) in configs.iter().zip(results).enumerate() {
        let records_path = match out_dir {
            Some(dir) => {
                let path = dir.join(format!("{i:02}_{name}.csv"));
                write_records_csv(&path, &result.records)?;
                Some(path.display().to_string())
            }
            None => None,
        };
        let steps = target.and_then(|t| steps_to_target(&result.losses(), t, TARGET_WINDOW));
        rows.push(ComparisonRow {
            name: name.clone(),
            result,
            steps_to_target: steps,
            records_path,
        });
    }
    let cmp = Comparison { target, rows };
    if let Some(dir) = out_dir {
        write_atomic(&dir.join("comparison.csv"), cmp.to_csv().as_bytes())?;
    }
    Ok(cmp)
}
