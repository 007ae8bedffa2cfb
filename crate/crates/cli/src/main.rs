use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stable_spam::config::{parse_config, parse_lr_grid, RunConfig};
use stable_spam::error::HarnessError;
use stable_spam::harness::telemetry::write_atomic;
use stable_spam::harness::{compare, run, sweep, write_records_csv};
use stable_spam::selftest;

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

/// Stability experiments for spike-aware optimizers under low-precision
/// training.
#[derive(Debug, Parser)]
#[command(name = "stable-spam", version)]
struct Cli {
    /// More output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only print errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train once and write the step telemetry.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Train once per learning rate in the grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Learning-rate grid `start:end:step`, a comma list, or a preset
        /// (`narrow`, `wide`). Overrides `sweep.lr_grid`.
        #[arg(long, value_name = "GRID")]
        lr_grid: Option<String>,
        /// Concurrent runs [default: grid size, capped at available cores].
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run configs that differ only in their optimizer block side by side.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Additional configs to compare against the first.
        #[arg(value_name = "CONFIG", required = true)]
        others: Vec<PathBuf>,
        /// Loss target for steps-to-target [default: the first config's
        /// smoothed final loss].
        #[arg(long, allow_negative_numbers = true)]
        target: Option<f64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(short, long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory.
    #[arg(short, long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Config(String),
    Internal(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Internal(other.to_string()),
        }
    }
}

struct Ui {
    verbose: u8,
    quiet: bool,
}

impl Ui {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn detail(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = parse_config(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn default_jobs(points: usize) -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    points.clamp(1, cores)
}

fn fmt_loss(x: Option<f64>) -> String {
    x.map_or_else(|| "diverged".into(), |l| format!("{l:.6}"))
}

fn save_config(out: &Path, cfg: &RunConfig, name: &str) -> Result<(), Failure> {
    write_atomic(&out.join(name), cfg.to_config_string().as_bytes())?;
    Ok(())
}

fn cmd_run(ui: &Ui, common: &Common) -> Result<bool, Failure> {
    let cfg = load(&common.config, common.seed)?;
    ui.detail(format!("resolved config:\n{}", cfg.to_config_string()));
    let result = run(&cfg)?;
    let records = common.out.join("records.csv");
    write_records_csv(&records, &result.records)?;
    save_config(&common.out, &cfg, "config.txt")?;
    let summary = json!({
        "optimizer": result.optimizer,
        "lr": cfg.schedule.lr_peak,
        "steps": result.records.len(),
        "final_loss": result.final_val_loss.map_or(json!("diverged"), |l| json!(l)),
        "final_train_loss": result.final_train_loss(),
        "loss_spikes": result.loss_spikes,
        "records_path": records.display().to_string(),
    });
    let text = serde_json::to_string_pretty(&summary).expect("json values serialize");
    write_atomic(&common.out.join("summary.json"), text.as_bytes())?;
    ui.say(format!(
        "{} lr={:e}: val loss {} after {} steps, {} loss spikes",
        result.optimizer,
        cfg.schedule.lr_peak,
        fmt_loss(result.final_val_loss),
        result.records.len(),
        result.loss_spikes
    ));
    ui.say(format!("wrote {}", records.display()));
    Ok(!result.diverged)
}

fn cmd_sweep(ui: &Ui, common: &Common, lr_grid: Option<&str>, jobs: Option<usize>) -> Result<bool, Failure> {
    let cfg = load(&common.config, common.seed)?;
    let grid = match lr_grid {
        Some(g) => parse_lr_grid(g).map_err(|e| Failure::Config(format!("--lr-grid: {e}")))?,
        None => cfg.lr_grid.clone(),
    };
    let jobs = jobs.unwrap_or_else(|| default_jobs(grid.len()));
    ui.detail(format!("{} learning rates, {jobs} jobs", grid.len()));
    let result = sweep(&cfg, &grid, jobs, Some(&common.out))?;
    save_config(&common.out, &cfg, "config.txt")?;
    ui.say(format!("{:>12}  {:>12}  {:>11}", "lr", "final_loss", "loss_spikes"));
    for p in &result.points {
        let mark = if Some(p.lr) == result.best_lr { " *" } else { "" };
        ui.say(format!(
            "{:>12e}  {:>12}  {:>11}{mark}",
            p.lr,
            fmt_loss(p.final_loss()),
            p.result.loss_spikes
        ));
    }
    ui.say(format!("wrote {}", common.out.join("summary.json").display()));
    Ok(!result.all_diverged())
}

fn cmd_compare(
    ui: &Ui,
    common: &Common,
    others: &[PathBuf],
    target: Option<f64>,
    jobs: Option<usize>,
) -> Result<bool, Failure> {
    let mut configs = Vec::with_capacity(others.len() + 1);
    for path in std::iter::once(&common.config).chain(others) {
        let stem = path.file_stem().map_or_else(|| "config".into(), |s| s.to_string_lossy().into_owned());
        let name = if configs.iter().any(|(n, _): &(String, RunConfig)| *n == stem) {
            format!("{stem}_{}", configs.len())
        } else {
            stem
        };
        configs.push((name, load(path, common.seed)?));
    }
    let jobs = jobs.unwrap_or_else(|| default_jobs(configs.len()));
    let cmp = compare(&configs, target, jobs, Some(&common.out))?;
    ui.say(cmp.table().trim_end());
    ui.say(format!("wrote {}", common.out.join("comparison.csv").display()));
    Ok(cmp.rows.iter().any(|r| !r.result.diverged))
}

fn cmd_selftest(ui: &Ui) -> bool {
    let outcomes = selftest::run_all();
    for o in &outcomes {
        if o.passed {
            ui.say(format!("PASS  {}", o.name));
        } else {
            println!("FAIL  {}: {}", o.name, o.detail);
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    ui.say(format!("{} checks, {failed} failed", outcomes.len()));
    failed == 0
}

fn main() -> ExitCode {
    // usage errors share the config-error exit code; 2 is reserved for
    // all-diverged
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let ui = Ui {
        verbose: cli.verbose,
        quiet: cli.quiet,
    };
    let outcome = match &cli.command {
        Command::Run { common } => cmd_run(&ui, common),
        Command::Sweep { common, lr_grid, jobs } => cmd_sweep(&ui, common, lr_grid.as_deref(), *jobs),
        Command::Compare {
            common,
            others,
            target,
            jobs,
        } => cmd_compare(&ui, common, others, *target, *jobs),
        Command::Selftest => {
            return if cmd_selftest(&ui) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INTERNAL)
            }
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("every run diverged");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
