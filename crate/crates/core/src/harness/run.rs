//! The training loop.

use crate::config::{ModelKind, RunConfig};
use crate::error::HarnessError;
use crate::harness::metrics::{count_loss_spikes, global_grad_norm};
use crate::harness::schedule::Schedule;
use crate::harness::telemetry::StepRecord;
use crate::models::{inject_spikes, MlpModel, MlpShape, QuadraticProblem, SyntheticDataset};
use crate::tensor::{Matrix, Rng};

/// Multiplier in the loss-spike rule.
pub const LOSS_SPIKE_FACTOR: f64 = 2.0;

// Independent RNG streams derived from the run seed.
const STREAM_INIT: u64 = 1;
const STREAM_BATCH: u64 = 2;
const STREAM_SPIKE: u64 = 3;
const STREAM_CENTERS: u64 = 4;

fn stream(seed: u64, id: u64) -> u64 {
    // splitmix64 finalizer over (seed, id)
    let mut z = seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub optimizer: String,
    pub lr_peak: f64,
    pub records: Vec<StepRecord>,
    /// Held-out loss after the last step; `None` if the run diverged.
    pub final_val_loss: Option<f64>,
    pub diverged: bool,
    /// Steps flagged by the loss-spike rule.
    pub loss_spikes: usize,
}

impl RunResult {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss).filter(|l| l.is_finite() && !self.diverged)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn max_grad_norm(&self) -> f64 {
        self.records.iter().map(|r| r.grad_norm_pre).fold(0.0, f64::max)
    }
}

enum Testbed {
    Mlp {
        model: MlpModel,
        train: SyntheticDataset,
        val: SyntheticDataset,
        batch: usize,
    },
    Quadratic {
        problem: QuadraticProblem,
        optimum_loss: f64,
    },
}

impl Testbed {
    fn build(cfg: &RunConfig) -> Result<Self, HarnessError> {
        let m = &cfg.model;
        let mut init = Rng::new(stream(cfg.seed, STREAM_INIT));
        match m.kind {
            ModelKind::Mlp => {
                let centers = stream(cfg.seed, STREAM_CENTERS);
                let train = SyntheticDataset::generate(m.train_size, m.input_dim, m.classes, m.separation, centers, cfg.seed);
                let val = SyntheticDataset::generate(
                    m.val_size,
                    m.input_dim,
                    m.classes,
                    m.separation,
                    centers,
                    cfg.seed.wrapping_add(1),
                );
                let shape = MlpShape {
                    input_dim: m.input_dim,
                    hidden: m.hidden,
                    depth: m.depth,
                    classes: m.classes,
                };
                Ok(Testbed::Mlp {
                    model: MlpModel::new(shape, cfg.quant, &mut init),
                    train,
                    val,
                    batch: m.batch_size,
                })
            }
            ModelKind::Quadratic => {
                let problem = QuadraticProblem::random(m.dim, &mut init);
                let optimum_loss = problem.loss_at(&problem.optimum())?;
                Ok(Testbed::Quadratic { problem, optimum_loss })
            }
        }
    }

    fn params_mut(&mut self) -> &mut [Matrix] {
        match self {
            Testbed::Mlp { model, .. } => &mut model.params,
            Testbed::Quadratic { problem, .. } => std::slice::from_mut(&mut problem.w),
        }
    }

    /// Training loss and (possibly spike-corrupted) gradients for one step.
    /// MLP spikes corrupt the input batch; quadratic spikes corrupt the
    /// gradient directly.
    fn loss_and_grads(
        &self,
        cfg: &RunConfig,
        batch_rng: &mut Rng,
        spike_rng: &mut Rng,
    ) -> Result<(f64, Vec<Matrix>), HarnessError> {
        let sp = cfg.spikes;
        match self {
            Testbed::Mlp { model, train, batch, .. } => {
                let (x, y) = train.sample_batch(*batch, batch_rng);
                let x = inject_spikes(&x, sp.probability, sp.severity, spike_rng);
                model.loss_and_grads(&x, &y)
            }
            Testbed::Quadratic { problem, optimum_loss } => {
                let (loss, g) = problem.loss_grad()?;
                let g = inject_spikes(&g, sp.probability, sp.severity, spike_rng);
                Ok((loss - optimum_loss, vec![g]))
            }
        }
    }

    fn eval_loss(&self) -> Result<f64, HarnessError> {
        match self {
            Testbed::Mlp { model, val, .. } => model.loss(&val.inputs, &val.labels),
            Testbed::Quadratic { problem, optimum_loss } => Ok(problem.loss_at(&problem.w)? - optimum_loss),
        }
    }
}

fn finite_below(x: f64, limit: f64) -> bool {
    x.is_finite() && x <= limit
}

/// Trains the configured model with the configured optimizer.
///
/// A NaN/Inf loss or gradient, or a loss above `divergence_loss`, ends the
/// run with a final record flagged `diverged`. Divergence is a result, not
/// an error.
pub fn run(cfg: &RunConfig) -> Result<RunResult, HarnessError> {
    run_with(cfg, |_, _| {})
}

/// [`run`] with an observer called after each step with its record and the
/// gradients the optimizer consumed.
pub fn run_with(
    cfg: &RunConfig,
    mut observe: impl FnMut(&StepRecord, &[Matrix]),
) -> Result<RunResult, HarnessError> {
    let mut testbed = Testbed::build(cfg)?;
    let mut opt = cfg.optimizer.build()?;
    let schedule = Schedule::new(&cfg.schedule, cfg.total_steps);
    let mut batch_rng = Rng::new(stream(cfg.seed, STREAM_BATCH));
    let mut spike_rng = Rng::new(stream(cfg.seed, STREAM_SPIKE));
    let mut records = Vec::with_capacity(cfg.total_steps as usize);
    let mut diverged = false;

    for step in 1..=cfg.total_steps {
        let lr = schedule.lr_at(step);
        let (loss, grads) = testbed.loss_and_grads(cfg, &mut batch_rng, &mut spike_rng)?;
        let pre = global_grad_norm(&grads);
        if !finite_below(loss, cfg.divergence_loss) || !pre.is_finite() {
            records.push(StepRecord {
                step,
                loss,
                grad_norm_pre: pre,
                grad_norm_post: f64::NAN,
                clipped_fraction: 0.0,
                effective_lr: lr,
                reset: false,
                diverged: true,
            });
            observe(records.last().expect("just pushed"), &grads);
            diverged = true;
            break;
        }
        let info = opt.step(testbed.params_mut(), &grads, lr)?;
        records.push(StepRecord {
            step,
            loss,
            grad_norm_pre: pre,
            grad_norm_post: info.post_grad_norm,
            clipped_fraction: info.clipped_fraction,
            effective_lr: lr * info.lr_multiplier,
            reset: info.reset,
            diverged: false,
        });
        observe(records.last().expect("just pushed"), &grads);
    }

    let mut final_val_loss = None;
    if !diverged {
        let params_ok = testbed.params_mut().iter().all(Matrix::is_finite);
        let val = if params_ok { testbed.eval_loss()? } else { f64::NAN };
        if finite_below(val, cfg.divergence_loss) {
            final_val_loss = Some(val);
        } else {
            diverged = true;
            if let Some(last) = records.last_mut() {
                last.diverged = true;
            }
        }
    }

    let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
    Ok(RunResult {
        optimizer: opt.name(),
        lr_peak: cfg.schedule.lr_peak,
        loss_spikes: count_loss_spikes(&losses, LOSS_SPIKE_FACTOR),
        records,
        final_val_loss,
        diverged,
    })
}
