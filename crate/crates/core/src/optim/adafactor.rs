//! Adafactor with factored second moments and update clipping.
//!
//! Matrices keep one row accumulator and one column accumulator; vectors
//! (one row or one column) keep a full second moment instead.

use crate::error::OptimError;
use crate::optim::{check_grads, Optimizer, StepInfo};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdafactorConfig {
    /// Added to `g²` before accumulation.
    pub eps1: f64,
    /// Floor on the parameter RMS when `scale_parameter` is on.
    pub eps2: f64,
    /// Update clipping threshold on `rms(u)`.
    pub clip_threshold: f64,
    /// Exponent `c` in `β̂_t = 1 - t^(-c)`.
    pub decay_rate: f64,
    /// Multiply the step size by `max(eps2, rms(w))`.
    pub scale_parameter: bool,
}

impl Default for AdafactorConfig {
    fn default() -> Self {
        Self {
            eps1: 1e-30,
            eps2: 1e-3,
            clip_threshold: 1.0,
            decay_rate: 0.8,
            scale_parameter: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SecondMoment {
    Factored { row: Matrix, col: Matrix },
    Full(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdafactorState {
    pub step: u64,
    pub second: SecondMoment,
}

impl AdafactorState {
    pub fn zeros_like(w: &Matrix) -> Self {
        let second = if w.rows() > 1 && w.cols() > 1 {
            SecondMoment::Factored {
                row: Matrix::zeros(w.rows(), 1),
                col: Matrix::zeros(1, w.cols()),
            }
        } else {
            SecondMoment::Full(Matrix::zeros(w.rows(), w.cols()))
        };
        Self { step: 0, second }
    }

    /// Current second-moment estimate `V̂`.
    pub fn estimate(&self) -> Matrix {
        match &self.second {
            SecondMoment::Full(v) => v.clone(),
            SecondMoment::Factored { row, col } => {
                let row_mean = row.mean();
                let mut out = Matrix::zeros(row.rows(), col.cols());
                for i in 0..row.rows() {
                    for j in 0..col.cols() {
                        out[(i, j)] = row[(i, 0)] * col[(0, j)] / row_mean;
                    }
                }
                out
            }
        }
    }
}

/// One Adafactor step on a single tensor, in place.
pub fn adafactor_update(
    w: &mut Matrix,
    g: &Matrix,
    state: &mut AdafactorState,
    cfg: &AdafactorConfig,
    lr: f64,
) -> Result<(), OptimError> {
    crate::optim::transforms::ensure_finite(g, 0)?;
    state.step += 1;
    let beta = 1.0 - (state.step as f64).powf(-cfg.decay_rate);
    let g2 = g.map(|x| x * x + cfg.eps1);
    match &mut state.second {
        SecondMoment::Full(v) => {
            for (vi, &x) in v.as_mut_slice().iter_mut().zip(g2.as_slice()) {
                *vi = beta * *vi + (1.0 - beta) * x;
            }
        }
        SecondMoment::Factored { row, col } => {
            let rm = g2.row_means();
            let cm = g2.col_means();
            for (r, &x) in row.as_mut_slice().iter_mut().zip(rm.as_slice()) {
                *r = beta * *r + (1.0 - beta) * x;
            }
            for (c, &x) in col.as_mut_slice().iter_mut().zip(cm.as_slice()) {
                *c = beta * *c + (1.0 - beta) * x;
            }
        }
    }
    let v_hat = state.estimate();
    let mut u = g.zip_map(&v_hat, |gi, vi| gi / vi.sqrt())?;
    let denom = (u.rms() / cfg.clip_threshold).max(1.0);
    u.map_inplace(|x| x / denom);
    let step_size = if cfg.scale_parameter {
        lr * cfg.eps2.max(w.rms())
    } else {
        lr
    };
    w.axpy(-step_size, &u)?;
    Ok(())
}

pub fn adafactor_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut AdafactorState,
    cfg: &AdafactorConfig,
    lr: f64,
) -> Result<Matrix, OptimError> {
    let mut w = w.clone();
    adafactor_update(&mut w, g, state, cfg, lr)?;
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct Adafactor {
    pub config: AdafactorConfig,
    states: Vec<AdafactorState>,
    step: u64,
}

impl Adafactor {
    pub fn new(config: AdafactorConfig) -> Self {
        Self {
            config,
            states: Vec::new(),
            step: 0,
        }
    }
}

impl Optimizer for Adafactor {
    fn name(&self) -> String {
        "adafactor".into()
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError> {
        check_grads(params, grads)?;
        crate::optim::init_or_check(&mut self.states, params, AdafactorState::zeros_like)?;
        self.step += 1;
        for ((w, g), st) in params.iter_mut().zip(grads).zip(&mut self.states) {
            adafactor_update(w, g, st, &self.config, lr)?;
        }
        Ok(StepInfo::unclipped(grads))
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }
}
