//! Simplified Adam-mini: Adam's first moment per element, but a single
//! second-moment scalar per tensor tracking `mean(g²)`.

use crate::error::OptimError;
use crate::optim::adam::AdamHyper;
use crate::optim::{check_grads, init_or_check, Optimizer, StepInfo};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamMiniState {
    pub m: Matrix,
    pub v: f64,
    pub step: u64,
}

impl AdamMiniState {
    pub fn zeros_like(w: &Matrix) -> Self {
        Self {
            m: Matrix::zeros(w.rows(), w.cols()),
            v: 0.0,
            step: 0,
        }
    }
}

pub fn adam_mini_update(
    w: &mut Matrix,
    g: &Matrix,
    state: &mut AdamMiniState,
    lr: f64,
    hp: &AdamHyper,
) -> Result<(), OptimError> {
    crate::optim::transforms::ensure_finite(g, 0)?;
    if !w.same_shape(g) || !w.same_shape(&state.m) {
        return Err(crate::error::TensorError::ShapeMismatch {
            op: "adam_mini_update",
            left: w.shape(),
            right: g.shape(),
        }
        .into());
    }
    state.step += 1;
    let t = state.step as i32;
    let mean_sq = g.sum_squares() / g.len() as f64;
    state.v = hp.beta2 * state.v + (1.0 - hp.beta2) * mean_sq;
    let v_hat = state.v / (1.0 - hp.beta2.powi(t));
    let denom = v_hat.sqrt() + hp.eps;
    let bc1 = 1.0 - hp.beta1.powi(t);
    for ((wi, &gi), mi) in w.as_mut_slice().iter_mut().zip(g.as_slice()).zip(state.m.as_mut_slice()) {
        *mi = hp.beta1 * *mi + (1.0 - hp.beta1) * gi;
        *wi -= lr * (*mi / bc1) / denom;
    }
    Ok(())
}

pub fn adam_mini_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut AdamMiniState,
    lr: f64,
    hp: &AdamHyper,
) -> Result<Matrix, OptimError> {
    let mut w = w.clone();
    adam_mini_update(&mut w, g, state, lr, hp)?;
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct AdamMini {
    pub hyper: AdamHyper,
    states: Vec<AdamMiniState>,
    step: u64,
}

impl AdamMini {
    pub fn new(hyper: AdamHyper) -> Self {
        Self {
            hyper,
            states: Vec::new(),
            step: 0,
        }
    }
}

impl Optimizer for AdamMini {
    fn name(&self) -> String {
        "adam_mini".into()
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError> {
        check_grads(params, grads)?;
        init_or_check(&mut self.states, params, AdamMiniState::zeros_like)?;
        self.step += 1;
        for ((w, g), st) in params.iter_mut().zip(grads).zip(&mut self.states) {
            adam_mini_update(w, g, st, lr, &self.hyper)?;
        }
        Ok(StepInfo::unclipped(grads))
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }
}
