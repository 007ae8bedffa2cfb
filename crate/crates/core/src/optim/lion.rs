use crate::error::OptimError;
use crate::optim::{check_grads, init_or_check, Optimizer, StepInfo};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LionConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for LionConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.99,
            weight_decay: 0.0,
        }
    }
}

/// `sign` with `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One Lion step in place: `w -= lr * (sign(β1 m + (1-β1) g) + wd * w)`,
/// then `m = β2 m + (1-β2) g`.
pub fn lion_update(
    w: &mut Matrix,
    g: &Matrix,
    m: &mut Matrix,
    lr: f64,
    cfg: &LionConfig,
) -> Result<(), OptimError> {
    crate::optim::transforms::ensure_finite(g, 0)?;
    if !w.same_shape(g) || !w.same_shape(m) {
        return Err(crate::error::TensorError::ShapeMismatch {
            op: "lion_update",
            left: w.shape(),
            right: g.shape(),
        }
        .into());
    }
    for ((wi, &gi), mi) in w.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m.as_mut_slice()) {
        let c = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
        *wi -= lr * (sign(c) + cfg.weight_decay * *wi);
        *mi = cfg.beta2 * *mi + (1.0 - cfg.beta2) * gi;
    }
    Ok(())
}

pub fn lion_step(
    w: &Matrix,
    g: &Matrix,
    m: &mut Matrix,
    lr: f64,
    cfg: &LionConfig,
) -> Result<Matrix, OptimError> {
    let mut w = w.clone();
    lion_update(&mut w, g, m, lr, cfg)?;
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct Lion {
    pub config: LionConfig,
    momentum: Vec<Matrix>,
    step: u64,
}

impl Lion {
    pub fn new(config: LionConfig) -> Self {
        Self {
            config,
            momentum: Vec::new(),
            step: 0,
        }
    }
}

impl Optimizer for Lion {
    fn name(&self) -> String {
        "lion".into()
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError> {
        check_grads(params, grads)?;
        init_or_check(&mut self.momentum, params, |w| Matrix::zeros(w.rows(), w.cols()))?;
        self.step += 1;
        for ((w, g), m) in params.iter_mut().zip(grads).zip(&mut self.momentum) {
            lion_update(w, g, m, lr, &self.config)?;
        }
        Ok(StepInfo::unclipped(grads))
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }
}
