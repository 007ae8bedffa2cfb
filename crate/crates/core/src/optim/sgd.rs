use crate::error::OptimError;
use crate::optim::{check_grads, Optimizer, StepInfo};
use crate::tensor::Matrix;

/// Plain gradient descent, `w -= lr * g`.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    step: u64,
}

impl Sgd {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Optimizer for Sgd {
    fn name(&self) -> String {
        "sgd".into()
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError> {
        check_grads(params, grads)?;
        self.step += 1;
        for (w, g) in params.iter_mut().zip(grads) {
            w.axpy(-lr, g)?;
        }
        Ok(StepInfo::unclipped(grads))
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }
}
