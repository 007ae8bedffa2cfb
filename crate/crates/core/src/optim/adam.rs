use crate::error::OptimError;
use crate::optim::{check_grads, init_or_check, Optimizer, StepInfo};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-6,
        }
    }
}

/// First and second moments for one parameter tensor.
///
/// `step_in_cycle` drives bias correction and restarts from zero whenever the
/// moments are reset.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m: Matrix,
    pub v: Matrix,
    pub step_in_cycle: u64,
}

impl AdamMoments {
    pub fn zeros_like(w: &Matrix) -> Self {
        Self {
            m: Matrix::zeros(w.rows(), w.cols()),
            v: Matrix::zeros(w.rows(), w.cols()),
            step_in_cycle: 0,
        }
    }

    pub fn reset(&mut self) {
        self.m.fill(0.0);
        self.v.fill(0.0);
        self.step_in_cycle = 0;
    }
}

/// Zeroes the moments when `global_step` is a multiple of `interval`.
/// Returns whether a reset happened.
pub fn moret_reset(moments: &mut AdamMoments, global_step: u64, interval: Option<u64>) -> bool {
    match interval {
        Some(dt) if dt > 0 && global_step.is_multiple_of(dt) => {
            moments.reset();
            true
        }
        _ => false,
    }
}

/// One bias-corrected Adam update of `w` in place.
pub fn adam_update(
    w: &mut Matrix,
    g: &Matrix,
    moments: &mut AdamMoments,
    lr: f64,
    hp: &AdamHyper,
) -> Result<(), OptimError> {
    if !w.same_shape(g) || !w.same_shape(&moments.m) {
        return Err(crate::error::TensorError::ShapeMismatch {
            op: "adam_update",
            left: w.shape(),
            right: g.shape(),
        }
        .into());
    }
    moments.step_in_cycle += 1;
    let t = moments.step_in_cycle as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    let m = moments.m.as_mut_slice();
    let v = moments.v.as_mut_slice();
    for (((wi, &gi), mi), vi) in w.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
        *mi = hp.beta1 * *mi + (1.0 - hp.beta1) * gi;
        *vi = hp.beta2 * *vi + (1.0 - hp.beta2) * gi * gi;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *wi -= lr * m_hat / (v_hat.sqrt() + hp.eps);
    }
    Ok(())
}

/// `adam_update` returning the new parameter instead of mutating it.
pub fn adam_step(
    w: &Matrix,
    g: &Matrix,
    moments: &mut AdamMoments,
    lr: f64,
    hp: &AdamHyper,
) -> Result<Matrix, OptimError> {
    let mut w = w.clone();
    adam_update(&mut w, g, moments, lr, hp)?;
    Ok(w)
}

/// Adam, optionally with periodic momentum reset applied before the moment
/// update of every step divisible by the reset interval.
#[derive(Debug, Clone)]
pub struct Adam {
    pub hyper: AdamHyper,
    pub reset_interval: Option<u64>,
    moments: Vec<AdamMoments>,
    step: u64,
}

impl Adam {
    pub fn new(hyper: AdamHyper) -> Self {
        Self {
            hyper,
            reset_interval: None,
            moments: Vec::new(),
            step: 0,
        }
    }

    pub fn with_reset(hyper: AdamHyper, interval: u64) -> Self {
        Self {
            reset_interval: Some(interval),
            ..Self::new(hyper)
        }
    }

    pub fn moments(&self) -> &[AdamMoments] {
        &self.moments
    }
}

impl Optimizer for Adam {
    fn name(&self) -> String {
        match self.reset_interval {
            Some(dt) => format!("adam+moret({dt})"),
            None => "adam".into(),
        }
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError> {
        check_grads(params, grads)?;
        init_or_check(&mut self.moments, params, AdamMoments::zeros_like)?;
        self.step += 1;
        let mut reset = false;
        for ((w, g), mom) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            reset |= moret_reset(mom, self.step, self.reset_interval);
            adam_update(w, g, mom, lr, &self.hyper)?;
        }
        Ok(StepInfo::unclipped(grads).with_reset(reset))
    }

    fn second_moment(&self, tensor: usize) -> Option<&Matrix> {
        self.moments.get(tensor).map(|m| &m.v)
    }

    fn has_second_moment(&self) -> bool {
        true
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut w = Matrix::scalar(0.0);
        let mut mom = AdamMoments::zeros_like(&w);
        let hp = AdamHyper::default();
        adam_update(&mut w, &Matrix::scalar(3.0), &mut mom, 0.01, &hp).unwrap();
        assert!((w[(0, 0)] + 0.01 * 3.0 / (3.0 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_update_tends_to_lr() {
        let mut w = Matrix::scalar(0.0);
        let mut mom = AdamMoments::zeros_like(&w);
        let hp = AdamHyper::default();
        let mut prev = 0.0;
        let mut delta = 0.0;
        for _ in 0..100 {
            adam_update(&mut w, &Matrix::scalar(0.5), &mut mom, 1e-2, &hp).unwrap();
            delta = prev - w[(0, 0)];
            prev = w[(0, 0)];
        }
        assert!((delta - 1e-2).abs() < 1e-6, "{delta}");
    }

    #[test]
    fn bias_correction_recovers_constant() {
        let c = -1.7;
        let mut w = Matrix::scalar(0.0);
        let mut mom = AdamMoments::zeros_like(&w);
        let hp = AdamHyper::default();
        for t in 1..=40 {
            adam_update(&mut w, &Matrix::scalar(c), &mut mom, 1e-3, &hp).unwrap();
            let m_hat = mom.m[(0, 0)] / (1.0 - hp.beta1.powi(t));
            let v_hat = mom.v[(0, 0)] / (1.0 - hp.beta2.powi(t));
            assert!((m_hat - c).abs() < 1e-12);
            assert!((v_hat - c * c).abs() < 1e-12);
        }
    }

    #[test]
    fn moret_fires_only_on_multiples() {
        let w = Matrix::scalar(0.0);
        let mut mom = AdamMoments::zeros_like(&w);
        mom.m.fill(1.0);
        mom.v.fill(1.0);
        mom.step_in_cycle = 5;
        assert!(!moret_reset(&mut mom, 999, Some(1000)));
        assert_eq!(mom.m[(0, 0)], 1.0);
        assert!(moret_reset(&mut mom, 1000, Some(1000)));
        assert_eq!(mom.m[(0, 0)], 0.0);
        assert_eq!(mom.v[(0, 0)], 0.0);
        assert_eq!(mom.step_in_cycle, 0);
        assert!(!moret_reset(&mut mom, 1000, None));
    }

    #[test]
    fn reset_every_step_gives_normalized_direction() {
        let hp = AdamHyper::default();
        let mut opt = Adam::with_reset(hp, 1);
        let mut params = vec![Matrix::scalar(0.0)];
        for g in [2.0, -0.3, 5.0, 1e-3] {
            let before = params[0][(0, 0)];
            opt.step(&mut params, &[Matrix::scalar(g)], 0.1).unwrap();
            let delta = params[0][(0, 0)] - before;
            let want = -0.1 * g / (g.abs() + hp.eps);
            assert!((delta - want).abs() < 1e-15, "{delta} vs {want}");
        }
    }
}
