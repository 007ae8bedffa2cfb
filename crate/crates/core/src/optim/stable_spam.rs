//! Stable-SPAM: adaptive spike-aware clipping, then adaptive gradient-norm
//! scaling, then Adam with periodic momentum reset.

use crate::error::OptimError;
use crate::optim::adam::{adam_update, moret_reset, AdamHyper, AdamMoments};
use crate::optim::transforms::{adaclip_counted, adagn, ensure_finite, AdaClipState, AdaGnState};
use crate::optim::{check_grads, init_or_check, Optimizer, StepInfo};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSpamConfig {
    pub adam: AdamHyper,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub reset_interval: u64,
}

impl StableSpamConfig {
    /// Defaults tuned for 4-bit training.
    pub fn low_precision() -> Self {
        Self {
            adam: AdamHyper::default(),
            gamma1: 0.7,
            gamma2: 0.9,
            gamma3: 0.999,
            reset_interval: 1000,
        }
    }

    /// Defaults for full-precision training.
    pub fn full_precision() -> Self {
        Self {
            gamma1: 0.85,
            gamma2: 0.99999,
            ..Self::low_precision()
        }
    }
}

impl Default for StableSpamConfig {
    fn default() -> Self {
        Self::low_precision()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StableSpamState {
    pub clip: AdaClipState,
    pub norm: AdaGnState,
    pub moments: AdamMoments,
}

impl StableSpamState {
    pub fn zeros_like(w: &Matrix) -> Self {
        Self {
            clip: AdaClipState::default(),
            norm: AdaGnState::default(),
            moments: AdamMoments::zeros_like(w),
        }
    }
}

/// What one tensor's step did, for telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorStepReport {
    pub clipped: usize,
    pub reset: bool,
    /// Squared norm of the gradient fed into the moment update.
    pub post_sq_norm: f64,
}

/// One Stable-SPAM step for a single tensor, updating `w` in place.
pub fn stable_spam_update(
    w: &mut Matrix,
    g: &Matrix,
    state: &mut StableSpamState,
    cfg: &StableSpamConfig,
    lr: f64,
    global_step: u64,
) -> Result<TensorStepReport, OptimError> {
    ensure_finite(g, 0)?;
    let (clipped_g, clipped) = adaclip_counted(g, &mut state.clip, cfg.gamma3)?;
    let g_hat = adagn(&clipped_g, &mut state.norm, cfg.gamma1, cfg.gamma2, cfg.adam.eps)?;
    let reset = moret_reset(&mut state.moments, global_step, Some(cfg.reset_interval));
    adam_update(w, &g_hat, &mut state.moments, lr, &cfg.adam)?;
    Ok(TensorStepReport {
        clipped,
        reset,
        post_sq_norm: g_hat.sum_squares(),
    })
}

/// Value-returning form of [`stable_spam_update`].
pub fn stable_spam_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut StableSpamState,
    cfg: &StableSpamConfig,
    lr: f64,
    global_step: u64,
) -> Result<Matrix, OptimError> {
    let mut w = w.clone();
    stable_spam_update(&mut w, g, state, cfg, lr, global_step)?;
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct StableSpam {
    pub config: StableSpamConfig,
    states: Vec<StableSpamState>,
    step: u64,
}

impl StableSpam {
    pub fn new(config: StableSpamConfig) -> Self {
        Self {
            config,
            states: Vec::new(),
            step: 0,
        }
    }

    pub fn states(&self) -> &[StableSpamState] {
        &self.states
    }
}

impl Optimizer for StableSpam {
    fn name(&self) -> String {
        "stable_spam".into()
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError> {
        check_grads(params, grads)?;
        init_or_check(&mut self.states, params, StableSpamState::zeros_like)?;
        self.step += 1;
        let mut clipped = 0;
        let mut reset = false;
        let mut post_sq = 0.0;
        for ((w, g), st) in params.iter_mut().zip(grads).zip(&mut self.states) {
            let r = stable_spam_update(w, g, st, &self.config, lr, self.step)?;
            clipped += r.clipped;
            reset |= r.reset;
            post_sq += r.post_sq_norm;
        }
        Ok(StepInfo {
            clipped_fraction: StepInfo::fraction(clipped, grads),
            reset,
            lr_multiplier: 1.0,
            post_grad_norm: post_sq.sqrt(),
        })
    }

    fn second_moment(&self, tensor: usize) -> Option<&Matrix> {
        self.states.get(tensor).map(|s| &s.moments.v)
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
    fn first_scalar_step_moves_by_about_lr() {
        let cfg = StableSpamConfig::default();
        let mut st = StableSpamState::zeros_like(&Matrix::scalar(0.0));
        let w = stable_spam_step(&Matrix::scalar(0.0), &Matrix::scalar(2.0), &mut st, &cfg, 0.01, 1).unwrap();
        let g_hat = 2.0 / 2.0 * (2.0 / (2.0 + 1e-6));
        let want = -0.01 * g_hat / (g_hat + 1e-6);
        assert!((w[(0, 0)] - want).abs() < 1e-15);
        assert!((w[(0, 0)] + 0.01).abs() < 1e-7);
    }

    #[test]
    fn reset_zeroes_moments_at_interval() {
        let cfg = StableSpamConfig {
            reset_interval: 5,
            ..StableSpamConfig::default()
        };
        let mut opt = StableSpam::new(cfg);
        let mut params = vec![Matrix::from_rows(&[[0.0, 1.0]])];
        for t in 1..=12u64 {
            let info = opt.step(&mut params, &[Matrix::from_rows(&[[0.3, -0.2]])], 1e-3).unwrap();
            assert_eq!(info.reset, t % 5 == 0, "step {t}");
            let cycle = opt.states()[0].moments.step_in_cycle;
            let want = if t < 5 { t } else { t % 5 + 1 };
            assert_eq!(cycle, want);
        }
    }
}
