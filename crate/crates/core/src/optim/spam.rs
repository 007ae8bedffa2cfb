//! SPAM baseline: elementwise spike clipping against Adam's second moment,
//! periodic momentum reset, and a linear learning-rate ramp after each reset.

use crate::error::OptimError;
use crate::optim::adam::{adam_update, AdamHyper, AdamMoments};
use crate::optim::transforms::spike_clip_counted;
use crate::optim::{check_grads, init_or_check, Optimizer, StepInfo};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpamConfig {
    pub adam: AdamHyper,
    /// `None` disables resets.
    pub reset_interval: Option<u64>,
    pub warmup_steps: u64,
    /// Spike threshold θ on `g² / v`.
    pub threshold: f64,
}

impl Default for SpamConfig {
    fn default() -> Self {
        Self {
            adam: AdamHyper::default(),
            reset_interval: Some(500),
            warmup_steps: 150,
            threshold: 5000.0,
        }
    }
}

impl SpamConfig {
    /// LR multiplier `k / warmup` where `k` counts steps since the last
    /// reset, saturating at 1. Before the first reset the multiplier is 1.
    pub fn warmup_multiplier(&self, global_step: u64) -> f64 {
        let Some(dt) = self.reset_interval.filter(|&d| d > 0) else {
            return 1.0;
        };
        if global_step <= dt || self.warmup_steps == 0 {
            return 1.0;
        }
        let since_reset = (global_step - 1) % dt + 1;
        (since_reset.min(self.warmup_steps)) as f64 / self.warmup_steps as f64
    }

    fn resets_after(&self, global_step: u64) -> bool {
        matches!(self.reset_interval, Some(dt) if dt > 0 && global_step.is_multiple_of(dt))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpamTensorReport {
    pub clipped: usize,
    pub reset: bool,
    pub post_sq_norm: f64,
}

/// One SPAM step for a single tensor: spike clip, moment update and
/// parameter step at `lr * warmup`, then zero the moments if this step closes
/// a reset interval.
pub fn spam_update(
    w: &mut Matrix,
    g: &Matrix,
    moments: &mut AdamMoments,
    cfg: &SpamConfig,
    lr: f64,
    global_step: u64,
) -> Result<SpamTensorReport, OptimError> {
    crate::optim::transforms::ensure_finite(g, 0)?;
    let (g_clipped, clipped) = spike_clip_counted(g, &moments.v, cfg.threshold)?;
    let lr = lr * cfg.warmup_multiplier(global_step);
    adam_update(w, &g_clipped, moments, lr, &cfg.adam)?;
    let reset = cfg.resets_after(global_step);
    if reset {
        moments.reset();
    }
    Ok(SpamTensorReport {
        clipped,
        reset,
        post_sq_norm: g_clipped.sum_squares(),
    })
}

pub fn spam_step(
    w: &Matrix,
    g: &Matrix,
    moments: &mut AdamMoments,
    cfg: &SpamConfig,
    lr: f64,
    global_step: u64,
) -> Result<Matrix, OptimError> {
    let mut w = w.clone();
    spam_update(&mut w, g, moments, cfg, lr, global_step)?;
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct Spam {
    pub config: SpamConfig,
    moments: Vec<AdamMoments>,
    step: u64,
}

impl Spam {
    pub fn new(config: SpamConfig) -> Self {
        Self {
            config,
            moments: Vec::new(),
            step: 0,
        }
    }
}

impl Optimizer for Spam {
    fn name(&self) -> String {
        "spam".into()
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError> {
        check_grads(params, grads)?;
        init_or_check(&mut self.moments, params, AdamMoments::zeros_like)?;
        self.step += 1;
        let mut clipped = 0;
        let mut reset = false;
        let mut post_sq = 0.0;
        for ((w, g), mom) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            let r = spam_update(w, g, mom, &self.config, lr, self.step)?;
            clipped += r.clipped;
            reset |= r.reset;
            post_sq += r.post_sq_norm;
        }
        Ok(StepInfo {
            clipped_fraction: StepInfo::fraction(clipped, grads),
            reset,
            lr_multiplier: self.config.warmup_multiplier(self.step),
            post_grad_norm: post_sq.sqrt(),
        })
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
    use crate::optim::adam::Adam;
    use crate::tensor::Rng;

    #[test]
    fn warmup_ramp_after_reset() {
        let cfg = SpamConfig::default();
        assert_eq!(cfg.warmup_multiplier(1), 1.0);
        assert_eq!(cfg.warmup_multiplier(500), 1.0);
        assert_eq!(cfg.warmup_multiplier(501), 1.0 / 150.0);
        assert_eq!(cfg.warmup_multiplier(575), 75.0 / 150.0);
        assert_eq!(cfg.warmup_multiplier(650), 1.0);
        assert_eq!(cfg.warmup_multiplier(999), 1.0);
        assert_eq!(cfg.warmup_multiplier(1001), 1.0 / 150.0);
    }

    #[test]
    fn disabled_components_reduce_to_adam() {
        let cfg = SpamConfig {
            reset_interval: None,
            threshold: f64::INFINITY,
            ..SpamConfig::default()
        };
        let mut spam = Spam::new(cfg);
        let mut adam = Adam::new(cfg.adam);
        let mut rng = Rng::new(8);
        let mut a = vec![Matrix::randn(3, 2, 1.0, &mut rng)];
        let mut b = a.clone();
        for _ in 0..100 {
            let g = vec![Matrix::randn(3, 2, 5.0, &mut rng)];
            spam.step(&mut a, &g, 1e-2).unwrap();
            adam.step(&mut b, &g, 1e-2).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn moments_are_zero_after_interval() {
        let cfg = SpamConfig {
            reset_interval: Some(3),
            warmup_steps: 2,
            ..SpamConfig::default()
        };
        let mut spam = Spam::new(cfg);
        let mut p = vec![Matrix::scalar(1.0)];
        for t in 1..=7u64 {
            let info = spam.step(&mut p, &[Matrix::scalar(0.5)], 0.1).unwrap();
            assert_eq!(info.reset, t % 3 == 0);
            if t % 3 == 0 {
                assert_eq!(spam.second_moment(0).unwrap()[(0, 0)], 0.0);
            }
        }
    }
}
