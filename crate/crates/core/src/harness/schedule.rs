//! Linear warmup to the peak LR, then cosine decay to a floor.

use crate::config::ScheduleConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub lr_peak: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub min_lr_ratio: f64,
}

impl Schedule {
    pub fn new(cfg: &ScheduleConfig, total_steps: u64) -> Self {
        Self {
            lr_peak: cfg.lr_peak,
            warmup_steps: cfg.warmup_steps.min(total_steps),
            total_steps,
            min_lr_ratio: cfg.min_lr_ratio,
        }
    }

    /// LR at `step` (1-based training step; 0 is the value before training).
    /// Rises linearly from 0 to `lr_peak` at `warmup_steps`, then follows a
    /// half cosine down to `min_lr_ratio * lr_peak` at `total_steps`.
    pub fn lr_at(&self, step: u64) -> f64 {
        let step = step.min(self.total_steps);
        if step < self.warmup_steps {
            return self.lr_peak * step as f64 / self.warmup_steps as f64;
        }
        let span = self.total_steps - self.warmup_steps;
        if span == 0 {
            return self.lr_peak;
        }
        let progress = (step - self.warmup_steps) as f64 / span as f64;
        let floor = self.min_lr_ratio * self.lr_peak;
        floor + (self.lr_peak - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> Schedule {
        Schedule {
            lr_peak: 1e-3,
            warmup_steps: 10,
            total_steps: 110,
            min_lr_ratio: 0.1,
        }
    }

    #[test]
    fn endpoints() {
        let s = sched();
        assert_eq!(s.lr_at(0), 0.0);
        assert_eq!(s.lr_at(5), 5e-4);
        assert_eq!(s.lr_at(10), 1e-3);
        assert!((s.lr_at(110) - 1e-4).abs() < 1e-18);
        assert!((s.lr_at(60) - 5.5e-4).abs() < 1e-15);
    }

    #[test]
    fn decays_monotonically_after_warmup() {
        let s = sched();
        for t in 10..110 {
            assert!(s.lr_at(t + 1) <= s.lr_at(t));
        }
    }

    #[test]
    fn no_warmup_starts_at_peak() {
        let s = Schedule { warmup_steps: 0, ..sched() };
        assert_eq!(s.lr_at(0), 1e-3);
        assert!(s.lr_at(1) <= 1e-3);
    }
}
