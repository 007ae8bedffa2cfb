//! Optimizer step rules.
//!
//! Each rule exists twice: as a per-tensor kernel (`*_update` / `*_step`)
//! operating on one parameter matrix and its state, and as a stateful
//! [`Optimizer`] that owns per-tensor state for a whole model.

pub mod adafactor;
pub mod adam;
pub mod adam_mini;
pub mod compose;
pub mod lion;
pub mod sgd;
pub mod spam;
pub mod stable_spam;
pub mod transforms;

use std::fmt;
use std::str::FromStr;

use crate::error::OptimError;
use crate::tensor::Matrix;

pub use adafactor::{Adafactor, AdafactorConfig};
pub use adam::{Adam, AdamHyper, AdamMoments};
pub use adam_mini::AdamMini;
pub use compose::{compose, Composed, TransformKind, TransformParams};
pub use lion::{Lion, LionConfig};
pub use sgd::Sgd;
pub use spam::{Spam, SpamConfig};
pub use stable_spam::{StableSpam, StableSpamConfig};
pub use transforms::{adaclip, adagn, global_norm, grad_clip_global, spike_clip, AdaClipState, AdaGnState};

/// Telemetry returned by one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Fraction of gradient entries altered by a clipping rule.
    pub clipped_fraction: f64,
    /// Whether moments were reset during this step.
    pub reset: bool,
    /// Factor the optimizer applied on top of the scheduled LR.
    pub lr_multiplier: f64,
    /// Global norm of the gradient the moment update consumed.
    pub post_grad_norm: f64,
}

impl StepInfo {
    pub fn unclipped(grads: &[Matrix]) -> Self {
        Self {
            clipped_fraction: 0.0,
            reset: false,
            lr_multiplier: 1.0,
            post_grad_norm: global_norm(grads),
        }
    }

    pub fn with_reset(mut self, reset: bool) -> Self {
        self.reset = reset;
        self
    }

    pub(crate) fn fraction(clipped: usize, grads: &[Matrix]) -> f64 {
        let total: usize = grads.iter().map(Matrix::len).sum();
        if total == 0 {
            0.0
        } else {
            clipped as f64 / total as f64
        }
    }
}

/// A stateful update rule over a list of parameter tensors.
///
/// State is created lazily on the first step from the parameter shapes;
/// later steps must pass the same number of tensors with the same shapes.
pub trait Optimizer: Send {
    fn name(&self) -> String;

    /// Applies one update at learning rate `lr`. Non-finite gradients are
    /// rejected with [`OptimError::NonFinite`] before any state changes.
    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError>;

    /// Elementwise second moment for `tensor`, if this rule keeps one.
    fn second_moment(&self, _tensor: usize) -> Option<&Matrix> {
        None
    }

    fn has_second_moment(&self) -> bool {
        false
    }

    fn steps_taken(&self) -> u64;
}

pub(crate) fn check_grads(params: &[Matrix], grads: &[Matrix]) -> Result<(), OptimError> {
    if params.len() != grads.len() {
        return Err(OptimError::TensorCount {
            expected: params.len(),
            got: grads.len(),
        });
    }
    for (i, (w, g)) in params.iter().zip(grads).enumerate() {
        if !w.same_shape(g) {
            return Err(crate::error::TensorError::ShapeMismatch {
                op: "optimizer step",
                left: w.shape(),
                right: g.shape(),
            }
            .into());
        }
        if let Some((row, col)) = g.first_non_finite() {
            return Err(OptimError::NonFinite { tensor: i, row, col });
        }
    }
    Ok(())
}

pub(crate) fn init_or_check<S>(
    states: &mut Vec<S>,
    params: &[Matrix],
    init: impl Fn(&Matrix) -> S,
) -> Result<(), OptimError> {
    if states.is_empty() {
        states.extend(params.iter().map(init));
        Ok(())
    } else if states.len() != params.len() {
        Err(OptimError::TensorCount {
            expected: states.len(),
            got: params.len(),
        })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerName {
    Adam,
    AdamGradClip,
    Adafactor,
    Spam,
    StableSpam,
    Lion,
    AdamMini,
    Sgd,
}

impl OptimizerName {
    pub const ALL: [OptimizerName; 8] = [
        OptimizerName::Adam,
        OptimizerName::AdamGradClip,
        OptimizerName::Adafactor,
        OptimizerName::Spam,
        OptimizerName::StableSpam,
        OptimizerName::Lion,
        OptimizerName::AdamMini,
        OptimizerName::Sgd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerName::Adam => "adam",
            OptimizerName::AdamGradClip => "adam_gradclip",
            OptimizerName::Adafactor => "adafactor",
            OptimizerName::Spam => "spam",
            OptimizerName::StableSpam => "stable_spam",
            OptimizerName::Lion => "lion",
            OptimizerName::AdamMini => "adam_mini",
            OptimizerName::Sgd => "sgd",
        }
    }
}

impl fmt::Display for OptimizerName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|n| n.as_str()).collect();
                format!("unknown optimizer `{s}` (expected {})", names.join("|"))
            })
    }
}

/// Full description of an optimizer as read from a run config.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub name: OptimizerName,
    pub adam: AdamHyper,
    pub stable_spam: StableSpamConfig,
    pub spam: SpamConfig,
    pub adafactor: AdafactorConfig,
    pub lion: LionConfig,
    /// Momentum reset interval for the plain Adam base.
    pub moret_interval: Option<u64>,
    pub grad_clip_threshold: f64,
    pub transforms: Vec<TransformKind>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            name: OptimizerName::Adam,
            adam: AdamHyper::default(),
            stable_spam: StableSpamConfig::default(),
            spam: SpamConfig::default(),
            adafactor: AdafactorConfig::default(),
            lion: LionConfig::default(),
            moret_interval: None,
            grad_clip_threshold: 1.0,
            transforms: Vec::new(),
        }
    }
}

impl OptimizerConfig {
    pub fn named(name: OptimizerName) -> Self {
        Self {
            name,
            ..Self::default()
        }
    }

    /// Transform list actually applied, with the implicit global clip of
    /// `adam_gradclip` placed first.
    pub fn effective_transforms(&self) -> Vec<TransformKind> {
        let mut t = self.transforms.clone();
        if self.name == OptimizerName::AdamGradClip && !t.contains(&TransformKind::GradClip) {
            t.insert(0, TransformKind::GradClip);
        }
        t
    }

    pub fn transform_params(&self) -> TransformParams {
        TransformParams {
            gamma1: self.stable_spam.gamma1,
            gamma2: self.stable_spam.gamma2,
            gamma3: self.stable_spam.gamma3,
            eps: self.adam.eps,
            spike_threshold: self.spam.threshold,
            clip_threshold: self.grad_clip_threshold,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Optimizer>, OptimError> {
        let base: Box<dyn Optimizer> = match self.name {
            OptimizerName::Adam | OptimizerName::AdamGradClip => {
                let mut adam = Adam::new(self.adam);
                adam.reset_interval = self.moret_interval;
                Box::new(adam)
            }
            OptimizerName::StableSpam => Box::new(StableSpam::new(StableSpamConfig {
                adam: self.adam,
                ..self.stable_spam
            })),
            OptimizerName::Spam => Box::new(Spam::new(SpamConfig {
                adam: self.adam,
                ..self.spam
            })),
            OptimizerName::Adafactor => Box::new(Adafactor::new(self.adafactor)),
            OptimizerName::Lion => Box::new(Lion::new(self.lion)),
            OptimizerName::AdamMini => Box::new(AdamMini::new(self.adam)),
            OptimizerName::Sgd => Box::new(Sgd::new()),
        };
        let transforms = self.effective_transforms();
        if transforms.is_empty() {
            Ok(base)
        } else {
            Ok(Box::new(compose(transforms, self.transform_params(), base)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_round_trips_and_builds() {
        for name in OptimizerName::ALL {
            assert_eq!(name.as_str().parse::<OptimizerName>().unwrap(), name);
            let mut opt = OptimizerConfig::named(name).build().unwrap();
            let mut p = vec![Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]])];
            let g = vec![Matrix::from_rows(&[[0.1, -0.2], [0.3, 0.0]])];
            opt.step(&mut p, &g, 1e-2).unwrap();
            assert!(p[0].is_finite());
            assert_eq!(opt.steps_taken(), 1);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_before_mutation() {
        let mut opt = OptimizerConfig::named(OptimizerName::StableSpam).build().unwrap();
        let mut p = vec![Matrix::scalar(1.0), Matrix::scalar(2.0)];
        let g = vec![Matrix::scalar(0.5), Matrix::scalar(f64::INFINITY)];
        let err = opt.step(&mut p, &g, 0.1).unwrap_err();
        assert_eq!(err, OptimError::NonFinite { tensor: 1, row: 0, col: 0 });
        assert_eq!(p[0][(0, 0)], 1.0);
    }

    #[test]
    fn gradclip_alias_prepends_clip() {
        let cfg = OptimizerConfig::named(OptimizerName::AdamGradClip);
        assert_eq!(cfg.effective_transforms(), vec![TransformKind::GradClip]);
        assert_eq!(cfg.build().unwrap().name(), "adam+gradclip");
    }
}
