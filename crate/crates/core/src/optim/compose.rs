//! Stacking gradient transforms in front of any base optimizer.

use std::fmt;
use std::str::FromStr;

use crate::error::OptimError;
use crate::optim::transforms::{adaclip_counted, adagn, global_norm, grad_clip_global, spike_clip_counted, AdaClipState, AdaGnState};
use crate::optim::{check_grads, init_or_check, Optimizer, StepInfo};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    AdaClip,
    AdaGn,
    SpikeClip,
    GradClip,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::AdaClip => "adaclip",
            TransformKind::AdaGn => "adagn",
            TransformKind::SpikeClip => "spikeclip",
            TransformKind::GradClip => "gradclip",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaclip" => Ok(TransformKind::AdaClip),
            "adagn" => Ok(TransformKind::AdaGn),
            "spikeclip" => Ok(TransformKind::SpikeClip),
            "gradclip" => Ok(TransformKind::GradClip),
            other => Err(format!(
                "unknown transform `{other}` (expected adaclip|adagn|spikeclip|gradclip)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub eps: f64,
    pub spike_threshold: f64,
    pub clip_threshold: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            gamma1: 0.7,
            gamma2: 0.9,
            gamma3: 0.999,
            eps: 1e-6,
            spike_threshold: 5000.0,
            clip_threshold: 1.0,
        }
    }
}

/// A base optimizer behind an ordered list of gradient transforms.
pub struct Composed {
    transforms: Vec<TransformKind>,
    params: TransformParams,
    base: Box<dyn Optimizer>,
    clip: Vec<AdaClipState>,
    norm: Vec<AdaGnState>,
    step: u64,
}

impl fmt::Debug for Composed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Composed")
            .field("name", &self.name())
            .field("params", &self.params)
            .finish()
    }
}

/// Builds `base` preceded by `transforms`, applied in list order.
/// Listing the same transform twice is a configuration error.
pub fn compose(
    transforms: Vec<TransformKind>,
    params: TransformParams,
    base: Box<dyn Optimizer>,
) -> Result<Composed, OptimError> {
    for (i, t) in transforms.iter().enumerate() {
        if transforms[..i].contains(t) {
            return Err(OptimError::Config(format!("transform `{t}` listed more than once")));
        }
    }
    if transforms.contains(&TransformKind::SpikeClip) && !base.has_second_moment() {
        return Err(OptimError::Config(format!(
            "spikeclip needs a second moment, which `{}` does not keep",
            base.name()
        )));
    }
    Ok(Composed {
        transforms,
        params,
        base,
        clip: Vec::new(),
        norm: Vec::new(),
        step: 0,
    })
}

impl Composed {
    pub fn base(&self) -> &dyn Optimizer {
        self.base.as_ref()
    }

    pub fn transforms(&self) -> &[TransformKind] {
        &self.transforms
    }
}

impl Optimizer for Composed {
    fn name(&self) -> String {
        let mut s = self.base.name();
        for t in &self.transforms {
            s.push('+');
            s.push_str(t.as_str());
        }
        s
    }

    fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<StepInfo, OptimError> {
        check_grads(params, grads)?;
        init_or_check(&mut self.clip, params, |_| AdaClipState::default())?;
        init_or_check(&mut self.norm, params, |_| AdaGnState::default())?;
        self.step += 1;
        let p = self.params;
        let mut g: Vec<Matrix> = grads.to_vec();
        let mut clipped = 0usize;
        for kind in &self.transforms {
            match kind {
                TransformKind::AdaClip => {
                    for (gi, st) in g.iter_mut().zip(&mut self.clip) {
                        let (out, n) = adaclip_counted(gi, st, p.gamma3)?;
                        *gi = out;
                        clipped += n;
                    }
                }
                TransformKind::AdaGn => {
                    for (gi, st) in g.iter_mut().zip(&mut self.norm) {
                        *gi = adagn(gi, st, p.gamma1, p.gamma2, p.eps)?;
                    }
                }
                TransformKind::SpikeClip => {
                    for (i, gi) in g.iter_mut().enumerate() {
                        // before the base's first step there is no second moment
                        if let Some(v) = self.base.second_moment(i) {
                            let (out, n) = spike_clip_counted(gi, v, p.spike_threshold)?;
                            *gi = out;
                            clipped += n;
                        }
                    }
                }
                TransformKind::GradClip => {
                    if global_norm(&g) > p.clip_threshold {
                        clipped += g.iter().map(Matrix::len).sum::<usize>();
                    }
                    g = grad_clip_global(&g, p.clip_threshold);
                }
            }
        }
        let base_info = self.base.step(params, &g, lr)?;
        let total: usize = grads.iter().map(Matrix::len).sum();
        let base_clipped = (base_info.clipped_fraction * total as f64).round() as usize;
        Ok(StepInfo {
            clipped_fraction: StepInfo::fraction((clipped + base_clipped).min(total), grads),
            reset: base_info.reset,
            lr_multiplier: base_info.lr_multiplier,
            post_grad_norm: if self.transforms.is_empty() {
                base_info.post_grad_norm
            } else {
                global_norm(&g)
            },
        })
    }

    fn second_moment(&self, tensor: usize) -> Option<&Matrix> {
        self.base.second_moment(tensor)
    }

    fn has_second_moment(&self) -> bool {
        self.base.has_second_moment()
    }

    fn steps_taken(&self) -> u64 {
        self.step
    }
}
