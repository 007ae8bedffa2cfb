//! Gradient transforms applied ahead of a base optimizer step.

use crate::error::OptimError;
use crate::tensor::Matrix;

pub(crate) fn ensure_finite(g: &Matrix, tensor: usize) -> Result<(), OptimError> {
    match g.first_non_finite() {
        Some((row, col)) => Err(OptimError::NonFinite { tensor, row, col }),
        None => Ok(()),
    }
}

/// Running threshold for adaptive spike-aware clipping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AdaClipState {
    pub threshold: f64,
    pub step: u64,
}

impl AdaClipState {
    /// Bias-corrected threshold after the most recent update.
    pub fn corrected_threshold(&self, gamma3: f64) -> f64 {
        if self.step == 0 {
            0.0
        } else {
            self.threshold / (1.0 - gamma3.powi(self.step as i32))
        }
    }
}

/// Adaptive spike-aware clipping. Updates the EMA of the per-tensor max
/// magnitude, then shrinks every entry with `|g| > T̂` to `g / g_max * T̂`.
/// Returns the clipped gradient and the clipped-element count.
pub(crate) fn adaclip_counted(
    g: &Matrix,
    state: &mut AdaClipState,
    gamma3: f64,
) -> Result<(Matrix, usize), OptimError> {
    ensure_finite(g, 0)?;
    state.step += 1;
    let g_max = g.max_abs().unwrap_or(0.0);
    state.threshold = gamma3 * state.threshold + (1.0 - gamma3) * g_max;
    let t_hat = state.threshold / (1.0 - gamma3.powi(state.step as i32));
    let mut out = g.clone();
    let mut clipped = 0;
    for x in out.as_mut_slice() {
        if x.abs() > t_hat {
            *x = *x / g_max * t_hat;
            clipped += 1;
        }
    }
    Ok((out, clipped))
}

/// Adaptive spike-aware clipping; returns the clipped gradient and the
/// fraction of entries that were clipped.
pub fn adaclip(g: &Matrix, state: &mut AdaClipState, gamma3: f64) -> Result<(Matrix, f64), OptimError> {
    let (out, n) = adaclip_counted(g, state, gamma3)?;
    let frac = if g.is_empty() { 0.0 } else { n as f64 / g.len() as f64 };
    Ok((out, frac))
}

/// First and second moment EMAs of a tensor's gradient norm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AdaGnState {
    pub m_norm: f64,
    pub v_norm: f64,
    pub step: u64,
}

impl AdaGnState {
    /// `m̂ / (√v̂ + ε)` for the current state: the norm AdaGN assigns to the
    /// gradient of the latest step.
    pub fn adaptive_norm(&self, gamma1: f64, gamma2: f64, eps: f64) -> f64 {
        if self.step == 0 {
            return 0.0;
        }
        let t = self.step as i32;
        let m_hat = self.m_norm / (1.0 - gamma1.powi(t));
        let v_hat = self.v_norm / (1.0 - gamma2.powi(t));
        m_hat / (v_hat.sqrt() + eps)
    }
}

/// Adaptive gradient norm: rescales `g` to the bias-corrected ratio of its
/// running mean norm to the root of its running squared norm.
///
/// A zero gradient is returned unchanged; the EMAs still absorb a zero norm.
pub fn adagn(
    g: &Matrix,
    state: &mut AdaGnState,
    gamma1: f64,
    gamma2: f64,
    eps: f64,
) -> Result<Matrix, OptimError> {
    ensure_finite(g, 0)?;
    state.step += 1;
    let g_norm = g.frobenius_norm();
    state.m_norm = gamma1 * state.m_norm + (1.0 - gamma1) * g_norm;
    state.v_norm = gamma2 * state.v_norm + (1.0 - gamma2) * g_norm * g_norm;
    if g_norm == 0.0 {
        return Ok(g.clone());
    }
    let t = state.step as i32;
    let m_hat = state.m_norm / (1.0 - gamma1.powi(t));
    let v_hat = state.v_norm / (1.0 - gamma2.powi(t));
    let adaptive_norm = m_hat / (v_hat.sqrt() + eps);
    Ok(g.map(|x| x / g_norm * adaptive_norm))
}

/// SPAM's elementwise spike clip: where `g² / v > θ`, replace `g` by
/// `sign(g)·√(θ v)`. Entries with `v == 0` are left alone.
pub fn spike_clip(g: &Matrix, v: &Matrix, theta: f64) -> Result<Matrix, OptimError> {
    spike_clip_counted(g, v, theta).map(|(m, _)| m)
}

pub(crate) fn spike_clip_counted(g: &Matrix, v: &Matrix, theta: f64) -> Result<(Matrix, usize), OptimError> {
    if !g.same_shape(v) {
        return Err(crate::error::TensorError::ShapeMismatch {
            op: "spike_clip",
            left: g.shape(),
            right: v.shape(),
        }
        .into());
    }
    let mut out = g.clone();
    let mut clipped = 0;
    for (x, &vi) in out.as_mut_slice().iter_mut().zip(v.as_slice()) {
        if vi > 0.0 && *x * *x / vi > theta {
            *x = x.signum() * (theta * vi).sqrt();
            clipped += 1;
        }
    }
    Ok((out, clipped))
}

/// `sqrt(sum_i ||g_i||²)` over all tensors.
pub fn global_norm(layers: &[Matrix]) -> f64 {
    layers
        .iter()
        .fold(0.0, |acc, g| acc + g.sum_squares())
        .sqrt()
}

/// Global-norm clipping: when the global norm exceeds `threshold`, every
/// tensor is scaled by `threshold / norm`.
pub fn grad_clip_global(layers: &[Matrix], threshold: f64) -> Vec<Matrix> {
    let norm = global_norm(layers);
    if norm > threshold {
        let c = threshold / norm;
        layers.iter().map(|g| g.scale(c)).collect()
    } else {
        layers.to_vec()
    }
}
