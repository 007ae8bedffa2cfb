//! Row-wise RMSNorm and SwiGLU with analytic backward passes.
//!
//! Inputs are `batch x features`; each row is one sample.

use crate::error::TensorError;
use crate::tensor::Matrix;

pub const RMSNORM_EPS: f64 = 1e-8;

/// Saved forward state for [`RmsNormCache::backward`].
#[derive(Debug, Clone)]
pub struct RmsNormCache {
    x: Matrix,
    gain: Matrix,
    rms: Vec<f64>,
}

/// `y = x / sqrt(mean(x²) + ε) ⊙ gain`, per row. `gain` is `1 x features`.
pub fn rmsnorm_fwd(x: &Matrix, gain: &Matrix) -> Result<(Matrix, RmsNormCache), TensorError> {
    if gain.rows() != 1 || gain.cols() != x.cols() {
        return Err(TensorError::ShapeMismatch {
            op: "rmsnorm",
            left: x.shape(),
            right: gain.shape(),
        });
    }
    if x.is_empty() {
        return Err(TensorError::Empty { op: "rmsnorm" });
    }
    let d = x.cols() as f64;
    let mut y = x.clone();
    let mut rms = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let ms = x.row(r).iter().fold(0.0, |a, &v| a + v * v) / d;
        let rr = (ms + RMSNORM_EPS).sqrt();
        rms.push(rr);
        for c in 0..x.cols() {
            y[(r, c)] = x[(r, c)] / rr * gain[(0, c)];
        }
    }
    Ok((
        y,
        RmsNormCache {
            x: x.clone(),
            gain: gain.clone(),
            rms,
        },
    ))
}

impl RmsNormCache {
    /// Returns `(dx, dgain)` for upstream gradient `dy`.
    pub fn backward(&self, dy: &Matrix) -> Result<(Matrix, Matrix), TensorError> {
        if !dy.same_shape(&self.x) {
            return Err(TensorError::ShapeMismatch {
                op: "rmsnorm backward",
                left: self.x.shape(),
                right: dy.shape(),
            });
        }
        let (n, d) = self.x.shape();
        let mut dx = Matrix::zeros(n, d);
        let mut dgain = Matrix::zeros(1, d);
        for r in 0..n {
            let rr = self.rms[r];
            // dot = Σ_j gain_j dy_j x_j
            let mut dot = 0.0;
            for c in 0..d {
                let x = self.x[(r, c)];
                let g = dy[(r, c)] * self.gain[(0, c)];
                dot += g * x;
                dgain[(0, c)] += dy[(r, c)] * x / rr;
            }
            let k = dot / (d as f64 * rr * rr * rr);
            for c in 0..d {
                dx[(r, c)] = dy[(r, c)] * self.gain[(0, c)] / rr - self.x[(r, c)] * k;
            }
        }
        Ok((dx, dgain))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

#[derive(Debug, Clone)]
pub struct SwiGluCache {
    x: Matrix,
    w_gate: Matrix,
    w_up: Matrix,
    z_gate: Matrix,
    z_up: Matrix,
}

/// Gradients of a SwiGLU block.
#[derive(Debug, Clone)]
pub struct SwiGluGrads {
    pub dx: Matrix,
    pub dw_gate: Matrix,
    pub dw_up: Matrix,
}

/// `y = silu(x W_gate) ⊙ (x W_up)`.
pub fn swiglu_fwd(x: &Matrix, w_gate: &Matrix, w_up: &Matrix) -> Result<(Matrix, SwiGluCache), TensorError> {
    let z_gate = x.matmul(w_gate)?;
    let z_up = x.matmul(w_up)?;
    let y = z_gate.zip_map(&z_up, |g, u| silu(g) * u)?;
    Ok((
        y,
        SwiGluCache {
            x: x.clone(),
            w_gate: w_gate.clone(),
            w_up: w_up.clone(),
            z_gate,
            z_up,
        },
    ))
}

impl SwiGluCache {
    pub fn backward(&self, dy: &Matrix) -> Result<SwiGluGrads, TensorError> {
        let dz_up = dy.zip_map(&self.z_gate, |d, g| d * silu(g))?;
        let dz_gate = dy
            .hadamard(&self.z_up)?
            .zip_map(&self.z_gate, |d, g| d * silu_grad(g))?;
        let xt = self.x.transpose();
        let dw_gate = xt.matmul(&dz_gate)?;
        let dw_up = xt.matmul(&dz_up)?;
        let dx = dz_gate
            .matmul(&self.w_gate.transpose())?
            .add(&dz_up.matmul(&self.w_up.transpose())?)?;
        Ok(SwiGluGrads { dx, dw_gate, dw_up })
    }
}
