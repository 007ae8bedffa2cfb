//! Classifier MLP: a linear input projection, pre-norm residual blocks
//! `h <- h + SwiGLU(RMSNorm(h))`, and a linear head, with fake-quantized
//! weights and activations in the forward pass.
//!
//! The residual stream is never normalized before the head, so anomalous
//! inputs reach the head (and its gradient) at full magnitude, as they do in
//! pre-norm transformers.
//!
//! Backward uses the straight-through estimator: every quantizer is treated
//! as the identity, so gradients land on the full-precision weights.

use crate::error::{HarnessError, TensorError};
use crate::models::layers::{rmsnorm_fwd, swiglu_fwd, RmsNormCache, SwiGluCache};
use crate::quant::{qdq, QuantSpec};
use crate::tensor::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub depth: usize,
    pub classes: usize,
}

/// Parameters are stored flat as
/// `[w_in, gain_0, w_gate_0, w_up_0, ..., w_out]` so optimizers see one
/// tensor per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub shape: MlpShape,
    pub params: Vec<Matrix>,
    pub quant: QuantSpec,
}

struct BlockCache {
    norm: RmsNormCache,
    swiglu: SwiGluCache,
}

struct Forward {
    logits: Matrix,
    blocks: Vec<BlockCache>,
    xq: Matrix,
    hq: Matrix,
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let (n, k) = logits.shape();
    let mut dlogits = Matrix::zeros(n, k);
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate().take(n) {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp = row.iter().fold(0.0, |a, &z| a + (z - max).exp());
        let lse = max + sum_exp.ln();
        total += lse - row[label];
        for c in 0..k {
            let p = (row[c] - lse).exp();
            dlogits[(r, c)] = (p - if c == label { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (total / n as f64, dlogits)
}

impl MlpModel {
    pub fn new(shape: MlpShape, quant: QuantSpec, rng: &mut Rng) -> Self {
        let h = shape.hidden;
        let mut params = Vec::with_capacity(3 * shape.depth + 2);
        params.push(Matrix::randn(shape.input_dim, h, 1.0 / (shape.input_dim as f64).sqrt(), rng));
        let std = 1.0 / (h as f64).sqrt();
        for _ in 0..shape.depth {
            params.push(Matrix::filled(1, h, 1.0));
            params.push(Matrix::randn(h, h, std, rng));
            params.push(Matrix::randn(h, h, std, rng));
        }
        params.push(Matrix::randn(h, shape.classes, std, rng));
        Self { shape, params, quant }
    }

    fn q(&self, m: &Matrix) -> Result<Matrix, HarnessError> {
        if self.quant.is_identity() {
            Ok(m.clone())
        } else {
            Ok(qdq(m, &self.quant)?)
        }
    }

    /// Logits for `inputs` (`batch x input_dim`).
    pub fn logits(&self, inputs: &Matrix) -> Result<Matrix, HarnessError> {
        Ok(self.forward(inputs)?.logits)
    }

    fn forward(&self, inputs: &Matrix) -> Result<Forward, HarnessError> {
        if inputs.cols() != self.shape.input_dim {
            return Err(TensorError::ShapeMismatch {
                op: "mlp input",
                left: inputs.shape(),
                right: (inputs.rows(), self.shape.input_dim),
            }
            .into());
        }
        let xq = self.q(inputs)?;
        let mut h = xq.matmul(&self.q(&self.params[0])?)?;
        let mut blocks = Vec::with_capacity(self.shape.depth);
        for b in 0..self.shape.depth {
            let (gain, wg, wu) = (&self.params[3 * b + 1], &self.params[3 * b + 2], &self.params[3 * b + 3]);
            let (n, norm) = rmsnorm_fwd(&h, gain)?;
            let (y, swiglu) = swiglu_fwd(&self.q(&n)?, &self.q(wg)?, &self.q(wu)?)?;
            blocks.push(BlockCache { norm, swiglu });
            h = h.add(&y)?;
        }
        let hq = self.q(&h)?;
        let logits = hq.matmul(&self.q(self.params.last().expect("head"))?)?;
        Ok(Forward { logits, blocks, xq, hq })
    }

    pub fn loss(&self, inputs: &Matrix, labels: &[usize]) -> Result<f64, HarnessError> {
        let logits = self.logits(inputs)?;
        Ok(cross_entropy(&logits, labels).0)
    }

    /// Mean cross-entropy and gradients for every parameter tensor.
    pub fn loss_and_grads(&self, inputs: &Matrix, labels: &[usize]) -> Result<(f64, Vec<Matrix>), HarnessError> {
        let fwd = self.forward(inputs)?;
        let (loss, dlogits) = cross_entropy(&fwd.logits, labels);
        let mut grads = vec![Matrix::zeros(0, 0); self.params.len()];
        let last = self.params.len() - 1;
        grads[last] = fwd.hq.transpose().matmul(&dlogits)?;
        let mut dh = dlogits.matmul(&self.q(&self.params[last])?.transpose())?;
        for (b, cache) in fwd.blocks.iter().enumerate().rev() {
            let sg = cache.swiglu.backward(&dh)?;
            let (dn, dgain) = cache.norm.backward(&sg.dx)?;
            grads[3 * b + 1] = dgain;
            grads[3 * b + 2] = sg.dw_gate;
            grads[3 * b + 3] = sg.dw_up;
            dh = dh.add(&dn)?;
        }
        grads[0] = fwd.xq.transpose().matmul(&dh)?;
        Ok((loss, grads))
    }
}
