//! Straight-line reference implementations of every update rule, written
//! against plain `f64` slices and sharing no code with [`crate::optim`].
//!
//! They exist to cross-check the optimized kernels (see [`crate::selftest`]
//! and the integration tests). Each keeps its own state and bias-correction
//! powers as running products rather than calling `powi`.

/// Adam with optional moment reset before the update on multiples of
/// `reset_every`.
#[derive(Debug, Clone)]
pub struct RefAdam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub reset_every: Option<u64>,
    m: Vec<f64>,
    v: Vec<f64>,
    b1_pow: f64,
    b2_pow: f64,
    t: u64,
}

impl RefAdam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            reset_every: None,
            m: vec![0.0; n],
            v: vec![0.0; n],
            b1_pow: 1.0,
            b2_pow: 1.0,
            t: 0,
        }
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.b1_pow = 1.0;
        self.b2_pow = 1.0;
    }

    /// Moment update and parameter step, without any reset logic.
    pub fn raw_step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        self.b1_pow *= self.beta1;
        self.b2_pow *= self.beta2;
        for i in 0..w.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / (1.0 - self.b1_pow);
            let v_hat = self.v[i] / (1.0 - self.b2_pow);
            w[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        if let Some(k) = self.reset_every {
            if self.t.is_multiple_of(k) {
                self.reset();
            }
        }
        self.raw_step(w, g, lr);
    }
}

/// Scales `g` so its L2 norm is at most `threshold`.
pub fn ref_norm_clip(g: &[f64], threshold: f64) -> Vec<f64> {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > threshold {
        g.iter().map(|x| x * (threshold / norm)).collect()
    } else {
        g.to_vec()
    }
}

/// AdaClip state: EMA of the max magnitude and the running `γ3^t`.
#[derive(Debug, Clone)]
pub struct RefAdaClip {
    pub gamma3: f64,
    pub ema: f64,
    pow: f64,
}

impl RefAdaClip {
    pub fn new(gamma3: f64) -> Self {
        Self { gamma3, ema: 0.0, pow: 1.0 }
    }

    /// Returns the clipped gradient.
    pub fn apply(&mut self, g: &[f64]) -> Vec<f64> {
        let mut g_max = 0.0f64;
        for x in g {
            if x.abs() > g_max {
                g_max = x.abs();
            }
        }
        self.ema = self.gamma3 * self.ema + (1.0 - self.gamma3) * g_max;
        self.pow *= self.gamma3;
        let limit = self.ema / (1.0 - self.pow);
        g.iter()
            .map(|&x| if x.abs() > limit { x / g_max * limit } else { x })
            .collect()
    }
}

/// AdaGN state: EMAs of the gradient norm and squared norm.
#[derive(Debug, Clone)]
pub struct RefAdaGn {
    pub gamma1: f64,
    pub gamma2: f64,
    pub eps: f64,
    m: f64,
    v: f64,
    p1: f64,
    p2: f64,
}

impl RefAdaGn {
    pub fn new(gamma1: f64, gamma2: f64, eps: f64) -> Self {
        Self {
            gamma1,
            gamma2,
            eps,
            m: 0.0,
            v: 0.0,
            p1: 1.0,
            p2: 1.0,
        }
    }

    pub fn apply(&mut self, g: &[f64]) -> Vec<f64> {
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.m = self.gamma1 * self.m + (1.0 - self.gamma1) * norm;
        self.v = self.gamma2 * self.v + (1.0 - self.gamma2) * norm * norm;
        self.p1 *= self.gamma1;
        self.p2 *= self.gamma2;
        if norm == 0.0 {
            return g.to_vec();
        }
        let target = (self.m / (1.0 - self.p1)) / ((self.v / (1.0 - self.p2)).sqrt() + self.eps);
        g.iter().map(|x| x / norm * target).collect()
    }
}

/// Stable-SPAM: AdaClip, then AdaGN, then Adam whose moments are zeroed
/// before the update on every multiple of `reset_every`.
#[derive(Debug, Clone)]
pub struct RefStableSpam {
    clip: RefAdaClip,
    norm: RefAdaGn,
    adam: RefAdam,
}

impl RefStableSpam {
    #[allow(clippy::too_many_arguments)]
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64, gamma1: f64, gamma2: f64, gamma3: f64, reset_every: u64) -> Self {
        let mut adam = RefAdam::new(n, beta1, beta2, eps);
        adam.reset_every = Some(reset_every);
        Self {
            clip: RefAdaClip::new(gamma3),
            norm: RefAdaGn::new(gamma1, gamma2, eps),
            adam,
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        let g = self.clip.apply(g);
        let g = self.norm.apply(&g);
        self.adam.step(w, &g, lr);
    }
}

/// SPAM: spike clip against the current `v`, Adam at a ramped LR, then a
/// reset after every multiple of `reset_every`.
#[derive(Debug, Clone)]
pub struct RefSpam {
    pub theta: f64,
    pub reset_every: u64,
    pub warmup: u64,
    adam: RefAdam,
    t: u64,
    since_reset: Option<u64>,
}

impl RefSpam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64, theta: f64, reset_every: u64, warmup: u64) -> Self {
        Self {
            theta,
            reset_every,
            warmup,
            adam: RefAdam::new(n, beta1, beta2, eps),
            t: 0,
            since_reset: None,
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let scale = match self.since_reset.as_mut() {
            None => 1.0,
            Some(k) => {
                *k += 1;
                (*k).min(self.warmup) as f64 / self.warmup as f64
            }
        };
        let v = self.adam.v().to_vec();
        let clipped: Vec<f64> = g
            .iter()
            .zip(&v)
            .map(|(&x, &vi)| {
                if vi > 0.0 && x * x > self.theta * vi {
                    x.signum() * (self.theta * vi).sqrt()
                } else {
                    x
                }
            })
            .collect();
        self.adam.raw_step(w, &clipped, lr * scale);
        if self.t.is_multiple_of(self.reset_every) {
            self.adam.reset();
            self.since_reset = Some(0);
        }
    }
}

/// Lion with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct RefLion {
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
}

impl RefLion {
    pub fn new(n: usize, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        Self {
            beta1,
            beta2,
            weight_decay,
            m: vec![0.0; n],
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        for i in 0..w.len() {
            let c = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            let s = if c > 0.0 {
                1.0
            } else if c < 0.0 {
                -1.0
            } else {
                0.0
            };
            w[i] -= lr * (s + self.weight_decay * w[i]);
            self.m[i] = self.beta2 * self.m[i] + (1.0 - self.beta2) * g[i];
        }
    }
}

/// Adam-mini with one second-moment scalar for the whole tensor.
#[derive(Debug, Clone)]
pub struct RefAdamMini {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: f64,
    p1: f64,
    p2: f64,
}

impl RefAdamMini {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: 0.0,
            p1: 1.0,
            p2: 1.0,
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        let mean_sq = g.iter().map(|x| x * x).sum::<f64>() / g.len() as f64;
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * mean_sq;
        self.p1 *= self.beta1;
        self.p2 *= self.beta2;
        let denom = (self.v / (1.0 - self.p2)).sqrt() + self.eps;
        for i in 0..w.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            w[i] -= lr * (self.m[i] / (1.0 - self.p1)) / denom;
        }
    }
}

/// Adafactor on a row-major `rows x cols` tensor, factored when both
/// dimensions exceed one, without parameter scaling.
#[derive(Debug, Clone)]
pub struct RefAdafactor {
    pub rows: usize,
    pub cols: usize,
    pub eps1: f64,
    pub clip: f64,
    pub decay: f64,
    r: Vec<f64>,
    c: Vec<f64>,
    full: Vec<f64>,
    t: u64,
}

impl RefAdafactor {
    pub fn new(rows: usize, cols: usize, eps1: f64, clip: f64, decay: f64) -> Self {
        Self {
            rows,
            cols,
            eps1,
            clip,
            decay,
            r: vec![0.0; rows],
            c: vec![0.0; cols],
            full: vec![0.0; rows * cols],
            t: 0,
        }
    }

    pub fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let beta = 1.0 - (self.t as f64).powf(-self.decay);
        let (rows, cols) = (self.rows, self.cols);
        let sq = |i: usize, j: usize| g[i * cols + j] * g[i * cols + j] + self.eps1;
        let mut vhat = vec![0.0; rows * cols];
        if rows > 1 && cols > 1 {
            for i in 0..rows {
                let mean = (0..cols).map(|j| sq(i, j)).sum::<f64>() / cols as f64;
                self.r[i] = beta * self.r[i] + (1.0 - beta) * mean;
            }
            for j in 0..cols {
                let mean = (0..rows).map(|i| sq(i, j)).sum::<f64>() / rows as f64;
                self.c[j] = beta * self.c[j] + (1.0 - beta) * mean;
            }
            let r_mean = self.r.iter().sum::<f64>() / rows as f64;
            for i in 0..rows {
                for j in 0..cols {
                    vhat[i * cols + j] = self.r[i] * self.c[j] / r_mean;
                }
            }
        } else {
            for k in 0..rows * cols {
                self.full[k] = beta * self.full[k] + (1.0 - beta) * (g[k] * g[k] + self.eps1);
                vhat[k] = self.full[k];
            }
        }
        let u: Vec<f64> = (0..rows * cols).map(|k| g[k] / vhat[k].sqrt()).collect();
        let rms = (u.iter().map(|x| x * x).sum::<f64>() / u.len() as f64).sqrt();
        let d = if rms / self.clip > 1.0 { rms / self.clip } else { 1.0 };
        for k in 0..rows * cols {
            w[k] -= lr * (u[k] / d);
        }
    }
}

/// Plain gradient descent.
pub fn ref_sgd(w: &mut [f64], g: &[f64], lr: f64) {
    for (wi, gi) in w.iter_mut().zip(g) {
        *wi -= lr * gi;
    }
}

/// Quantize-dequantize of one value on a symmetric grid of `2·max_code + 1`
/// evenly spaced codes scaled so the top code equals `amax`. Ties go to the
/// even code; the search is exhaustive.
pub fn ref_snap(x: f64, amax: f64, max_code: i64) -> f64 {
    if amax == 0.0 {
        return 0.0;
    }
    let y = x / amax * (max_code as f64);
    let mut best = -max_code;
    for k in -max_code..=max_code {
        let d = (y - k as f64).abs();
        let bd = (y - best as f64).abs();
        if d < bd || (d == bd && k % 2 == 0) {
            best = k;
        }
    }
    best as f64 / max_code as f64 * amax
}
