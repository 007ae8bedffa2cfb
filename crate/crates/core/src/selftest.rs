//! Built-in consistency checks, runnable from the CLI without a test
//! harness. Each check compares a kernel against [`crate::reference`] or a
//! closed-form property and reports a one-line verdict.

use crate::config::parse_config_str;
use crate::error::OptimError;
use crate::harness::{run, Schedule};
use crate::models::{MlpModel, MlpShape};
use crate::optim::{
    adaclip, adagn, compose, AdaClipState, AdaGnState, Lion, LionConfig, OptimizerConfig, OptimizerName,
    TransformKind, TransformParams,
};
use crate::quant::{grid, qdq, qdq_idempotent_check, QuantFormat, QuantSpec};
use crate::reference::{
    ref_norm_clip, ref_sgd, ref_snap, RefAdaClip, RefAdaGn, RefAdafactor, RefAdam, RefAdamMini, RefLion, RefSpam,
    RefStableSpam,
};
use crate::tensor::{Matrix, Rng};

pub type CheckFn = fn() -> Result<(), String>;

/// Signature of an AdaClip kernel, so alternative implementations can be
/// put through [`check_adaclip_with`].
pub type AdaClipFn = fn(&Matrix, &mut AdaClipState, f64) -> Result<(Matrix, f64), OptimError>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const CHECKS: &[(&str, CheckFn)] = &[
    ("tensor.matmul", check_matmul),
    ("quant.grids", check_grids),
    ("quant.qdq_reference", check_qdq_reference),
    ("quant.idempotent", check_idempotent),
    ("optim.adam_trace", check_adam),
    ("optim.adam_moret_trace", check_adam_moret),
    ("optim.adam_gradclip_trace", check_adam_gradclip),
    ("optim.adafactor_trace", check_adafactor),
    ("optim.lion_trace", check_lion),
    ("optim.adam_mini_trace", check_adam_mini),
    ("optim.sgd_trace", check_sgd),
    ("optim.spam_trace", check_spam),
    ("optim.stable_spam_trace", check_stable_spam),
    ("optim.adaclip", check_adaclip),
    ("optim.adagn_norm", check_adagn_norm),
    ("optim.compose", check_compose),
    ("models.mlp_gradients", check_mlp_gradients),
    ("harness.schedule", check_schedule),
    ("harness.determinism", check_determinism),
];

pub fn run_all() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, f)| match f() {
            Ok(()) => CheckOutcome {
                name,
                passed: true,
                detail: String::new(),
            },
            Err(detail) => CheckOutcome {
                name,
                passed: false,
                detail,
            },
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Gradient stream with a large spike every tenth step.
fn gradient_stream(rows: usize, cols: usize, steps: usize, seed: u64) -> Vec<Matrix> {
    let mut rng = Rng::new(seed);
    (0..steps)
        .map(|t| {
            let g = Matrix::randn(rows, cols, 1.0, &mut rng);
            if t % 10 == 9 {
                g.scale(100.0)
            } else {
                g
            }
        })
        .collect()
}

/// Runs `cfg` and `reference` side by side over a spiky gradient stream and
/// compares weights after every step.
fn trace_against(
    cfg: &OptimizerConfig,
    (rows, cols): (usize, usize),
    steps: usize,
    tol: f64,
    mut reference: impl FnMut(&mut [f64], &[f64], f64),
) -> Result<(), String> {
    let mut opt = cfg.build().map_err(|e| e.to_string())?;
    let mut rng = Rng::new(99);
    let mut params = vec![Matrix::randn(rows, cols, 1.0, &mut rng)];
    let mut w: Vec<f64> = params[0].as_slice().to_vec();
    for (t, g) in gradient_stream(rows, cols, steps, 7).iter().enumerate() {
        let lr = 1e-2 * (1.0 + (t % 3) as f64);
        opt.step(&mut params, std::slice::from_ref(g), lr).map_err(|e| e.to_string())?;
        reference(&mut w, g.as_slice(), lr);
        for (i, (&a, &b)) in params[0].as_slice().iter().zip(&w).enumerate() {
            if !close(a, b, tol) {
                return Err(format!("step {} entry {i}: got {a:e}, reference {b:e}", t + 1));
            }
        }
    }
    Ok(())
}

fn check_matmul() -> Result<(), String> {
    let mut rng = Rng::new(1);
    for &(n, k, m) in &[(1, 1, 1), (3, 5, 2), (7, 4, 6)] {
        let a = Matrix::randn(n, k, 1.0, &mut rng);
        let b = Matrix::randn(k, m, 1.0, &mut rng);
        let c = a.matmul(&b).map_err(|e| e.to_string())?;
        for i in 0..n {
            for j in 0..m {
                let mut s = 0.0;
                for l in 0..k {
                    s += a[(i, l)] * b[(l, j)];
                }
                if c[(i, j)] != s {
                    return Err(format!("({i},{j}) of {n}x{k}·{k}x{m}: {} vs {s}", c[(i, j)]));
                }
            }
        }
    }
    Ok(())
}

fn check_grids() -> Result<(), String> {
    let ints = |m: i64| (-m..=m).map(|k| k as f64).collect::<Vec<_>>();
    let cases = [
        (QuantFormat::Int2, ints(1)),
        (QuantFormat::Int3, ints(3)),
        (QuantFormat::Int4, ints(7)),
        (QuantFormat::Fp4E1M2, (-7..=7).map(|k| k as f64 * 0.25).collect()),
    ];
    for (f, want) in cases {
        if grid(f) != want {
            return Err(format!("{f}: grid {:?}", grid(f)));
        }
    }
    Ok(())
}

fn check_qdq_reference() -> Result<(), String> {
    let mut rng = Rng::new(2);
    for f in QuantFormat::ALL_QUANTIZED {
        let max_code = grid(f).len() as i64 / 2;
        for _ in 0..20 {
            let x = Matrix::randn(4, 5, 3.0, &mut rng);
            let amax = x.max_abs().map_err(|e| e.to_string())?;
            let q = qdq(&x, &QuantSpec::new(f)).map_err(|e| e.to_string())?;
            for (&a, &v) in q.as_slice().iter().zip(x.as_slice()) {
                let b = ref_snap(v, amax, max_code);
                if !close(a, b, 1e-12) {
                    return Err(format!("{f}: qdq({v}) = {a}, reference {b}"));
                }
            }
        }
    }
    let q = qdq(&Matrix::row_vector(&[-3.5, 7.0]), &QuantSpec::new(QuantFormat::Int4)).map_err(|e| e.to_string())?;
    if q[(0, 0)] != -4.0 {
        return Err(format!("int4 tie: -3.5 -> {}", q[(0, 0)]));
    }
    Ok(())
}

fn check_idempotent() -> Result<(), String> {
    let mut rng = Rng::new(3);
    for f in QuantFormat::ALL_QUANTIZED {
        for _ in 0..20 {
            let x = Matrix::randn(3, 6, 10.0, &mut rng);
            if !qdq_idempotent_check(&x, &QuantSpec::new(f)) {
                return Err(format!("{f}: qdq∘qdq != qdq for {x:?}"));
            }
        }
    }
    Ok(())
}

fn adam_cfg(name: OptimizerName) -> OptimizerConfig {
    OptimizerConfig::named(name)
}

fn check_adam() -> Result<(), String> {
    let cfg = adam_cfg(OptimizerName::Adam);
    let h = cfg.adam;
    let mut r = RefAdam::new(1, h.beta1, h.beta2, h.eps);
    trace_against(&cfg, (1, 1), 100, 1e-12, |w, g, lr| r.step(w, g, lr))
}

fn check_adam_moret() -> Result<(), String> {
    let mut cfg = adam_cfg(OptimizerName::Adam);
    cfg.moret_interval = Some(7);
    let h = cfg.adam;
    let mut r = RefAdam::new(6, h.beta1, h.beta2, h.eps);
    r.reset_every = Some(7);
    trace_against(&cfg, (2, 3), 60, 1e-12, |w, g, lr| r.step(w, g, lr))
}

fn check_adam_gradclip() -> Result<(), String> {
    let cfg = adam_cfg(OptimizerName::AdamGradClip);
    let h = cfg.adam;
    let thr = cfg.grad_clip_threshold;
    let mut r = RefAdam::new(4, h.beta1, h.beta2, h.eps);
    trace_against(&cfg, (2, 2), 100, 1e-12, |w, g, lr| r.step(w, &ref_norm_clip(g, thr), lr))
}

fn check_adafactor() -> Result<(), String> {
    let cfg = adam_cfg(OptimizerName::Adafactor);
    let a = cfg.adafactor;
    for shape in [(3, 3), (1, 4)] {
        let mut r = RefAdafactor::new(shape.0, shape.1, a.eps1, a.clip_threshold, a.decay_rate);
        trace_against(&cfg, shape, 30, 1e-10, |w, g, lr| r.step(w, g, lr))
            .map_err(|e| format!("{}x{}: {e}", shape.0, shape.1))?;
    }
    Ok(())
}

fn check_lion() -> Result<(), String> {
    let cfg = adam_cfg(OptimizerName::Lion);
    let l = cfg.lion;
    let mut r = RefLion::new(1, l.beta1, l.beta2, l.weight_decay);
    trace_against(&cfg, (1, 1), 100, 1e-12, |w, g, lr| r.step(w, g, lr))
}

fn check_adam_mini() -> Result<(), String> {
    let cfg = adam_cfg(OptimizerName::AdamMini);
    let h = cfg.adam;
    let mut r = RefAdamMini::new(6, h.beta1, h.beta2, h.eps);
    trace_against(&cfg, (2, 3), 100, 1e-12, |w, g, lr| r.step(w, g, lr))
}

fn check_sgd() -> Result<(), String> {
    trace_against(&adam_cfg(OptimizerName::Sgd), (1, 1), 100, 1e-12, ref_sgd)
}

fn check_spam() -> Result<(), String> {
    let mut cfg = adam_cfg(OptimizerName::Spam);
    cfg.spam.reset_interval = Some(20);
    cfg.spam.warmup_steps = 5;
    cfg.spam.threshold = 50.0;
    let h = cfg.adam;
    let mut r = RefSpam::new(1, h.beta1, h.beta2, h.eps, 50.0, 20, 5);
    trace_against(&cfg, (1, 1), 100, 1e-12, |w, g, lr| r.step(w, g, lr))
}

fn check_stable_spam() -> Result<(), String> {
    let mut cfg = adam_cfg(OptimizerName::StableSpam);
    cfg.stable_spam.reset_interval = 25;
    let s = cfg.stable_spam;
    let h = cfg.adam;
    let mut r = RefStableSpam::new(1, h.beta1, h.beta2, h.eps, s.gamma1, s.gamma2, s.gamma3, 25);
    trace_against(&cfg, (1, 1), 100, 1e-12, |w, g, lr| r.step(w, g, lr))?;
    let mut r = RefStableSpam::new(6, h.beta1, h.beta2, h.eps, s.gamma1, s.gamma2, s.gamma3, 25);
    trace_against(&cfg, (2, 3), 100, 1e-12, |w, g, lr| r.step(w, g, lr))
}

/// Compares an AdaClip kernel against the reference over a spiky stream.
/// Values must agree to 1e-12 and the reported fraction must match the
/// number of entries the reference changed.
pub fn check_adaclip_with(kernel: AdaClipFn) -> Result<(), String> {
    let gamma3 = 0.999;
    let mut state = AdaClipState::default();
    let mut r = RefAdaClip::new(gamma3);
    for (t, g) in gradient_stream(3, 4, 50, 11).iter().enumerate() {
        let (got, frac) = kernel(g, &mut state, gamma3).map_err(|e| e.to_string())?;
        let want = r.apply(g.as_slice());
        let changed = want.iter().zip(g.as_slice()).filter(|(a, b)| a != b).count();
        for (i, (&a, &b)) in got.as_slice().iter().zip(&want).enumerate() {
            if !close(a, b, 1e-12) {
                return Err(format!("step {} entry {i}: got {a:e}, reference {b:e}", t + 1));
            }
        }
        if (frac - changed as f64 / g.len() as f64).abs() > 1e-15 {
            return Err(format!("step {}: clipped fraction {frac}, reference changed {changed}", t + 1));
        }
    }
    Ok(())
}

fn check_adaclip() -> Result<(), String> {
    check_adaclip_with(adaclip)
}

fn check_adagn_norm() -> Result<(), String> {
    let (g1, g2, eps) = (0.7, 0.9, 1e-6);
    let mut st = AdaGnState::default();
    let mut r = RefAdaGn::new(g1, g2, eps);
    for (t, g) in gradient_stream(2, 5, 40, 13).iter().enumerate() {
        let out = adagn(g, &mut st, g1, g2, eps).map_err(|e| e.to_string())?;
        let want_norm = st.adaptive_norm(g1, g2, eps);
        if !close(out.frobenius_norm(), want_norm, 1e-12) {
            return Err(format!("step {}: ‖ĝ‖ = {}, expected {want_norm}", t + 1, out.frobenius_norm()));
        }
        let want = r.apply(g.as_slice());
        for (&a, &b) in out.as_slice().iter().zip(&want) {
            if !close(a, b, 1e-12) {
                return Err(format!("step {}: {a:e} vs reference {b:e}", t + 1));
            }
        }
    }
    Ok(())
}

fn check_compose() -> Result<(), String> {
    // empty composition is the base, bit for bit
    let lion = LionConfig::default();
    let params = TransformParams {
        gamma1: 0.7,
        gamma2: 0.9,
        gamma3: 0.999,
        eps: 1e-6,
        spike_threshold: 5000.0,
        clip_threshold: 1.0,
    };
    let mut plain = Lion::new(lion);
    let mut wrapped = compose(Vec::new(), params, Box::new(Lion::new(lion))).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(4);
    let mut a = vec![Matrix::randn(2, 2, 1.0, &mut rng)];
    let mut b = a.clone();
    use crate::optim::Optimizer;
    for g in gradient_stream(2, 2, 30, 5) {
        plain.step(&mut a, std::slice::from_ref(&g), 1e-2).map_err(|e| e.to_string())?;
        wrapped.step(&mut b, std::slice::from_ref(&g), 1e-2).map_err(|e| e.to_string())?;
    }
    if a != b {
        return Err("empty composition differs from its base".into());
    }
    // lion + adaclip + adagn against the chained references
    let mut cfg = OptimizerConfig::named(OptimizerName::Lion);
    cfg.transforms = vec![TransformKind::AdaClip, TransformKind::AdaGn];
    let s = cfg.stable_spam;
    let mut clip = RefAdaClip::new(s.gamma3);
    let mut norm = RefAdaGn::new(s.gamma1, s.gamma2, cfg.adam.eps);
    let mut r = RefLion::new(4, lion.beta1, lion.beta2, lion.weight_decay);
    trace_against(&cfg, (2, 2), 60, 1e-12, |w, g, lr| {
        let g = norm.apply(&clip.apply(g));
        r.step(w, &g, lr)
    })
}

fn check_mlp_gradients() -> Result<(), String> {
    let mut rng = Rng::new(6);
    let shape = MlpShape {
        input_dim: 3,
        hidden: 4,
        depth: 2,
        classes: 3,
    };
    let model = MlpModel::new(shape, QuantSpec::NONE, &mut rng);
    let x = Matrix::randn(4, 3, 1.0, &mut rng);
    let y = [0, 1, 2, 0];
    let (_, grads) = model.loss_and_grads(&x, &y).map_err(|e| e.to_string())?;
    let h = 1e-6;
    for t in 0..model.params.len() {
        for i in 0..model.params[t].len() {
            let mut p = model.clone();
            p.params[t].as_mut_slice()[i] += h;
            let mut m = model.clone();
            m.params[t].as_mut_slice()[i] -= h;
            let lp = p.loss(&x, &y).map_err(|e| e.to_string())?;
            let lm = m.loss(&x, &y).map_err(|e| e.to_string())?;
            let fd = (lp - lm) / (2.0 * h);
            let a = grads[t].as_slice()[i];
            if (fd - a).abs() > 1e-5 * a.abs().max(fd.abs()).max(1e-3) {
                return Err(format!("tensor {t} entry {i}: analytic {a:e}, numeric {fd:e}"));
            }
        }
    }
    Ok(())
}

fn check_schedule() -> Result<(), String> {
    let cfg = parse_config_str("run.total_steps = 200\nschedule.lr = 0.01\nschedule.warmup_steps = 20").map_err(|e| e.to_string())?;
    let s = Schedule::new(&cfg.schedule, cfg.total_steps);
    let cases = [(0, 0.0), (10, 0.005), (20, 0.01), (200, 0.001)];
    for (step, want) in cases {
        if !close(s.lr_at(step), want, 1e-12) {
            return Err(format!("lr({step}) = {}, expected {want}", s.lr_at(step)));
        }
    }
    Ok(())
}

fn check_determinism() -> Result<(), String> {
    let cfg = parse_config_str(
        "run.total_steps = 20\nmodel.hidden = 8\nmodel.train_size = 64\nmodel.val_size = 32\nmodel.batch_size = 8\noptimizer.name = stable_spam\nquant.format = int4\nspikes.probability = 0.1\nspikes.severity = 0.5",
    )
    .map_err(|e| e.to_string())?;
    let a = run(&cfg).map_err(|e| e.to_string())?;
    let b = run(&cfg).map_err(|e| e.to_string())?;
    if a.records != b.records {
        return Err("two runs with the same seed produced different traces".into());
    }
    Ok(())
}
