//! Acceptance suite. Runs every criterion, prints one verdict line each and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use stable_spam::config::{parse_config_str, RunConfig};
use stable_spam::harness::{sweep, write_records_csv};
use stable_spam::models::{rmsnorm_fwd, swiglu_fwd, MlpModel, MlpShape, QuadraticProblem};
use stable_spam::optim::{
    adaclip, adagn, compose, global_norm, grad_clip_global, AdaClipState, AdaGnState, Adam, AdamHyper, Optimizer,
    OptimizerConfig, OptimizerName, StableSpam, StableSpamConfig, TransformKind, TransformParams,
};
use stable_spam::quant::{grid, qdq, QuantFormat, QuantSpec};
use stable_spam::reference::{
    ref_norm_clip, RefAdaClip, RefAdafactor, RefAdam, RefAdamMini, RefLion, RefSpam, RefStableSpam,
};
use stable_spam::tensor::{Matrix, Rng};

type Verdict = Result<String, String>;

/// Spike-injected INT4 MLP task shared by the phenomenology criteria.
const PHENOMENOLOGY_TASK: &str = "\
run.total_steps = 2000
model.val_size = 2048
quant.format = int4
spikes.probability = 0.1
spikes.severity = 0.5
";
/// Five points spanning 30x.
const LR_GRID: [f64; 5] = [1e-4, 3e-4, 5e-4, 1e-3, 3e-3];
const SEEDS: [u64; 3] = [0, 1, 2];

fn spiky_scalars(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|t| {
            let g = rng.normal() * 10f64.powf(rng.uniform_range(-2.0, 1.0));
            if t % 10 == 9 {
                g * 100.0
            } else {
                g
            }
        })
        .collect()
}

// 1 -------------------------------------------------------------------------

fn scalar_trace(cfg: &OptimizerConfig, mut reference: impl FnMut(&mut [f64], &[f64], f64)) -> Result<f64, String> {
    let mut opt = cfg.build().map_err(|e| e.to_string())?;
    let mut p = vec![Matrix::scalar(0.5)];
    let mut w = [0.5];
    let mut worst = 0.0f64;
    for (t, g) in spiky_scalars(100, 21).into_iter().enumerate() {
        let lr = 1e-2 * (1.0 + 0.5 * (t as f64 * 0.1).sin());
        opt.step(&mut p, &[Matrix::scalar(g)], lr).map_err(|e| e.to_string())?;
        reference(&mut w, &[g], lr);
        worst = worst.max((p[0][(0, 0)] - w[0]).abs());
    }
    Ok(worst)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut report = Vec::new();
    let mut check = |label: &str, dev: Result<f64, String>| -> Result<(), String> {
        let dev = dev?;
        report.push(format!("{label} {dev:.1e}"));
        worst = worst.max(dev);
        if dev > 1e-12 {
            Err(format!("{label}: max |dev| {dev:e}"))
        } else {
            Ok(())
        }
    };

    let cfg = OptimizerConfig::named(OptimizerName::Adam);
    let h = cfg.adam;
    let mut r = RefAdam::new(1, h.beta1, h.beta2, h.eps);
    check("adam", scalar_trace(&cfg, |w, g, lr| r.step(w, g, lr)))?;

    let cfg = OptimizerConfig::named(OptimizerName::AdamGradClip);
    let mut r = RefAdam::new(1, h.beta1, h.beta2, h.eps);
    check(
        "adam+gradclip",
        scalar_trace(&cfg, |w, g, lr| r.step(w, &ref_norm_clip(g, 1.0), lr)),
    )?;

    let cfg = OptimizerConfig::named(OptimizerName::Adafactor);
    let a = cfg.adafactor;
    let mut r = RefAdafactor::new(1, 1, a.eps1, a.clip_threshold, a.decay_rate);
    check("adafactor", scalar_trace(&cfg, |w, g, lr| r.step(w, g, lr)))?;

    let cfg = OptimizerConfig::named(OptimizerName::Lion);
    let l = cfg.lion;
    let mut r = RefLion::new(1, l.beta1, l.beta2, l.weight_decay);
    check("lion", scalar_trace(&cfg, |w, g, lr| r.step(w, g, lr)))?;

    let cfg = OptimizerConfig::named(OptimizerName::AdamMini);
    let mut r = RefAdamMini::new(1, h.beta1, h.beta2, h.eps);
    check("adam_mini", scalar_trace(&cfg, |w, g, lr| r.step(w, g, lr)))?;

    // short reset interval and warmup so both fire inside 100 steps
    let mut cfg = OptimizerConfig::named(OptimizerName::Spam);
    cfg.spam.reset_interval = Some(30);
    cfg.spam.warmup_steps = 8;
    let mut r = RefSpam::new(1, h.beta1, h.beta2, h.eps, cfg.spam.threshold, 30, 8);
    check("spam", scalar_trace(&cfg, |w, g, lr| r.step(w, g, lr)))?;

    let mut cfg = OptimizerConfig::named(OptimizerName::StableSpam);
    cfg.stable_spam.reset_interval = 40;
    let s = cfg.stable_spam;
    let mut r = RefStableSpam::new(1, h.beta1, h.beta2, h.eps, s.gamma1, s.gamma2, s.gamma3, 40);
    check("stable_spam", scalar_trace(&cfg, |w, g, lr| r.step(w, g, lr)))?;

    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("max |dev| {worst:.1e} ({})", report.join(", ")))
}

// 2 -------------------------------------------------------------------------

fn criterion_2() -> Verdict {
    let dt = 30u64;
    let ss_cfg = StableSpamConfig {
        reset_interval: dt,
        ..StableSpamConfig::low_precision()
    };
    let params = TransformParams {
        gamma1: ss_cfg.gamma1,
        gamma2: ss_cfg.gamma2,
        gamma3: ss_cfg.gamma3,
        eps: ss_cfg.adam.eps,
        spike_threshold: 5000.0,
        clip_threshold: 1.0,
    };
    let mut composed = compose(
        vec![TransformKind::AdaClip, TransformKind::AdaGn],
        params,
        Box::new(Adam::with_reset(ss_cfg.adam, dt)),
    )
    .map_err(|e| e.to_string())?;
    let mut fused = StableSpam::new(ss_cfg);
    let mut rng = Rng::new(31);
    let mut a = vec![Matrix::randn(4, 4, 1.0, &mut rng)];
    let mut b = a.clone();
    for t in 1..=100u64 {
        let scale = if t % 10 == 0 { 100.0 } else { 1.0 };
        let g = vec![Matrix::randn(4, 4, scale, &mut rng)];
        let ia = composed.step(&mut a, &g, 1e-2).map_err(|e| e.to_string())?;
        let ib = fused.step(&mut b, &g, 1e-2).map_err(|e| e.to_string())?;
        let bits_a: Vec<u64> = a[0].as_slice().iter().map(|x| x.to_bits()).collect();
        let bits_b: Vec<u64> = b[0].as_slice().iter().map(|x| x.to_bits()).collect();
        if bits_a != bits_b {
            return Err(format!("compose and fused differ at step {t}"));
        }
        let expect_reset = t % dt == 0;
        if ia.reset != expect_reset || ib.reset != expect_reset {
            return Err(format!("reset flag at step {t}: compose {} fused {}", ia.reset, ib.reset));
        }
        let cycle = fused.states()[0].moments.step_in_cycle;
        // MoRet zeroes the moments before the update, so a reset step is the
        // first step of its cycle
        let want_cycle = if t < dt { t } else { t % dt + 1 };
        if cycle != want_cycle {
            return Err(format!("step {t}: {cycle} steps since reset, expected {want_cycle}"));
        }
    }

    // constant gradient c: bias-corrected moments and threshold recover c
    let c = -0.37;
    let hp = AdamHyper::default();
    let mut adam = Adam::with_reset(hp, 7);
    let mut clip = AdaClipState::default();
    let mut p = vec![Matrix::scalar(1.0)];
    let mut worst = 0.0f64;
    for _ in 0..25 {
        adam.step(&mut p, &[Matrix::scalar(c)], 1e-3).map_err(|e| e.to_string())?;
        adaclip(&Matrix::scalar(c), &mut clip, 0.999).map_err(|e| e.to_string())?;
        let m = &adam.moments()[0];
        let k = m.step_in_cycle as i32;
        let m_hat = m.m[(0, 0)] / (1.0 - hp.beta1.powi(k));
        let v_hat = m.v[(0, 0)] / (1.0 - hp.beta2.powi(k));
        let t_hat = clip.corrected_threshold(0.999);
        worst = worst.max((m_hat - c).abs()).max((v_hat - c * c).abs()).max((t_hat - c.abs()).abs());
    }
    if worst > 1e-12 {
        return Err(format!("constant-gradient corrections off by {worst:e}"));
    }
    Ok(format!(
        "bitwise equal over 100 steps, resets exactly at multiples of {dt}, constant-gradient error {worst:.1e}"
    ))
}

// 3 -------------------------------------------------------------------------

fn criterion_3() -> Verdict {
    let gamma3 = 0.999;
    let mut state = AdaClipState::default();
    let mut r = RefAdaClip::new(gamma3);
    let g1 = Matrix::row_vector(&[1.0, -0.5]);
    adaclip(&g1, &mut state, gamma3).map_err(|e| e.to_string())?;
    r.apply(g1.as_slice());
    let g2 = Matrix::row_vector(&[10.0, 0.1]);
    let (out, frac) = adaclip(&g2, &mut state, gamma3).map_err(|e| e.to_string())?;
    let want = r.apply(g2.as_slice());
    let t_hat = 0.010999 / 0.001999;
    let errs = [
        (state.corrected_threshold(gamma3) - t_hat).abs(),
        (out[(0, 0)] - t_hat).abs(),
        (out[(0, 0)] - want[0]).abs(),
        (out[(0, 1)] - 0.1).abs(),
        (out[(0, 1)] - want[1]).abs(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    if worst > 1e-9 || frac != 0.5 {
        return Err(format!("T̂₂ {} out {:?} frac {frac} (err {worst:e})", state.corrected_threshold(gamma3), out));
    }
    Ok(format!("T̂₂ = {:.9}, clipped 10 -> {:.9}, err {worst:.1e}", t_hat, out[(0, 0)]))
}

// 4 -------------------------------------------------------------------------

fn criterion_4() -> Verdict {
    let (g1, g2, eps) = (0.7, 0.9, 1e-6);
    let mut rng = Rng::new(41);
    let mut st = AdaGnState::default();
    let (mut m, mut v) = (0.0f64, 0.0f64);
    let mut worst = 0.0f64;
    for t in 1..=1000i32 {
        let scale = 10f64.powf(rng.uniform_range(-3.0, 3.0));
        let rows = 1 + rng.below(4);
        let cols = 1 + rng.below(4);
        let g = Matrix::randn(rows, cols, scale, &mut rng);
        let out = adagn(&g, &mut st, g1, g2, eps).map_err(|e| e.to_string())?;
        let n = g.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        m = g1 * m + (1.0 - g1) * n;
        v = g2 * v + (1.0 - g2) * n * n;
        let want = (m / (1.0 - g1.powi(t))) / ((v / (1.0 - g2.powi(t))).sqrt() + eps);
        let rel = (out.frobenius_norm() - want).abs() / want;
        worst = worst.max(rel);
    }
    if worst > 1e-12 {
        return Err(format!("norm law off by {worst:e} relative"));
    }
    // spike after a constant-norm history
    let mut st = AdaGnState::default();
    for _ in 0..50 {
        let d = Matrix::randn(3, 3, 1.0, &mut rng);
        let unit = d.scale(1.0 / d.frobenius_norm());
        adagn(&unit, &mut st, g1, g2, eps).map_err(|e| e.to_string())?;
    }
    let d = Matrix::randn(3, 3, 1.0, &mut rng);
    let spike = d.scale(10.0 / d.frobenius_norm());
    let out = adagn(&spike, &mut st, g1, g2, eps).map_err(|e| e.to_string())?;
    if out.frobenius_norm() >= spike.frobenius_norm() {
        return Err(format!("spike not attenuated: {} -> {}", spike.frobenius_norm(), out.frobenius_norm()));
    }
    Ok(format!(
        "max rel err {worst:.1e} over 1000 steps; 10x spike norm 10 -> {:.3}",
        out.frobenius_norm()
    ))
}

// 5 -------------------------------------------------------------------------

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let fp4: Vec<f64> = (-7..=7).map(|k| k as f64 * 0.25).collect();
    if grid(QuantFormat::Fp4E1M2) != fp4 {
        return Err(format!("fp4 grid {:?}", grid(QuantFormat::Fp4E1M2)));
    }
    let mut rng = Rng::new(51);
    for f in QuantFormat::ALL_QUANTIZED {
        let spec = QuantSpec::new(f);
        for i in 0..10_000 {
            let rows = 1 + rng.below(5);
            let cols = 1 + rng.below(5);
            let scale = 10f64.powf(rng.uniform_range(-4.0, 4.0));
            let x = Matrix::randn(rows, cols, scale, &mut rng);
            let q = qdq(&x, &spec).map_err(|e| e.to_string())?;
            let qq = qdq(&q, &spec).map_err(|e| e.to_string())?;
            let amax = x.max_abs().map_err(|e| e.to_string())?;
            if q != qq {
                return Err(format!("{f} matrix {i}: not idempotent"));
            }
            for (&a, &b) in x.as_slice().iter().zip(q.as_slice()) {
                if b.abs() > amax {
                    return Err(format!("{f} matrix {i}: |{b}| exceeds max {amax}"));
                }
                if b != 0.0 && b.signum() != a.signum() {
                    return Err(format!("{f} matrix {i}: sign flip {a} -> {b}"));
                }
                if a.abs() == amax && a != b {
                    return Err(format!("{f} matrix {i}: absmax entry {a} moved to {b}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("4 formats x 10^4 matrices in {:.2}s; fp4 grid has 15 values", elapsed.as_secs_f64()))
}

// 6 -------------------------------------------------------------------------

/// Central-difference check of `analytic` against `f` around `x`.
fn fd_worst(analytic: &Matrix, x: &Matrix, f: impl Fn(&Matrix) -> f64) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut p = x.clone();
        p.as_mut_slice()[i] += h;
        let mut m = x.clone();
        m.as_mut_slice()[i] -= h;
        let fd = (f(&p) - f(&m)) / (2.0 * h);
        let a = analytic.as_slice()[i];
        // relative error, with the denominator floored where both vanish
        worst = worst.max((fd - a).abs() / a.abs().max(fd.abs()).max(1e-4));
    }
    worst
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut rng = Rng::new(61);
    let mut worst = [0.0f64; 4];
    for _ in 0..20 {
        // quadratic
        let n = 1 + rng.below(8);
        let prob = QuadraticProblem::random(n, &mut rng);
        let g = prob.grad_at(&prob.w).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(fd_worst(&g, &prob.w, |w| prob.loss_at(w).unwrap()));

        // rmsnorm and swiglu under a random linear probe
        let rows = 1 + rng.below(4);
        let d = 2 + rng.below(7);
        let x = Matrix::randn(rows, d, 1.0 + rng.uniform() * 3.0, &mut rng);
        let gain = Matrix::uniform(1, d, 0.5, 1.5, &mut rng);
        let probe = Matrix::randn(rows, d, 1.0, &mut rng);
        let (_, cache) = rmsnorm_fwd(&x, &gain).map_err(|e| e.to_string())?;
        let (dx, dgain) = cache.backward(&probe).map_err(|e| e.to_string())?;
        let dot = |y: &Matrix| y.hadamard(&probe).unwrap().sum();
        worst[1] = worst[1]
            .max(fd_worst(&dx, &x, |x| dot(&rmsnorm_fwd(x, &gain).unwrap().0)))
            .max(fd_worst(&dgain, &gain, |g| dot(&rmsnorm_fwd(&x, g).unwrap().0)));

        let out = 1 + rng.below(6);
        let wg = Matrix::randn(d, out, 0.7, &mut rng);
        let wu = Matrix::randn(d, out, 0.7, &mut rng);
        let probe = Matrix::randn(rows, out, 1.0, &mut rng);
        let dot = |y: &Matrix| y.hadamard(&probe).unwrap().sum();
        let (_, cache) = swiglu_fwd(&x, &wg, &wu).map_err(|e| e.to_string())?;
        let sg = cache.backward(&probe).map_err(|e| e.to_string())?;
        worst[2] = worst[2]
            .max(fd_worst(&sg.dx, &x, |x| dot(&swiglu_fwd(x, &wg, &wu).unwrap().0)))
            .max(fd_worst(&sg.dw_gate, &wg, |w| dot(&swiglu_fwd(&x, w, &wu).unwrap().0)))
            .max(fd_worst(&sg.dw_up, &wu, |w| dot(&swiglu_fwd(&x, &wg, w).unwrap().0)));

        // full MLP, no quantization
        let shape = MlpShape {
            input_dim: 1 + rng.below(5),
            hidden: 2 + rng.below(5),
            depth: rng.below(3),
            classes: 2 + rng.below(3),
        };
        let mut model = MlpModel::new(shape, QuantSpec::NONE, &mut rng);
        for b in 0..shape.depth {
            model.params[3 * b + 1] = Matrix::uniform(1, shape.hidden, 0.5, 1.5, &mut rng);
        }
        let batch = 1 + rng.below(5);
        let xs = Matrix::randn(batch, shape.input_dim, 1.0, &mut rng);
        let labels: Vec<usize> = (0..batch).map(|_| rng.below(shape.classes)).collect();
        let (_, grads) = model.loss_and_grads(&xs, &labels).map_err(|e| e.to_string())?;
        for t in 0..model.params.len() {
            let base = model.params[t].clone();
            let w = fd_worst(&grads[t], &base, |p| {
                let mut m = model.clone();
                m.params[t] = p.clone();
                m.loss(&xs, &labels).unwrap()
            });
            worst[3] = worst[3].max(w);
        }
    }
    let elapsed = start.elapsed();
    let max = worst.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "max rel err quadratic {:.1e}, rmsnorm {:.1e}, swiglu {:.1e}, mlp {:.1e} ({:.2}s)",
        worst[0],
        worst[1],
        worst[2],
        worst[3],
        elapsed.as_secs_f64()
    );
    if max >= 1e-5 || elapsed >= Duration::from_secs(30) {
        return Err(detail);
    }
    Ok(detail)
}

// 7, 8 ----------------------------------------------------------------------

fn task(optimizer: &str, seed: u64) -> RunConfig {
    parse_config_str(&format!("{PHENOMENOLOGY_TASK}{optimizer}run.seed = {seed}\n")).expect("valid task config")
}

/// Final validation loss per (seed, lr); `None` marks divergence.
fn sweep_seeds(optimizer: &str) -> Result<Vec<Vec<Option<f64>>>, String> {
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    SEEDS
        .iter()
        .map(|&seed| {
            let s = sweep(&task(optimizer, seed), &LR_GRID, jobs, None).map_err(|e| e.to_string())?;
            Ok(s.points.iter().map(|p| p.final_loss()).collect())
        })
        .collect()
}

/// Mean over seeds per LR; divergence in any seed marks the LR diverged.
fn seed_mean(table: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    (0..LR_GRID.len())
        .map(|i| {
            let vals: Option<Vec<f64>> = table.iter().map(|row| row[i]).collect();
            vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

fn best(losses: &[Option<f64>]) -> Option<f64> {
    losses.iter().flatten().copied().reduce(f64::min)
}

fn unstable_count(losses: &[Option<f64>]) -> usize {
    let b = best(losses).unwrap_or(f64::INFINITY);
    losses.iter().filter(|l| l.is_none_or(|l| l > 2.0 * b)).count()
}

fn fmt_row(losses: &[Option<f64>]) -> String {
    let cells: Vec<String> = losses
        .iter()
        .map(|l| l.map_or_else(|| "div".into(), |l| format!("{l:.4}")))
        .collect();
    cells.join(" ")
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let adam = seed_mean(&sweep_seeds("optimizer.name = adam\n")?);
    let stable = seed_mean(&sweep_seeds("optimizer.name = stable_spam\n")?);
    let (ua, us) = (unstable_count(&adam), unstable_count(&stable));
    let (ba, bs) = (best(&adam), best(&stable));
    let elapsed = start.elapsed();
    let detail = format!(
        "unstable LRs adam {ua} vs stable_spam {us}; best val loss adam {} vs stable_spam {}; adam [{}] stable_spam [{}] ({:.0}s)",
        ba.map_or("div".into(), |b| format!("{b:.4}")),
        bs.map_or("div".into(), |b| format!("{b:.4}")),
        fmt_row(&adam),
        fmt_row(&stable),
        elapsed.as_secs_f64()
    );
    let ok_a = ua >= us;
    let ok_b = match (bs, ba) {
        (Some(s), Some(a)) => s <= a * 1.01,
        (Some(_), None) => true,
        (None, _) => false,
    };
    if ok_a && ok_b && elapsed < Duration::from_secs(600) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Verdict {
    let lion = sweep_seeds("optimizer.name = lion\n")?;
    let composed = sweep_seeds("optimizer.name = lion\noptimizer.transforms = adaclip, adagn\n")?;
    let mut wins = 0;
    let mut cells = Vec::new();
    for (s, (a, b)) in SEEDS.iter().zip(lion.iter().zip(&composed)) {
        let (ba, bb) = (best(a), best(b));
        let win = match (bb, ba) {
            (Some(x), Some(y)) => x <= y,
            (Some(_), None) => true,
            (None, _) => false,
        };
        wins += usize::from(win);
        cells.push(format!(
            "seed {s}: lion {} vs lion+adaclip+adagn {}",
            ba.map_or("div".into(), |v| format!("{v:.4}")),
            bb.map_or("div".into(), |v| format!("{v:.4}"))
        ));
    }
    let detail = format!("{wins}/3 seeds ({})", cells.join("; "));
    if wins >= 2 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 9 -------------------------------------------------------------------------

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        "optimizer.name = stable_spam\nquant.format = int4\nspikes.probability = 0.1\nspikes.severity = 0.5\n",
        "optimizer.name = spam\noptimizer.reset_interval = 50\nquant.format = fp4_e1m2\n",
        "optimizer.name = lion\noptimizer.transforms = adaclip, adagn\nquant.format = int3\n",
        "model.kind = quadratic\noptimizer.name = adafactor\nspikes.probability = 0.2\nspikes.severity = 1\n",
    ];
    let mut compared = 0;
    for (i, text) in configs.iter().enumerate() {
        for seed in [3u64, 11] {
            let cfg = parse_config_str(&format!("run.total_steps = 200\nrun.seed = {seed}\n{text}"))
                .map_err(|e| e.to_string())?;
            let mut bytes = Vec::new();
            for attempt in 0..2 {
                let r = stable_spam::harness::run(&cfg).map_err(|e| e.to_string())?;
                let path = dir.path().join(format!("c{i}_s{seed}_{attempt}.csv"));
                write_records_csv(&path, &r.records).map_err(|e| e.to_string())?;
                bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
            }
            if bytes[0] != bytes[1] {
                return Err(format!("config {i} seed {seed}: CSVs differ"));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} (config, seed) pairs byte-identical across two executions"))
}

// 10 ------------------------------------------------------------------------

fn criterion_10() -> Verdict {
    let mut rng = Rng::new(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let layers: Vec<Matrix> = (0..1 + rng.below(6))
            .map(|_| {
                let scale = 10f64.powf(rng.uniform_range(-3.0, 3.0));
                Matrix::randn(1 + rng.below(5), 1 + rng.below(5), scale, &mut rng)
            })
            .collect();
        let norm = global_norm(&grad_clip_global(&layers, 1.0));
        worst = worst.max(norm);
        if norm > 1.0 + 1e-12 {
            return Err(format!("clipped norm {norm}"));
        }
    }
    Ok(format!("max clipped global norm {worst:.15}"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("oracle equivalence", criterion_1),
        ("stable-spam composition fidelity", criterion_2),
        ("adaclip worked trace", criterion_3),
        ("adagn norm law", criterion_4),
        ("quantizer properties", criterion_5),
        ("gradient checks", criterion_6),
        ("stability phenomenology", criterion_7),
        ("composition benefit direction", criterion_8),
        ("harness determinism", criterion_9),
        ("gradclip contract", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
