use proptest::prelude::*;

use stable_spam::harness::{detect_loss_spike, global_grad_norm};
use stable_spam::models::QuadraticProblem;
use stable_spam::optim::{
    adaclip, adagn, global_norm, grad_clip_global, spike_clip, AdaClipState, AdaGnState, OptimizerConfig,
    OptimizerName,
};
use stable_spam::quant::{grid, qdq, QuantFormat, QuantSpec};
use stable_spam::tensor::{Matrix, Rng};

fn matrix(max_dim: usize, mag: f64) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(move |(r, c)| {
        prop::collection::vec(-mag..mag, r * c).prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

fn scaled_matrix() -> impl Strategy<Value = Matrix> {
    (matrix(6, 1.0), -6.0f64..6.0).prop_map(|(m, e)| m.scale(10f64.powf(e)))
}

fn layers() -> impl Strategy<Value = Vec<Matrix>> {
    prop::collection::vec(scaled_matrix(), 1..5)
}

fn format() -> impl Strategy<Value = QuantFormat> {
    prop::sample::select(QuantFormat::ALL_QUANTIZED.to_vec())
}

proptest! {
    #[test]
    fn qdq_is_idempotent(x in scaled_matrix(), f in format()) {
        let spec = QuantSpec::new(f);
        let once = qdq(&x, &spec).unwrap();
        prop_assert_eq!(qdq(&once, &spec).unwrap(), once);
    }

    #[test]
    fn qdq_is_bounded_and_keeps_signs(x in scaled_matrix(), f in format()) {
        let q = qdq(&x, &QuantSpec::new(f)).unwrap();
        let amax = x.max_abs().unwrap();
        for (&a, &b) in x.as_slice().iter().zip(q.as_slice()) {
            prop_assert!(b.abs() <= amax);
            prop_assert!(b == 0.0 || b.signum() == a.signum());
            if a.abs() == amax {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn qdq_lands_on_the_scaled_grid(x in scaled_matrix(), f in format()) {
        let q = qdq(&x, &QuantSpec::new(f)).unwrap();
        let amax = x.max_abs().unwrap();
        prop_assume!(amax > 0.0);
        let s = amax / f.grid_max().unwrap();
        let g = grid(f);
        for &v in q.as_slice() {
            let nearest = g.iter().map(|c| (c * s - v).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= 1e-12 * amax, "{} is off grid", v);
        }
    }

    #[test]
    fn identity_format_is_identity(x in scaled_matrix()) {
        prop_assert_eq!(qdq(&x, &QuantSpec::NONE).unwrap(), x);
    }

    #[test]
    fn spike_clip_is_idempotent(
        g in matrix(5, 100.0),
        seed in any::<u64>(),
        theta in 1.0f64..10_000.0,
    ) {
        let mut rng = Rng::new(seed);
        let v = Matrix::uniform(g.rows(), g.cols(), 0.0, 2.0, &mut rng);
        let once = spike_clip(&g, &v, theta).unwrap();
        let twice = spike_clip(&once, &v, theta).unwrap();
        for (&a, &b) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        for ((&c, &vi), &orig) in once.as_slice().iter().zip(v.as_slice()).zip(g.as_slice()) {
            if vi > 0.0 {
                prop_assert!(c * c / vi <= theta * (1.0 + 1e-12));
            }
            prop_assert!(c.abs() <= orig.abs());
        }
    }

    #[test]
    fn adagn_output_norm_follows_the_ema_ratio(grads in prop::collection::vec(scaled_matrix(), 1..30)) {
        let (g1, g2, eps) = (0.7, 0.9, 1e-6);
        let mut st = AdaGnState::default();
        for g in &grads {
            let out = adagn(g, &mut st, g1, g2, eps).unwrap();
            if g.frobenius_norm() > 0.0 {
                let want = st.adaptive_norm(g1, g2, eps);
                prop_assert!((out.frobenius_norm() - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn adaclip_output_never_exceeds_the_threshold(grads in prop::collection::vec(scaled_matrix(), 1..30)) {
        let mut st = AdaClipState::default();
        for g in &grads {
            let (out, frac) = adaclip(g, &mut st, 0.999).unwrap();
            let t_hat = st.corrected_threshold(0.999);
            for &x in out.as_slice() {
                prop_assert!(x.abs() <= t_hat * (1.0 + 1e-12));
            }
            prop_assert!((0.0..=1.0).contains(&frac));
        }
    }

    #[test]
    fn gradclip_bounds_the_global_norm(ls in layers(), threshold in 1e-3f64..1e3) {
        let clipped = grad_clip_global(&ls, threshold);
        prop_assert!(global_norm(&clipped) <= threshold * (1.0 + 1e-12));
        if global_norm(&ls) <= threshold {
            prop_assert_eq!(clipped, ls);
        }
    }

    #[test]
    fn global_norm_matches_the_flattened_norm(ls in layers()) {
        let flat: Vec<f64> = ls.iter().flat_map(|m| m.as_slice().to_vec()).collect();
        let want = flat.iter().map(|x| x * x).sum::<f64>().sqrt();
        let got = global_grad_norm(&ls);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn loss_spike_detector_matches_a_direct_median(
        history in prop::collection::vec(prop_oneof![9 => 0.0f64..10.0, 1 => Just(f64::NAN)], 1..120),
        k in 1.0f64..4.0,
    ) {
        let (last, before) = history.split_last().unwrap();
        let mut window: Vec<f64> = before.iter().rev().copied().filter(|x| x.is_finite()).take(50).collect();
        let want = if window.len() < 50 {
            false
        } else {
            window.sort_by(f64::total_cmp);
            let med = (window[24] + window[25]) / 2.0;
            *last > k * med
        };
        prop_assert_eq!(detect_loss_spike(&history, k), want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn small_quadratic_gradient_means_near_optimum(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = Rng::new(seed);
        let mut prob = QuadraticProblem::random(n, &mut rng);
        let star = prob.optimum();
        let mut opt = OptimizerConfig::named(OptimizerName::Sgd).build().unwrap();
        // step 1/L with L bounded by the Frobenius norm of A
        let lr = 1.0 / prob.a.frobenius_norm();
        let mut grad_norm = f64::INFINITY;
        for _ in 0..200_000 {
            let g = prob.grad_at(&prob.w).unwrap();
            grad_norm = g.frobenius_norm();
            if grad_norm < 1e-8 {
                break;
            }
            let mut p = [prob.w.clone()];
            opt.step(&mut p, &[g], lr).unwrap();
            prob.w = p[0].clone();
        }
        prop_assume!(grad_norm < 1e-8);
        prop_assert!(prob.w.sub(&star).unwrap().frobenius_norm() < 1e-6);
    }
}
