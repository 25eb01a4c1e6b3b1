mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use ufw::io::{Instance, TraceFile, TraceFooter};
use ufw::linalg::{dot, norm2};
use ufw::region::{DecomposedRegion, L1Ball, VertexKey};
use ufw::rng::SplitMix64;
use ufw::solver::{ufw_solve_observed, ActiveVertexSet};
use ufw::synth::{gen_matrix_instance, gen_trend_instance, MatrixGenSpec, TrendGenSpec};
use ufw::{
    apply_d, estimate_step_eta, lmo_nucnorm, uafw_solve, ufw_solve, GenNucNormRegion, IterationRecord,
    LeastSquaresObjective, SmoothObjective, StepKind, StepRule, TrendFilterRegion, UfwConfig,
};

use common::*;

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn trend_region() -> impl Strategy<Value = (TrendFilterRegion, u64)> {
    (3usize..40, 1usize..4, 0.1f64..5.0, any::<u64>()).prop_filter_map("r < n", |(n, r, delta, seed)| {
        (r < n).then(|| (TrendFilterRegion::new(n, r, delta).unwrap(), seed))
    })
}

fn nuclear_region() -> impl Strategy<Value = (GenNucNormRegion, DMatrix<f64>, DMatrix<f64>, u64)> {
    (2usize..12, 2usize..12, 0.1f64..3.0, 0usize..3, any::<u64>()).prop_map(|(m, n, delta, kind, seed)| {
        let mut g = SplitMix64::new(seed);
        let mut orth = |rows: usize, cols: usize| DMatrix::from_vec(rows, cols, g.normal_vec(rows * cols)).qr().q();
        match kind {
            0 => (
                GenNucNormRegion::identity(m, n, delta).unwrap(),
                DMatrix::identity(m, m),
                DMatrix::identity(n, n),
                seed,
            ),
            1 => {
                let p1 = orth(m, 1);
                let p = DMatrix::identity(m, m) - &p1 * p1.transpose();
                let region = GenNucNormRegion::with_column_side_information(p1, n, delta).unwrap();
                (region, p, DMatrix::identity(n, n), seed)
            }
            _ => {
                // A general rectangular P exercises the pseudo-inverse path.
                let k = 1 + (seed % m as u64) as usize;
                let p = DMatrix::from_vec(k, m, g.normal_vec(k * m));
                let q = DMatrix::identity(n, n);
                let region = GenNucNormRegion::new(p.clone(), q.clone(), delta).unwrap();
                (region, p, q, seed)
            }
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trend_projections_are_complementary_and_idempotent((region, seed) in trend_region()) {
        let n = region.ambient_dim();
        let x = SplitMix64::new(seed).normal_vec(n);
        let t = region.project_t(&x).unwrap();
        let p = region.project_tperp(&x).unwrap();
        let scale = 1e-10 * (1.0 + norm2(&x));
        let sum: Vec<f64> = t.iter().zip(&p).map(|(a, b)| a + b).collect();
        prop_assert!(close(&sum, &x, scale));
        prop_assert!(close(&region.project_t(&t).unwrap(), &t, scale));
        prop_assert!(close(&region.project_tperp(&p).unwrap(), &p, scale));
        prop_assert!(dot(&t, &p).abs() <= scale * (1.0 + norm2(&x)));
        // T is the kernel of the difference operator.
        let dt = apply_d(region.order(), &t).unwrap();
        prop_assert!(norm2(&dt) <= 1e-8 * (1.0 + norm2(&x)));
    }

    #[test]
    fn trend_lmo_is_optimal_and_on_the_boundary((region, seed) in trend_region()) {
        let n = region.ambient_dim();
        let r = region.order();
        let delta = region.delta();
        let c = SplitMix64::new(seed ^ 1).normal_vec(n);
        let s = region.lmo(&c).unwrap();
        let ds = apply_d(r, &s.point).unwrap();
        let l1: f64 = ds.iter().map(|v| v.abs()).sum();
        prop_assert!((l1 - delta).abs() <= 1e-8 * delta);
        prop_assert!(norm2(&region.project_t(&s.point).unwrap()) <= 1e-9 * (1.0 + norm2(&s.point)));
        if n - r <= 20 {
            let val = dot(&c, &s.point);
            for v in trend_vertices_dense(n, r, delta) {
                prop_assert!(val <= c.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() + 1e-9 * (1.0 + norm2(&c)));
            }
        }
    }

    #[test]
    fn nuclear_projection_matches_dense_formula((region, p, q, seed) in nuclear_region()) {
        let (m, n) = region.shape();
        let x = SplitMix64::new(seed ^ 2).normal_vec(m * n);
        let xm = DMatrix::from_column_slice(m, n, &x);
        let want = pinv_dense(&p) * &p * &xm * &q * pinv_dense(&q);
        let got = region.project_tperp(&x).unwrap();
        prop_assert!(close(&got, want.as_slice(), 1e-8 * (1.0 + xm.amax())));
        let again = region.project_tperp(&got).unwrap();
        prop_assert!(close(&again, &got, 1e-8 * (1.0 + xm.amax())));
        let t = region.project_t(&x).unwrap();
        let phi_t = region.apply_phi(&t).unwrap();
        prop_assert!(phi_t.amax() <= 1e-8 * (1.0 + xm.amax()) * (1.0 + p.amax()));
    }

    #[test]
    fn nuclear_lmo_beats_random_feasible_points((region, p, q, seed) in nuclear_region()) {
        let (m, n) = region.shape();
        let mut g = SplitMix64::new(seed ^ 3);
        let c = DMatrix::from_vec(m, n, g.normal_vec(m * n));
        let x = lmo_nucnorm(&region, &c).unwrap();
        let delta = region.delta();
        prop_assert!(nuclear_norm_dense(&(&p * &x * &q)) <= delta * (1.0 + 1e-8));
        let best = c.dot(&x);
        for _ in 0..10 {
            let y = DMatrix::from_vec(m, n, g.normal_vec(m * n));
            let y = DMatrix::from_column_slice(m, n, &region.project_tperp(y.as_slice()).unwrap());
            let norm = nuclear_norm_dense(&(&p * &y * &q));
            if norm > 1e-12 {
                let z = y * (delta / norm);
                prop_assert!(best <= c.dot(&z) + 1e-8 * (1.0 + c.amax()));
            }
        }
    }

    #[test]
    fn active_set_weights_stay_a_convex_combination(steps in prop::collection::vec((any::<bool>(), 0usize..12, 0.0f64..1.0), 1..60)) {
        let ball = L1Ball::new(6, 1.5).unwrap();
        let verts = ball.vertices();
        let mut set = ActiveVertexSet::singleton(verts[0].clone());
        let mut x = verts[0].point.clone();
        // Away steps scale every weight by 1 + α, and with it any rounding
        // already present.
        let mut amplification = 1.0;
        for (fw, idx, frac) in steps {
            if fw || set.len() == 1 {
                let s = &verts[idx];
                for (xi, si) in x.iter_mut().zip(&s.point) {
                    *xi = (1.0 - frac) * *xi + frac * si;
                }
                set.apply_fw_step(s, frac);
            } else {
                let keys: Vec<VertexKey> = set.keys().cloned().collect();
                let key = keys[idx % keys.len()].clone();
                let lambda = set.weight(&key).unwrap();
                let alpha_max = lambda / (1.0 - lambda);
                let alpha = frac * alpha_max;
                let point = verts.iter().find(|v| v.key == key).unwrap().point.clone();
                for (xi, vi) in x.iter_mut().zip(&point) {
                    *xi = (1.0 + alpha) * *xi - alpha * vi;
                }
                set.apply_away_step(&key, alpha, alpha_max);
                amplification *= 1.0 + alpha;
            }
            prop_assert!((set.weight_sum() - 1.0).abs() <= 1e-12);
            for k in set.keys() {
                prop_assert!(set.weight(k).unwrap() >= 0.0);
            }
            prop_assert!(close(&set.reconstruct(6), &x, 1e-11 * amplification));
        }
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>(), away in any::<bool>()) {
        let inst = gen_trend_instance(&TrendGenSpec::new(30, 20, 1 + (seed % 2) as usize, 2.0, seed)).unwrap();
        let f = inst.objective().unwrap();
        let region = inst.region().unwrap();
        let cfg = UfwConfig::new(estimate_step_eta(&f).unwrap()).with_max_iters(300).with_tolerances(0.0, 0.0);
        let x0 = region.default_start();
        let run = || if away { uafw_solve(&f, &region, &x0, &cfg) } else { ufw_solve(&f, &region, &x0, &cfg) }.unwrap();
        let (a, b) = (run(), run());
        prop_assert_eq!(trace_digest(&a.trace), trace_digest(&b.trace));
        prop_assert_eq!(a.x_final, b.x_final);
    }

    #[test]
    fn gaps_are_nonnegative_along_a_solve(seed in any::<u64>(), rule in prop::sample::select(vec![StepRule::Simple, StepRule::LineSearch])) {
        let mut g = SplitMix64::new(seed);
        let (rows, n) = (25, 15);
        let a = DMatrix::from_vec(rows, n, g.normal_vec(rows * n));
        let b = DVector::from_vec(g.normal_vec(rows));
        let f = LeastSquaresObjective::new(a, b).unwrap();
        let region = TrendFilterRegion::new(n, 2, 0.7).unwrap();
        let cfg = UfwConfig::new(estimate_step_eta(&f).unwrap()).with_step_rule(rule).with_max_iters(200).with_tolerances(0.0, 0.0);
        let x0 = region.default_start();
        let f0 = f.value(&x0);
        let mut ok = true;
        ufw_solve_observed(&f, &region, &x0, &cfg, |v| {
            let scale = 1e-9 * (1.0 + v.f_y.abs());
            ok &= v.g_k >= -scale && v.h_k >= 0.0;
            if rule == StepRule::Simple {
                ok &= v.f_x <= f0 + 1e-10 * (1.0 + f0.abs());
            }
        })
        .unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn best_f_column_is_monotone(seed in any::<u64>(), rule in prop::sample::select(vec![StepRule::Simple, StepRule::LineSearch])) {
        let mut g = SplitMix64::new(seed);
        let (rows, n) = (20, 12);
        let a = DMatrix::from_vec(rows, n, g.normal_vec(rows * n));
        let b = DVector::from_vec(g.normal_vec(rows));
        let f = LeastSquaresObjective::new(a, b).unwrap();
        let region = TrendFilterRegion::new(n, 1, 0.5).unwrap();
        let cfg = UfwConfig::new(estimate_step_eta(&f).unwrap()).with_step_rule(rule).with_max_iters(150);
        let res = ufw_solve(&f, &region, &region.default_start(), &cfg).unwrap();
        let trace = TraceFile {
            rows: res.trace.clone(),
            footer: TraceFooter {
                config: serde_json::Value::Null,
                seed: None,
                termination_reason: res.termination_reason.to_string(),
                wall_ms: 0.0,
            },
        };
        let best = trace.best_f();
        prop_assert!(best.windows(2).all(|w| w[1] <= w[0]));
        let min = res.trace.iter().map(|r| r.f_val).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(res.best_f, min);
        prop_assert_eq!(*best.last().unwrap(), min);
        if rule == StepRule::LineSearch {
            let slack = 1e-12 * (1.0 + res.trace[0].f_val.abs());
            prop_assert!(res.trace.windows(2).all(|w| w[1].f_val <= w[0].f_val + slack));
        }
    }

    #[test]
    fn trace_csv_round_trips_exactly(values in prop::collection::vec((-1e300f64..1e300, 0.0f64..1e10, 0.0f64..1e10, 0.0f64..=1.0, 0usize..4, 0usize..50), 1..40)) {
        let kinds = [StepKind::FW, StepKind::Away, StepKind::Drop, StepKind::GradientOnly];
        let rows: Vec<IterationRecord> = values
            .iter()
            .enumerate()
            .map(|(k, &(f_val, g_k, h_k, alpha, kind, active_size))| IterationRecord {
                k,
                f_val,
                g_k,
                h_k,
                step_kind: kinds[kind],
                alpha,
                active_size,
            })
            .collect();
        let file = TraceFile {
            rows,
            footer: TraceFooter {
                config: serde_json::json!({"eta": 0.5}),
                seed: Some(7),
                termination_reason: "MaxIters".into(),
                wall_ms: 1.25,
            },
        };
        let back = TraceFile::from_csv(&file.to_csv()).unwrap();
        prop_assert_eq!(trace_digest(&back.rows), trace_digest(&file.rows));
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(&TraceFile::from_json(&file.to_json().unwrap()).unwrap(), &file);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn instance_files_round_trip_byte_for_byte(seed in any::<u64>(), matrix in any::<bool>()) {
        let inst = if matrix {
            Instance::Matrix(gen_matrix_instance(&MatrixGenSpec {
                m: 8, n: 7, r: 2, r1: 1, snr: 3.0, nnzr: 0.4, delta_rel: 0.5, seed,
            }).unwrap())
        } else {
            Instance::Trend(gen_trend_instance(&TrendGenSpec::new(12, 9, 2, f64::INFINITY, seed)).unwrap())
        };
        let text = inst.to_json_string().unwrap();
        let back = Instance::from_json_str(&text).unwrap();
        prop_assert_eq!(back.to_json_string().unwrap(), text);
        prop_assert_eq!(back.content_hash().unwrap(), inst.content_hash().unwrap());
    }
}
