use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use netadapt::certificates::{check_input_matrix, ConstantField, Interval, SampleDomain};
use netadapt::control::{Controller, GainState};
use netadapt::dde::{simulate, HistoryBuffer, InitialFunction, SolverConfig};
use netadapt::lyapunov::{eval_vm, eval_vs, FunctionalConfig};
use netadapt::systems::{check_box_invariance, generate_scale_free, sis_network, DelaySpec};

fn small_sis(seed: u64, kappa: f64, k0: f64, b: f64, t_k: f64, phi: Vec<f64>, horizon: f64) -> netadapt::trajectory::Trajectory {
    let n = phi.len();
    let graph = Arc::new(generate_scale_free(n, 2, seed, kappa).unwrap());
    let net = sis_network(graph, 2.0).unwrap();
    let ctrl = Controller::Adaptive {
        gains: GainState::uniform(n, 0.1, b, t_k, k0).unwrap(),
        k_max: None,
        allow_long_measurement_delay: true,
    };
    simulate(&net, &ctrl, &InitialFunction::Constant(phi), &SolverConfig::new(0.05, horizon, 3).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adaptive_gains_are_monotone_and_rate_capped(
        seed in 0u64..1000,
        kappa in 0.05f64..1.0,
        k0 in 0.0f64..3.0,
        b in 0.0f64..2.0,
        t_k in 0.0f64..4.0,
        phi in proptest::collection::vec(0.0f64..1.0, 6),
    ) {
        let traj = small_sis(seed, kappa, k0, b, t_k, phi, 30.0);
        prop_assert!(traj.first_gain_decrease(1e-12).is_none());
        prop_assert!(traj.first_rate_violation(&[0.1; 6], 1e-9).is_none());
        prop_assert!(check_box_invariance(&traj).holds);
    }

    #[test]
    fn vm_is_absolutely_homogeneous(
        x in proptest::collection::vec(-10.0f64..10.0, 1..8),
        alpha in -5.0f64..5.0,
    ) {
        let w: Vec<f64> = (0..x.len()).map(|i| 1.0 + i as f64).collect();
        let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let lhs = eval_vm(&scaled, &w).unwrap();
        let rhs = alpha.abs() * eval_vm(&x, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn vs_scales_linearly_with_history(alpha in 0.0f64..10.0, freq in 0.1f64..3.0) {
        let knots = |s: f64| (0..=100).map(move |j| {
            let t = j as f64 * 0.01;
            (t, vec![s * (freq * t).sin(), s * (freq * t).cos()])
        });
        let cfg = FunctionalConfig::new(vec![1.0, 2.0], 0.7, 0.2, vec![DelaySpec::constant(1.0).unwrap()]).unwrap();
        let base = eval_vs(&HistoryBuffer::from_knots(2, 1.0, knots(1.0)).unwrap(), 1.0, &cfg).unwrap();
        let scaled = eval_vs(&HistoryBuffer::from_knots(2, 1.0, knots(alpha)).unwrap(), 1.0, &cfg).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((scaled - alpha * base).abs() <= 1e-12 * base.max(1.0) * alpha.max(1.0));
    }

    #[test]
    fn history_reproduces_quadratics(c in proptest::collection::vec(-3.0f64..3.0, 3), q in 0.0f64..1.0) {
        let f = |t: f64| c[0] + c[1] * t + c[2] * t * t;
        let buf = HistoryBuffer::from_knots(1, 1.0, (0..=20).map(|j| (j as f64 * 0.05, vec![f(j as f64 * 0.05)]))).unwrap();
        prop_assert!((buf.eval(q).unwrap()[0] - f(q)).abs() < 1e-12);
    }

    #[test]
    fn dominance_verdict_is_scale_invariant(
        entries in proptest::collection::vec(-2.0f64..2.0, 9),
        v in proptest::collection::vec(0.5f64..3.0, 3),
        scale in 0.1f64..100.0,
    ) {
        let m = DMatrix::from_row_slice(3, 3, &entries);
        let field = ConstantField { matrix: m, r: 1 };
        let dom = SampleDomain::cube(3, Interval::new(0.0, 1.0), 4, 0);
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let a = check_input_matrix(&field, &dom, &v).unwrap();
        let b = check_input_matrix(&field, &dom, &scaled).unwrap();
        prop_assert_eq!(a.passed(), b.passed());
        prop_assert!((a.c_star - b.c_star).abs() < 1e-9);
    }
}

#[test]
fn zero_initial_function_stays_at_origin() {
    let traj = small_sis(4, 0.5, 2.0, 1.0, 1.0, vec![0.0; 6], 20.0);
    assert!(traj.states.iter().all(|x| x.iter().all(|v| *v == 0.0)));
    assert!(traj.gains.iter().all(|k| k.iter().all(|v| *v == 2.0)));
    assert!(traj.summary.converged_all);
}

#[test]
fn repeated_simulation_is_bitwise_identical() {
    let a = small_sis(9, 0.8, 1.0, 0.5, 3.0, vec![0.3, 0.9, 0.1, 0.5, 0.7, 0.2], 40.0);
    let b = small_sis(9, 0.8, 1.0, 0.5, 3.0, vec![0.3, 0.9, 0.1, 0.5, 0.7, 0.2], 40.0);
    assert_eq!(a, b);
}
