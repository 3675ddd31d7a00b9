mod common;

use common::{method_of_steps, oracle_eval, rk4_unit_delay, ScalarDelay};
use netadapt::dde::Integrator;

#[test]
fn oracle_reproduces_known_segments() {
    let p = method_of_steps(-1.0, 1.0, &[1.0], 3);
    assert!((oracle_eval(&p, 1.0, 1.0)).abs() < 1e-15);
    assert!((oracle_eval(&p, 1.0, 2.0) + 0.5).abs() < 1e-15);
    assert!((oracle_eval(&p, 1.0, 0.5) - 0.5).abs() < 1e-15);
    // x on [2, 3] is -(t-1) + (t-1)^2/2 integrated once more from -1/2
    let x3 = -1.0 / 6.0;
    assert!((oracle_eval(&p, 1.0, 3.0) - x3).abs() < 1e-14);
}

#[test]
fn rk4_matches_oracle_at_unit_delay() {
    let (x1, x2) = rk4_unit_delay(1e-3);
    let p = method_of_steps(-1.0, 1.0, &[1.0], 2);
    assert!((x1 - oracle_eval(&p, 1.0, 1.0)).abs() < 1e-6, "x(1) = {x1}");
    assert!((x2 - oracle_eval(&p, 1.0, 2.0)).abs() < 1e-6, "x(2) = {x2}");
}

#[test]
fn start_kink_is_resolved_exactly() {
    for h in [4e-3, 1e-3, 5e-4] {
        let (x1, x2) = rk4_unit_delay(h);
        assert!(x1.abs() < 1e-13 && (x2 + 0.5).abs() < 1e-13, "h = {h}: {x1:e}, {x2:e}");
    }
}

#[test]
fn nonconstant_initial_function_tracks_oracle() {
    // phi(t) = 1 + t + t^2 on [-0.7, 0], x' = 0.8 x(t - 0.7)
    let (alpha, tau) = (0.8, 0.7);
    let p = method_of_steps(alpha, tau, &[1.0, 1.0, 1.0], 5);
    let rhs = ScalarDelay { alpha, tau };
    let h = 1e-3;
    let mut integ = Integrator::new(&rhs, 0.0, h, tau, |s, x| x[0] = 1.0 + s + s * s).unwrap();
    for k in 1..=3000 {
        integ.step().unwrap();
        let t = k as f64 * h;
        let err = (integ.state()[0] - oracle_eval(&p, tau, t)).abs();
        assert!(err < 1e-6, "t = {t}: err {err}");
    }
}

fn exp_taylor(degree: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for k in 1..=degree {
        c.push(c[k - 1] / k as f64);
    }
    c
}

fn error_at(h: f64, t_end: f64) -> f64 {
    let phi = exp_taylor(25);
    let p = method_of_steps(-1.0, 1.0, &phi, 4);
    let rhs = ScalarDelay { alpha: -1.0, tau: 1.0 };
    let mut integ = Integrator::new(&rhs, 0.0, h, 1.0, |s, x| x[0] = s.exp()).unwrap();
    for _ in 0..(t_end / h).round() as usize {
        integ.step().unwrap();
    }
    (integ.state()[0] - oracle_eval(&p, 1.0, t_end)).abs()
}

#[test]
fn smooth_history_is_fourth_order() {
    for t_end in [1.0, 2.0, 3.0] {
        for h in [4e-2, 2e-2, 1e-2] {
            let ratio = error_at(h, t_end) / error_at(h / 2.0, t_end);
            assert!(ratio > 14.0 && ratio < 17.0, "t = {t_end}, h = {h}: ratio {ratio}");
        }
    }
}
