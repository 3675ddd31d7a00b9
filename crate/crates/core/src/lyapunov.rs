//! Lyapunov functionals evaluated along simulated trajectories.
//!
//! `V_s = sum_i v_i (|x_i(t)| + a/(1-d) sum_l int_{t-T_l(t)}^t sum_j |x_j|)`
//! is the Krasovskii-type functional for column-dominant loops, and
//! `V_m = max_i |x_i| / w_i` the Razumikhin function for row-dominant ones.

use serde::{Deserialize, Serialize};

use crate::control::Controller;
use crate::dde::{simulate_with, HistoryBuffer, InitialFunction, SolverConfig};
use crate::error::{Error, Result};
use crate::systems::{DelaySpec, DelayedNetwork};
use crate::trajectory::{ConvergenceCriterion, Trajectory};

#[derive(Debug, Clone)]
pub struct FunctionalConfig {
    pub weights: Vec<f64>,
    pub a: f64,
    pub d: f64,
    pub delays: Vec<DelaySpec>,
    /// Use every `quadrature_stride`-th buffer knot inside each window.
    pub quadrature_stride: usize,
}

impl FunctionalConfig {
    pub fn new(weights: Vec<f64>, a: f64, d: f64, delays: Vec<DelaySpec>) -> Result<Self> {
        let cfg = Self {
            weights,
            a,
            d,
            delays,
            quadrature_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::param("functional weights must be positive"));
        }
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(Error::param(format!("a must be nonnegative, got {}", self.a)));
        }
        if !(0.0..1.0).contains(&self.d) {
            return Err(Error::param(format!("d must lie in [0, 1), got {}", self.d)));
        }
        if self.quadrature_stride == 0 {
            return Err(Error::param("quadrature stride must be positive"));
        }
        Ok(())
    }
}

fn abs_sum(x: &[f64], n: usize) -> f64 {
    x[..n].iter().map(|v| v.abs()).sum()
}

/// `int_{lo}^{hi} sum_j |x_j|` by the trapezoid rule on the buffer knots,
/// with interpolated end values.
fn window_integral(buf: &HistoryBuffer, lo: f64, hi: f64, n: usize, stride: usize) -> Result<f64> {
    let mut nodes = vec![(lo, abs_sum(&buf.eval(lo)?, n))];
    nodes.extend(
        buf.knots()
            .filter(|(s, _)| *s > lo && *s < hi)
            .step_by(stride)
            .map(|(s, x)| (s, abs_sum(x, n))),
    );
    nodes.push((hi, abs_sum(&buf.eval(hi)?, n)));
    Ok(nodes.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

/// `V_s` at time `t` from a buffer spanning `[t - max_l T_l(t), t]`.
///
/// Only the leading `weights.len()` components of the buffer are used, so an
/// augmented closed-loop history can be passed directly.
pub fn eval_vs(buf: &HistoryBuffer, t: f64, cfg: &FunctionalConfig) -> Result<f64> {
    cfg.validate()?;
    let n = cfg.weights.len();
    if buf.dim() < n {
        return Err(Error::Dimension {
            what: "history for V_s",
            expected: n,
            got: buf.dim(),
        });
    }
    let x = buf.eval(t)?;
    let pointwise: f64 = cfg.weights.iter().zip(&x).map(|(v, xi)| v * xi.abs()).sum();
    let mut integral = 0.0;
    for delay in &cfg.delays {
        integral += window_integral(buf, t - delay.value(t), t, n, cfg.quadrature_stride)?;
    }
    let vsum: f64 = cfg.weights.iter().sum();
    Ok(pointwise + vsum * cfg.a / (1.0 - cfg.d) * integral)
}

/// `V_m = max_i |x_i| / w_i`.
pub fn eval_vm(x: &[f64], w: &[f64]) -> Result<f64> {
    Error::check_dim("V_m weights", x.len(), w.len())?;
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::param("V_m weights must be positive"));
    }
    Ok(x.iter().zip(w).map(|(xi, wi)| xi.abs() / wi).fold(0.0, f64::max))
}

/// Forward-difference estimates `(t_k, (V_{k+1} - V_k)/(t_{k+1} - t_k))`.
pub fn dini_series(times: &[f64], values: &[f64]) -> Result<Vec<(f64, f64)>> {
    Error::check_dim("Dini series values", times.len(), values.len())?;
    if times.len() < 2 {
        return Err(Error::param("Dini series needs at least two samples"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("Dini series times must be strictly increasing"));
    }
    Ok(times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (t[0], (v[1] - v[0]) / (t[1] - t[0])))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecreaseReport {
    /// First recorded time with `min_i k_i > gate`; `None` if never reached.
    pub t_star: Option<f64>,
    /// Share of checked steps after `t_star` with `D+ V_s <= tol`.
    pub fraction: Option<f64>,
    /// Largest excess `D+ V_s - tol` over checked steps (0 if none).
    pub worst_violation: f64,
    pub tol: f64,
}

impl DecreaseReport {
    pub fn gate_reached(&self) -> bool {
        self.t_star.is_some()
    }
}

/// Checks that the recorded `V_s` series decreases once every gain exceeds
/// `gate`. Steps adjacent to a sign change of some `x_i` are skipped.
pub fn monitor_decrease(traj: &Trajectory, gate: f64) -> Result<DecreaseReport> {
    let vs = traj
        .lyapunov_vs
        .as_ref()
        .ok_or_else(|| Error::param("trajectory has no recorded V_s series"))?;
    Error::check_dim("V_s series", traj.len(), vs.len())?;
    let Some(start) = traj
        .gains
        .iter()
        .position(|k| k.iter().copied().fold(f64::INFINITY, f64::min) > gate)
    else {
        return Ok(DecreaseReport {
            t_star: None,
            fraction: None,
            worst_violation: 0.0,
            tol: 0.0,
        });
    };
    let t_star = traj.times[start];
    let tol = 1e-9 * vs[start] + 1e-12;
    if traj.len() - start < 2 {
        return Ok(DecreaseReport {
            t_star: Some(t_star),
            fraction: None,
            worst_violation: 0.0,
            tol,
        });
    }
    let dini = dini_series(&traj.times[start..], &vs[start..])?;
    let crossing: Vec<bool> = traj.states[start..]
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).any(|(a, b)| a * b < 0.0))
        .collect();
    let blacked_out = |k: usize| {
        crossing[k] || (k > 0 && crossing[k - 1]) || crossing.get(k + 1).copied().unwrap_or(false)
    };
    let (mut checked, mut good, mut worst) = (0usize, 0usize, 0.0f64);
    for (k, &(_, d)) in dini.iter().enumerate() {
        if blacked_out(k) {
            continue;
        }
        checked += 1;
        if d <= tol {
            good += 1;
        } else {
            worst = worst.max(d - tol);
        }
    }
    Ok(DecreaseReport {
        t_star: Some(t_star),
        fraction: (checked > 0).then(|| good as f64 / checked as f64),
        worst_violation: worst,
        tol,
    })
}

/// Simulates and records `V_s` (and `V_m` when `vm_weights` is given) at
/// every recorded sample.
pub fn simulate_monitored(
    network: &DelayedNetwork,
    controller: &Controller,
    phi: &InitialFunction,
    sim: &SolverConfig,
    functional: &FunctionalConfig,
    vm_weights: Option<&[f64]>,
) -> Result<Trajectory> {
    functional.validate()?;
    Error::check_dim("V_s weights", network.n(), functional.weights.len())?;
    let mut vs = Vec::new();
    let mut failure = None;
    let mut traj = simulate_with(network, controller, phi, sim, ConvergenceCriterion::default(), |t, buf| {
        match eval_vs(buf, t, functional) {
            Ok(v) => vs.push(v),
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(w) = vm_weights {
        traj.lyapunov_vm = Some(traj.states.iter().map(|x| eval_vm(x, w)).collect::<Result<_>>()?);
    }
    traj.lyapunov_vs = Some(vs);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buffer(h: f64, f: impl Fn(f64) -> f64) -> HistoryBuffer {
        let k = (1.0 / h).round() as usize;
        HistoryBuffer::from_knots(1, 1.0, (0..=k).map(|j| (j as f64 * h, vec![f(j as f64 * h)]))).unwrap()
    }

    fn cfg(a: f64) -> FunctionalConfig {
        FunctionalConfig::new(vec![1.0], a, 0.0, vec![DelaySpec::constant(1.0).unwrap()]).unwrap()
    }

    #[test]
    fn vs_examples() {
        assert_eq!(eval_vs(&buffer(0.1, |_| 0.0), 1.0, &cfg(1.0)).unwrap(), 0.0);
        assert!((eval_vs(&buffer(0.1, |_| 1.0), 1.0, &cfg(1.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((eval_vs(&buffer(0.01, |s| s), 1.0, &cfg(2.0)).unwrap() - 2.0).abs() < 1e-10);
        assert!(eval_vs(&buffer(0.1, |_| 1.0), 1.5, &cfg(1.0)).is_err());
    }

    #[test]
    fn vs_quadrature_is_second_order() {
        let f = |s: f64| (3.0 * s).sin() + 2.0;
        let exact = 2.0 + 3.0f64.sin() + (2.0 + (1.0 - 3.0f64.cos()) / 3.0);
        let e1 = (eval_vs(&buffer(0.02, f), 1.0, &cfg(1.0)).unwrap() - exact).abs();
        let e2 = (eval_vs(&buffer(0.01, f), 1.0, &cfg(1.0)).unwrap() - exact).abs();
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn vm_examples() {
        assert_eq!(eval_vm(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(eval_vm(&[1.0, -2.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(eval_vm(&[3.0, -2.0], &[3.0, 1.0]).unwrap(), 2.0);
        assert!(eval_vm(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn dini_examples() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 1e-3).collect();
        assert!(dini_series(&t, &vec![5.0; 100]).unwrap().iter().all(|p| p.1 == 0.0));
        let lin: Vec<f64> = t.iter().map(|s| -2.0 * s).collect();
        assert!(dini_series(&t, &lin).unwrap().iter().all(|p| (p.1 + 2.0).abs() < 1e-9));
        let e: Vec<f64> = t.iter().map(|s| (-s).exp()).collect();
        for (s, d) in dini_series(&t, &e).unwrap() {
            assert!((d + (-s).exp()).abs() / (-s).exp() < 1e-3);
        }
        assert!(dini_series(&[0.0], &[1.0]).is_err());
        assert!(dini_series(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    fn synthetic(values: Vec<f64>) -> Trajectory {
        let len = values.len();
        let mut t = Trajectory::new(
            (0..len).map(|k| k as f64).collect(),
            values.iter().map(|v| vec![*v]).collect(),
            vec![vec![5.0]; len],
            ConvergenceCriterion::default(),
        );
        t.lyapunov_vs = Some(values);
        t
    }

    #[test]
    fn monitor_examples() {
        let decaying = synthetic((0..50).map(|k| (-(k as f64) / 10.0).exp()).collect());
        assert_eq!(monitor_decrease(&decaying, 1.0).unwrap().fraction, Some(1.0));
        let zero = synthetic(vec![0.0; 50]);
        assert_eq!(monitor_decrease(&zero, 1.0).unwrap().fraction, Some(1.0));
        let rising = synthetic((0..50).map(|k| k as f64).collect());
        let rep = monitor_decrease(&rising, 1.0).unwrap();
        assert_eq!(rep.fraction, Some(0.0));
        assert!(rep.worst_violation > 0.9);
        let gated = monitor_decrease(&rising, 10.0).unwrap();
        assert!(!gated.gate_reached() && gated.fraction.is_none());
    }
}
