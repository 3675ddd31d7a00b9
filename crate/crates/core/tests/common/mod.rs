#![allow(dead_code)]

use netadapt::dde::{DelayedRhs, Integrator, Lagged};

/// Polynomial with coefficients in ascending powers of `(t - origin)`.
#[derive(Debug, Clone)]
pub struct Piece {
    pub origin: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn eval(&self, t: f64) -> f64 {
        let s = t - self.origin;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

/// Exact piecewise-polynomial solution of `x'(t) = alpha x(t - tau)` with a
/// polynomial initial function, built by the method of steps. Segment `k`
/// covers `[(k - 1) tau, k tau]`; segment 0 is the initial function.
pub fn method_of_steps(alpha: f64, tau: f64, phi: &[f64], segments: usize) -> Vec<Piece> {
    // phi is given in powers of (t - 0) on [-tau, 0]
    let mut pieces = vec![Piece {
        origin: -tau,
        coeffs: shift(phi, -tau),
    }];
    for k in 1..=segments {
        let prev = &pieces[k - 1];
        let start = (k as f64 - 1.0) * tau;
        let x0 = pieces[k - 1].eval(start);
        // integrand alpha * prev(s - tau) in powers of (s - start) equals
        // alpha * prev in powers of (u - prev.origin) since start - tau = prev.origin
        let mut coeffs = vec![x0];
        coeffs.extend(prev.coeffs.iter().enumerate().map(|(p, c)| alpha * c / (p as f64 + 1.0)));
        pieces.push(Piece { origin: start, coeffs });
    }
    pieces
}

/// Re-expands a polynomial in powers of `t` into powers of `t - a`.
fn shift(p: &[f64], a: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for (k, c) in p.iter().enumerate() {
        // c t^k = c (s + a)^k
        let mut binom = 1.0;
        for (j, o) in out.iter_mut().enumerate().take(k + 1) {
            *o += c * binom * a.powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j as f64 + 1.0);
        }
    }
    out
}

pub fn oracle_eval(pieces: &[Piece], tau: f64, t: f64) -> f64 {
    let k = if t <= 0.0 { 0 } else { ((t / tau) - 1e-12).ceil() as usize };
    pieces[k.min(pieces.len() - 1)].eval(t)
}

/// `x'(t) = alpha x(t - tau)`.
pub struct ScalarDelay {
    pub alpha: f64,
    pub tau: f64,
}

impl DelayedRhs for ScalarDelay {
    fn dim(&self) -> usize {
        1
    }
    fn lag_count(&self) -> usize {
        1
    }
    fn lag(&self, _: usize, _: f64) -> f64 {
        self.tau
    }
    fn lag_bounds(&self, _: usize) -> (f64, f64) {
        (self.tau, self.tau)
    }
    fn eval(&self, _: f64, _: &[f64], lagged: Lagged<'_>, dx: &mut [f64]) {
        dx[0] = self.alpha * lagged.get(0)[0];
    }
}

/// Integrates `x' = -x(t - 1)` with `phi = 1` and returns `(x(1), x(2))`.
pub fn rk4_unit_delay(h: f64) -> (f64, f64) {
    let rhs = ScalarDelay { alpha: -1.0, tau: 1.0 };
    let mut integ = Integrator::new(&rhs, 0.0, h, 1.0, |_, x| x[0] = 1.0).unwrap();
    let steps = (1.0 / h).round() as usize;
    for _ in 0..steps {
        integ.step().unwrap();
    }
    let x1 = integ.state()[0];
    for _ in 0..steps {
        integ.step().unwrap();
    }
    (x1, integ.state()[0])
}
