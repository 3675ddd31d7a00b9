use crate::error::{Error, Result};

use super::history::HistoryBuffer;

/// Delayed states handed to a right-hand side: one slice per declared lag.
#[derive(Debug, Clone, Copy)]
pub struct Lagged<'a> {
    data: &'a [f64],
    width: usize,
}

impl<'a> Lagged<'a> {
    pub fn new(data: &'a [f64], width: usize) -> Self {
        debug_assert!(width == 0 || data.len().is_multiple_of(width));
        Self { data, width }
    }

    pub fn get(&self, lag: usize) -> &'a [f64] {
        &self.data[lag * self.width..(lag + 1) * self.width]
    }

    /// The first `count` lags only.
    pub fn prefix(&self, count: usize) -> Lagged<'a> {
        Lagged::new(&self.data[..count * self.width], self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [f64]> + '_ {
        (0..self.len()).map(move |l| self.get(l))
    }
}

/// A delay differential equation `x'(t) = F(t, x(t), x(t - T_1(t)), ...)`.
///
/// Only the leading `lag_width` components of the state are looked up in the
/// past; augmented states (e.g. adaptive gains) need not be.
pub trait DelayedRhs {
    fn dim(&self) -> usize;

    fn lag_width(&self) -> usize {
        self.dim()
    }

    fn lag_count(&self) -> usize;

    /// Delay `T_l(t) > 0`.
    fn lag(&self, l: usize, t: f64) -> f64;

    /// Lower and upper bounds of `T_l` over all time.
    fn lag_bounds(&self, l: usize) -> (f64, f64);

    fn eval(&self, t: f64, x: &[f64], lagged: Lagged<'_>, dx: &mut [f64]);

    fn min_lag(&self) -> Option<f64> {
        (0..self.lag_count()).map(|l| self.lag_bounds(l).0).reduce(f64::min)
    }

    fn max_lag(&self) -> f64 {
        (0..self.lag_count()).map(|l| self.lag_bounds(l).1).fold(0.0, f64::max)
    }
}

/// Scratch space for repeated RK4 steps.
#[derive(Debug, Clone)]
pub struct Rk4Stepper {
    stages: [Vec<f64>; 4],
    probe: Vec<f64>,
    lagged: Vec<f64>,
}

impl Rk4Stepper {
    pub fn new<R: DelayedRhs + ?Sized>(rhs: &R) -> Self {
        let n = rhs.dim();
        Self {
            stages: std::array::from_fn(|_| vec![0.0; n]),
            probe: vec![0.0; n],
            lagged: vec![0.0; rhs.lag_width() * rhs.lag_count()],
        }
    }

    /// Advances from the newest knot of `buf` (at time `t`) by `h`, writing
    /// the new state into `out`.
    pub fn step<R: DelayedRhs + ?Sized>(
        &mut self,
        rhs: &R,
        buf: &HistoryBuffer,
        t: f64,
        h: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let (t_last, x) = buf
            .last()
            .ok_or_else(|| Error::param("cannot step from an empty history"))?;
        if (t_last - t).abs() > 1e-9 * h.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::param(format!(
                "step starts at t = {t} but the newest knot is at {t_last}"
            )));
        }
        let n = rhs.dim();
        Error::check_dim("rk4 state", n, x.len())?;
        Error::check_dim("rk4 output", n, out.len())?;

        let [k1, k2, k3, k4] = &mut self.stages;
        stage(rhs, buf, &mut self.lagged, t, x, k1)?;

        for i in 0..n {
            self.probe[i] = x[i] + 0.5 * h * k1[i];
        }
        stage(rhs, buf, &mut self.lagged, t + 0.5 * h, &self.probe, k2)?;

        for i in 0..n {
            self.probe[i] = x[i] + 0.5 * h * k2[i];
        }
        stage(rhs, buf, &mut self.lagged, t + 0.5 * h, &self.probe, k3)?;

        for i in 0..n {
            self.probe[i] = x[i] + h * k3[i];
        }
        stage(rhs, buf, &mut self.lagged, t + h, &self.probe, k4)?;

        for i in 0..n {
            out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericBlowup {
                t: t + h,
                state: out.to_vec(),
            });
        }
        Ok(())
    }
}

fn stage<R: DelayedRhs + ?Sized>(
    rhs: &R,
    buf: &HistoryBuffer,
    lagged: &mut [f64],
    t: f64,
    x: &[f64],
    dx: &mut [f64],
) -> Result<()> {
    let width = rhs.lag_width();
    for l in 0..rhs.lag_count() {
        let q = t - rhs.lag(l, t);
        buf.eval_into(q, &mut lagged[l * width..(l + 1) * width])?;
    }
    rhs.eval(t, x, Lagged::new(lagged, width), dx);
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericBlowup { t, state: x.to_vec() });
    }
    Ok(())
}

/// One classical RK4 step from the newest knot of `buf`.
pub fn step_rk4<R: DelayedRhs + ?Sized>(rhs: &R, buf: &HistoryBuffer, t: f64, h: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rhs.dim()];
    Rk4Stepper::new(rhs).step(rhs, buf, t, h, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub h: f64,
    pub horizon: f64,
    pub record_stride: usize,
}

impl SolverConfig {
    pub fn new(h: f64, horizon: f64, record_stride: usize) -> Result<Self> {
        let cfg = Self {
            h,
            horizon,
            record_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::config("sim.h", format!("step must be positive, got {}", self.h)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.h) {
            return Err(Error::config(
                "sim.horizon",
                format!("horizon {} must be finite and at least the step {}", self.horizon, self.h),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::config("sim.record_stride", "must be a positive integer"));
        }
        Ok(())
    }

    /// Number of steps covering the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.h - 1e-9).ceil() as usize
    }

    /// Rejects steps larger than half the smallest delay.
    pub fn check_against<R: DelayedRhs + ?Sized>(&self, rhs: &R) -> Result<()> {
        if let Some(min) = rhs.min_lag() {
            if !(min > 0.0) {
                return Err(Error::config("delays", format!("delays must be positive, got {min}")));
            }
            if self.h > 0.5 * min * (1.0 + 1e-12) {
                return Err(Error::config(
                    "sim.h",
                    format!("step {} exceeds half the smallest delay {}", self.h, min),
                ));
            }
        }
        Ok(())
    }
}

/// Derivative jumps at `sigma` are smoothed by one order per delay crossing;
/// beyond this many crossings they are below the interpolation order.
const BREAKPOINT_LEVELS: usize = 3;

/// `sigma` plus all sums of at most `levels` constant lags.
fn propagated_breakpoints<R: DelayedRhs + ?Sized>(rhs: &R, sigma: f64, levels: usize) -> Vec<f64> {
    let mut lags: Vec<f64> = (0..rhs.lag_count())
        .map(|l| rhs.lag_bounds(l))
        .filter(|(lo, hi)| lo == hi && *lo > 0.0)
        .map(|(lo, _)| lo)
        .collect();
    lags.sort_by(f64::total_cmp);
    lags.dedup();
    let mut points = vec![sigma];
    let mut frontier = vec![sigma];
    for _ in 0..levels {
        frontier = frontier.iter().flat_map(|p| lags.iter().map(move |l| p + l)).collect();
        frontier.sort_by(f64::total_cmp);
        frontier.dedup();
        points.extend(&frontier);
    }
    points
}

/// Fixed-step method-of-steps driver.
///
/// The initial function is sampled on the grid `sigma + j h`, `j <= 0`,
/// back to `sigma - window`; knots older than `t - window - h` are dropped as
/// the integration proceeds.
pub struct Integrator<'r, R: DelayedRhs + ?Sized> {
    rhs: &'r R,
    buf: HistoryBuffer,
    stepper: Rk4Stepper,
    sigma: f64,
    h: f64,
    steps_taken: usize,
    next: Vec<f64>,
}

impl<'r, R: DelayedRhs + ?Sized> Integrator<'r, R> {
    pub fn new(rhs: &'r R, sigma: f64, h: f64, window: f64, phi: impl Fn(f64, &mut [f64])) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param(format!("step must be positive, got {h}")));
        }
        let max_lag = rhs.max_lag();
        if window < max_lag * (1.0 - 1e-12) {
            return Err(Error::param(format!(
                "history window {window} does not cover the largest delay {max_lag}"
            )));
        }
        let n = rhs.dim();
        let back = ((window / h) - 1e-9).ceil().max(0.0) as usize;
        // two knots minimum so that interpolation is defined from the start
        let back = back.max(1);
        let mut buf = HistoryBuffer::new(n, window)?;
        for j in (0..=back).rev() {
            let t = sigma - j as f64 * h;
            let mut x = vec![0.0; n];
            phi(t - sigma, &mut x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("initial function is not finite at offset {}", t - sigma)));
            }
            buf.push(t, x)?;
        }
        for b in propagated_breakpoints(rhs, sigma, BREAKPOINT_LEVELS) {
            buf.add_breakpoint(b);
        }
        Ok(Self {
            rhs,
            stepper: Rk4Stepper::new(rhs),
            buf,
            sigma,
            h,
            steps_taken: 0,
            next: vec![0.0; n],
        })
    }

    pub fn time(&self) -> f64 {
        self.sigma + self.steps_taken as f64 * self.h
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn state(&self) -> &[f64] {
        self.buf.last().map(|(_, x)| x).unwrap_or(&[])
    }

    pub fn history(&self) -> &HistoryBuffer {
        &self.buf
    }

    /// Applies `f` to the newest state in place (used for post-step projections
    /// such as gain clamping).
    pub fn step_with(&mut self, post: impl FnOnce(&mut [f64])) -> Result<()> {
        let t = self.time();
        self.stepper.step(self.rhs, &self.buf, t, self.h, &mut self.next)?;
        post(&mut self.next);
        self.steps_taken += 1;
        let t_new = self.time();
        self.buf.push(t_new, self.next.clone())?;
        self.buf.retain_from(t_new - self.buf.window() - self.h);
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_with(|_| {})
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x'(t) = -x(t - tau)
    struct NegDelayed {
        tau: f64,
    }

    impl DelayedRhs for NegDelayed {
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
            dx[0] = -lagged.get(0)[0];
        }
    }

    struct Decay;

    impl DelayedRhs for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn lag_count(&self) -> usize {
            0
        }
        fn lag(&self, _: usize, _: f64) -> f64 {
            unreachable!()
        }
        fn lag_bounds(&self, _: usize) -> (f64, f64) {
            unreachable!()
        }
        fn eval(&self, _: f64, x: &[f64], _: Lagged<'_>, dx: &mut [f64]) {
            dx[0] = -x[0];
        }
    }

    struct Blowup;

    impl DelayedRhs for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn lag_count(&self) -> usize {
            0
        }
        fn lag(&self, _: usize, _: f64) -> f64 {
            unreachable!()
        }
        fn lag_bounds(&self, _: usize) -> (f64, f64) {
            unreachable!()
        }
        fn eval(&self, _: f64, _: &[f64], _: Lagged<'_>, dx: &mut [f64]) {
            dx[0] = f64::NAN;
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let rhs = NegDelayed { tau: 1.0 };
        let buf = HistoryBuffer::from_knots(1, 1.0, (0..=1000).map(|i| (-1.0 + i as f64 * 1e-3, vec![0.0]))).unwrap();
        let x = step_rk4(&rhs, &buf, 0.0, 1e-3).unwrap();
        assert_eq!(x, vec![0.0]);
    }

    #[test]
    fn delay_free_decay_matches_exponential() {
        let h = 1e-3;
        let mut int = Integrator::new(&Decay, 0.0, h, 0.0, |_, x| x[0] = 1.0).unwrap();
        for _ in 0..1000 {
            int.step().unwrap();
        }
        assert!((int.time() - 1.0).abs() < 1e-12);
        assert!((int.state()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn non_finite_rhs_reports_blowup() {
        let buf = HistoryBuffer::from_knots(1, 0.0, [(0.0, vec![1.0])]).unwrap();
        match step_rk4(&Blowup, &buf, 0.0, 0.1) {
            Err(Error::NumericBlowup { t, state }) => {
                assert_eq!(t, 0.0);
                assert_eq!(state, vec![1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_larger_than_half_delay_rejected() {
        let rhs = NegDelayed { tau: 1.0 };
        assert!(SolverConfig::new(0.5, 2.0, 1).unwrap().check_against(&rhs).is_ok());
        assert!(SolverConfig::new(0.6, 2.0, 1).unwrap().check_against(&rhs).is_err());
        assert!(SolverConfig::new(0.0, 2.0, 1).is_err());
        assert!(SolverConfig::new(0.1, 0.05, 1).is_err());
        assert!(SolverConfig::new(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn buffer_retention_is_bounded() {
        let rhs = NegDelayed { tau: 1.0 };
        let h = 0.01;
        let mut int = Integrator::new(&rhs, 0.0, h, 1.0, |_, x| x[0] = 1.0).unwrap();
        for _ in 0..1000 {
            int.step().unwrap();
        }
        let (start, end) = int.history().span().unwrap();
        assert!((end - 10.0).abs() < 1e-9);
        assert!(start >= end - 1.0 - h - 1e-9);
        assert!(start <= end - 1.0);
        assert!(int.history().len() <= 103);
    }
}
