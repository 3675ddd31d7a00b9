use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Relative slack accepted on span checks, so that lookups computed as
/// `t - T` with rounding error still land inside the buffer.
const SPAN_SLACK: f64 = 1e-12;
/// Relative distance within which a knot is identified with a breakpoint.
const BREAKPOINT_TOL: f64 = 1e-9;

/// Time-stamped state samples over a sliding window.
///
/// Between knots the state is reconstructed with a cubic Hermite interpolant
/// whose knot slopes come from three-point finite differences (one-sided at
/// the buffer edges). At a knot the stored state is returned verbatim.
/// Knots registered as breakpoints (where the derivative may jump) get
/// separate one-sided slopes on either side, and no difference stencil
/// straddles them.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    dim: usize,
    window: f64,
    times: VecDeque<f64>,
    states: VecDeque<Vec<f64>>,
    breakpoints: Vec<f64>,
}

impl HistoryBuffer {
    pub fn new(dim: usize, window: f64) -> Result<Self> {
        if !(window.is_finite() && window >= 0.0) {
            return Err(Error::param(format!("history window must be finite and >= 0, got {window}")));
        }
        Ok(Self {
            dim,
            window,
            times: VecDeque::new(),
            states: VecDeque::new(),
            breakpoints: Vec::new(),
        })
    }

    /// Marks `t` as a point where the derivative may be discontinuous.
    pub fn add_breakpoint(&mut self, t: f64) {
        let pos = self.breakpoints.partition_point(|&b| b < t);
        if self.breakpoints.get(pos) != Some(&t) {
            self.breakpoints.insert(pos, t);
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn from_knots(dim: usize, window: f64, knots: impl IntoIterator<Item = (f64, Vec<f64>)>) -> Result<Self> {
        let mut buf = Self::new(dim, window)?;
        for (t, x) in knots {
            buf.push(t, x)?;
        }
        Ok(buf)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a knot. Times must be strictly increasing.
    pub fn push(&mut self, t: f64, x: Vec<f64>) -> Result<()> {
        Error::check_dim("history knot", self.dim, x.len())?;
        if !t.is_finite() {
            return Err(Error::param(format!("knot time must be finite, got {t}")));
        }
        if let Some(&last) = self.times.back() {
            if t <= last {
                return Err(Error::param(format!(
                    "knot times must be strictly increasing: {t} follows {last}"
                )));
            }
        }
        self.times.push_back(t);
        self.states.push_back(x);
        Ok(())
    }

    /// Drops knots strictly older than `cutoff`, always keeping at least two.
    pub fn retain_from(&mut self, cutoff: f64) {
        let slack = SPAN_SLACK * cutoff.abs().max(1.0);
        while self.times.len() > 2 && self.times[0] < cutoff - slack {
            self.times.pop_front();
            self.states.pop_front();
        }
        let front = self.times[0] - BREAKPOINT_TOL * self.times[0].abs().max(1.0);
        self.breakpoints.retain(|&b| b >= front);
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.times.front()?, *self.times.back()?))
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.back()?, self.states.back()?.as_slice()))
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().copied().zip(self.states.iter().map(|s| s.as_slice()))
    }

    pub fn knot_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.iter().copied()
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Interpolates the first `out.len()` components of the state at `t`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        debug_assert!(out.len() <= self.dim);
        let (start, end) = match self.span() {
            Some(s) => s,
            None => {
                return Err(Error::OutOfRange {
                    query: t,
                    start: f64::NAN,
                    end: f64::NAN,
                })
            }
        };
        let slack = SPAN_SLACK * (end - start).abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfRange { query: t, start, end });
        }
        let t = t.clamp(start, end);
        let len = self.times.len();
        // first knot with time > t
        let upper = self.times.partition_point(|&tk| tk <= t);
        let k = upper - 1;
        if self.times[k] == t || len == 1 {
            out.copy_from_slice(&self.states[k][..out.len()]);
            return Ok(());
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let dt = t1 - t0;
        let s = (t - t0) / dt;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;

        // Collect the interpolant as a linear combination of at most six knots.
        let mut coef: [(usize, f64); 8] = [(0, 0.0); 8];
        let mut used = 0usize;
        let mut add = |idx: usize, c: f64| {
            if let Some(slot) = coef[..used].iter_mut().find(|(i, _)| *i == idx) {
                slot.1 += c;
            } else {
                coef[used] = (idx, c);
                used += 1;
            }
        };
        add(k, h00);
        add(k + 1, h01);
        for (idx, w) in self.slope_weights(k, true) {
            add(idx, h10 * dt * w);
        }
        for (idx, w) in self.slope_weights(k + 1, false) {
            add(idx, h11 * dt * w);
        }
        let coef = &coef[..used];
        for (c, o) in out.iter_mut().enumerate() {
            *o = coef.iter().map(|&(idx, w)| w * self.states[idx][c]).sum();
        }
        Ok(())
    }

    fn is_breakpoint(&self, k: usize) -> bool {
        let t = self.times[k];
        let tol = BREAKPOINT_TOL * t.abs().max(1.0);
        let first = self.breakpoints.partition_point(|&p| p < t - tol);
        self.breakpoints.get(first).is_some_and(|&p| p <= t + tol)
    }

    /// True if a breakpoint lies strictly between knots `lo` and `hi`.
    fn straddles(&self, lo: usize, hi: usize) -> bool {
        let (a, b) = (self.times[lo], self.times[hi]);
        let (ta, tb) = (BREAKPOINT_TOL * a.abs().max(1.0), BREAKPOINT_TOL * b.abs().max(1.0));
        let first = self.breakpoints.partition_point(|&p| p <= a + ta);
        self.breakpoints.get(first).is_some_and(|&p| p < b - tb)
    }

    /// Finite-difference weights for the slope at knot `k`, seen from the
    /// interval to its right (`forward`) or left.
    fn slope_weights(&self, k: usize, forward: bool) -> impl Iterator<Item = (usize, f64)> {
        let len = self.times.len() as isize;
        let k_ = k as isize;
        let (ahead, behind) = if forward { (1, -1) } else { (-1, 1) };
        let kink = self.is_breakpoint(k);
        let mut candidates: Vec<Vec<isize>> = Vec::with_capacity(5);
        if !kink {
            candidates.push(vec![k_ - 1, k_, k_ + 1]);
        }
        candidates.push(vec![k_, k_ + ahead, k_ + 2 * ahead]);
        if !kink {
            candidates.push(vec![k_, k_ + behind, k_ + 2 * behind]);
        }
        candidates.push(vec![k_, k_ + ahead]);
        if !kink {
            candidates.push(vec![k_, k_ + behind]);
        }
        let stencil: Vec<usize> = candidates
            .into_iter()
            .find(|c| {
                c.iter().all(|&i| (0..len).contains(&i)) && {
                    let lo = *c.iter().min().unwrap() as usize;
                    let hi = *c.iter().max().unwrap() as usize;
                    !self.straddles(lo, hi)
                }
            })
            .map(|c| c.into_iter().map(|i| i as usize).collect())
            .unwrap_or_default();
        let x = self.times[k];
        let nodes: Vec<f64> = stencil.iter().map(|&i| self.times[i]).collect();
        // derivative of each Lagrange basis polynomial at x
        let weights: Vec<(usize, f64)> = stencil
            .iter()
            .enumerate()
            .map(|(a, &idx)| {
                let mut d = 0.0;
                for m in 0..nodes.len() {
                    if m == a {
                        continue;
                    }
                    let mut term = 1.0 / (nodes[a] - nodes[m]);
                    for l in 0..nodes.len() {
                        if l != a && l != m {
                            term *= (x - nodes[l]) / (nodes[a] - nodes[l]);
                        }
                    }
                    d += term;
                }
                (idx, d)
            })
            .collect();
        weights.into_iter()
    }
}
