//! Decentralized gain adaptation and closed-loop assembly.
//!
//! Each node scales its own feedback by a gain `k_i` that grows at rate
//! `min(a_i, b_i |x_i(t - T_i^k)|)`. The gains are appended to the state and
//! integrated together with it, so the closed loop is a single delay
//! differential equation of dimension `2n` (adaptive) or `n` (fixed).

use serde::{Deserialize, Serialize};

use crate::dde::{DelayedRhs, Lagged};
use crate::error::{Error, Result};
use crate::systems::{DelayedNetwork, Feedback};

/// Adaptive gains and the parameters of their update law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainState {
    /// Current gains.
    pub k: Vec<f64>,
    /// Rate caps `a_i > 0`.
    pub a: Vec<f64>,
    /// Slopes `b_i > 0`.
    pub b: Vec<f64>,
    /// Measurement delays `T_i^k >= 0`.
    pub t_k: Vec<f64>,
    /// Initial gains `k_i(sigma) >= 0`.
    pub k0: Vec<f64>,
}

impl GainState {
    pub fn new(a: Vec<f64>, b: Vec<f64>, t_k: Vec<f64>, k0: Vec<f64>) -> Result<Self> {
        let n = k0.len();
        Error::check_dim("gain rate caps", n, a.len())?;
        Error::check_dim("gain slopes", n, b.len())?;
        Error::check_dim("gain measurement delays", n, t_k.len())?;
        type Check<'c> = (&'c str, &'c [f64], fn(f64) -> bool);
        let checks: [Check; 4] = [
            ("a", &a, |v| v > 0.0),
            ("b", &b, |v| v >= 0.0),
            ("t_k", &t_k, |v| v >= 0.0),
            ("k0", &k0, |v| v >= 0.0),
        ];
        for (name, vals, ok) in checks {
            if let Some(v) = vals.iter().find(|v| !(v.is_finite() && ok(**v))) {
                return Err(Error::config(format!("controller.{name}"), format!("invalid value {v}")));
            }
        }
        Ok(Self {
            k: k0.clone(),
            a,
            b,
            t_k,
            k0,
        })
    }

    pub fn uniform(n: usize, a: f64, b: f64, t_k: f64, k0: f64) -> Result<Self> {
        Self::new(vec![a; n], vec![b; n], vec![t_k; n], vec![k0; n])
    }

    pub fn n(&self) -> usize {
        self.k0.len()
    }
}

/// `min(a_i, b_i |x_i(t - T_i^k)|)`, always in `[0, a_i]`.
pub fn gain_rate(i: usize, x_delayed: f64, gains: &GainState) -> f64 {
    gains.a[i].min(gains.b[i] * x_delayed.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Controller {
    Adaptive {
        gains: GainState,
        /// Optional per-node ceiling; a gain stops updating once it reaches it.
        k_max: Option<Vec<f64>>,
        /// Allow `T_i^k` beyond the largest system delay.
        allow_long_measurement_delay: bool,
    },
    Fixed(Vec<f64>),
}

impl Controller {
    pub fn adaptive(gains: GainState) -> Self {
        Controller::Adaptive {
            gains,
            k_max: None,
            allow_long_measurement_delay: false,
        }
    }

    pub fn fixed(k: Vec<f64>) -> Result<Self> {
        if let Some(v) = k.iter().find(|v| !v.is_finite()) {
            return Err(Error::config("controller.k_fixed", format!("gain must be finite, got {v}")));
        }
        Ok(Controller::Fixed(k))
    }

    pub fn n(&self) -> usize {
        match self {
            Controller::Adaptive { gains, .. } => gains.n(),
            Controller::Fixed(k) => k.len(),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Controller::Adaptive { .. })
    }

    pub fn initial_gains(&self) -> &[f64] {
        match self {
            Controller::Adaptive { gains, .. } => &gains.k0,
            Controller::Fixed(k) => k,
        }
    }

    /// Longest lookback needed by the gain law.
    pub fn max_measurement_delay(&self) -> f64 {
        match self {
            Controller::Adaptive { gains, .. } => gains.t_k.iter().copied().fold(0.0, f64::max),
            Controller::Fixed(_) => 0.0,
        }
    }

    pub fn rate_caps(&self) -> Vec<f64> {
        match self {
            Controller::Adaptive { gains, .. } => gains.a.clone(),
            Controller::Fixed(k) => vec![0.0; k.len()],
        }
    }
}

/// The augmented closed loop `(x, k)` of a network and a controller.
pub struct ClosedLoop<'a> {
    network: &'a DelayedNetwork,
    controller: &'a Controller,
    /// Positive measurement delays, each a lag after the system delays.
    gain_lags: Vec<f64>,
    /// Lag index used by node i, or `None` for undelayed measurement.
    gain_lag_of: Vec<Option<usize>>,
    window: f64,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(network: &'a DelayedNetwork, controller: &'a Controller) -> Result<Self> {
        let n = network.n();
        Error::check_dim("controller", n, controller.n())?;
        let t_d = network.max_delay();
        let mut gain_lags: Vec<f64> = Vec::new();
        let mut gain_lag_of = vec![None; n];
        if let Controller::Adaptive {
            gains,
            k_max,
            allow_long_measurement_delay,
        } = controller
        {
            if let Some(kmax) = k_max {
                Error::check_dim("gain ceiling", n, kmax.len())?;
            }
            let longest = controller.max_measurement_delay();
            if longest > t_d && !allow_long_measurement_delay {
                return Err(Error::config(
                    "controller.t_k",
                    format!(
                        "measurement delay {longest} exceeds the largest system delay {t_d}; \
                         set allow_long_measurement_delay to extend the history window"
                    ),
                ));
            }
            for (i, &tk) in gains.t_k.iter().enumerate() {
                if tk > 0.0 {
                    let slot = match gain_lags.iter().position(|&v| v == tk) {
                        Some(s) => s,
                        None => {
                            gain_lags.push(tk);
                            gain_lags.len() - 1
                        }
                    };
                    gain_lag_of[i] = Some(network.r() + slot);
                }
            }
        }
        let window = t_d.max(controller.max_measurement_delay());
        Ok(Self {
            network,
            controller,
            gain_lags,
            gain_lag_of,
            window,
        })
    }

    /// History window the integrator must keep.
    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn network(&self) -> &DelayedNetwork {
        self.network
    }

    pub fn controller(&self) -> &Controller {
        self.controller
    }

    /// Initial augmented state at offset `theta` in `[-window, 0]`.
    ///
    /// `phi` is only required on `[-T_d, 0]`; further back it is continued
    /// periodically with period `T_d`.
    pub fn initial_state(&self, phi: &dyn Fn(f64, &mut [f64]), theta: f64, out: &mut [f64]) {
        let n = self.network.n();
        let t_d = self.network.max_delay();
        let theta = if theta < -t_d {
            if t_d > 0.0 {
                -((-theta) % t_d)
            } else {
                0.0
            }
        } else {
            theta
        };
        phi(theta, &mut out[..n]);
        if let Controller::Adaptive { gains, .. } = self.controller {
            out[n..].copy_from_slice(&gains.k0);
        }
    }

    /// Post-step projection enforcing the optional gain ceiling.
    pub fn clamp_gains(&self, state: &mut [f64]) {
        if let Controller::Adaptive { k_max: Some(kmax), .. } = self.controller {
            let n = self.network.n();
            for (k, cap) in state[n..].iter_mut().zip(kmax) {
                *k = k.min(*cap);
            }
        }
    }

    /// Current gain vector for an augmented state.
    pub fn gains_of<'s>(&'s self, state: &'s [f64]) -> &'s [f64] {
        match self.controller {
            Controller::Adaptive { .. } => &state[self.network.n()..],
            Controller::Fixed(k) => k,
        }
    }
}

impl DelayedRhs for ClosedLoop<'_> {
    fn dim(&self) -> usize {
        let n = self.network.n();
        if self.controller.is_adaptive() {
            2 * n
        } else {
            n
        }
    }

    fn lag_width(&self) -> usize {
        self.network.n()
    }

    fn lag_count(&self) -> usize {
        self.network.r() + self.gain_lags.len()
    }

    fn lag(&self, l: usize, t: f64) -> f64 {
        let r = self.network.r();
        if l < r {
            self.network.delays()[l].value(t)
        } else {
            self.gain_lags[l - r]
        }
    }

    fn lag_bounds(&self, l: usize) -> (f64, f64) {
        let r = self.network.r();
        if l < r {
            self.network.delays()[l].bounds()
        } else {
            (self.gain_lags[l - r], self.gain_lags[l - r])
        }
    }

    fn eval(&self, t: f64, state: &[f64], lagged: Lagged<'_>, dx: &mut [f64]) {
        let n = self.network.n();
        let r = self.network.r();
        let x = &state[..n];
        let k = self.gains_of(state);
        let system_lags = lagged.prefix(r);
        let (dxs, dks) = dx.split_at_mut(n);
        self.network.drift_into(t, x, system_lags, dxs);
        match self.network.feedback() {
            Feedback::State(b) => {
                let u: Vec<f64> = k.iter().zip(x).map(|(ki, xi)| ki * xi).collect();
                b.apply_add(t, x, system_lags, &u, dxs);
            }
            Feedback::Output(h) => {
                let mut hv = vec![0.0; n];
                h(t, x, system_lags, &mut hv);
                for i in 0..n {
                    dxs[i] += k[i] * hv[i];
                }
            }
        }
        if let Controller::Adaptive { gains, k_max, .. } = self.controller {
            for i in 0..n {
                let measured = match self.gain_lag_of[i] {
                    Some(l) => lagged.get(l)[i],
                    None => x[i],
                };
                let frozen = k_max.as_ref().is_some_and(|cap| k[i] >= cap[i]);
                dks[i] = if frozen { 0.0 } else { gain_rate(i, measured, gains) };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{sis_network, CouplingGraph};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    #[test]
    fn gain_rate_examples() {
        let g = GainState::uniform(1, 0.1, 0.01, 100.0, 10.0).unwrap();
        assert_eq!(gain_rate(0, 0.5, &g), 0.005);
        assert_eq!(gain_rate(0, 0.0, &g), 0.0);
        assert_eq!(gain_rate(0, 100.0, &g), 0.1);
        assert_eq!(gain_rate(0, -100.0, &g), 0.1);
    }

    #[test]
    fn gain_parameters_validated() {
        assert!(GainState::uniform(2, 0.0, 0.01, 1.0, 1.0).is_err());
        assert!(GainState::uniform(2, 0.1, 0.01, -1.0, 1.0).is_err());
        assert!(GainState::uniform(2, 0.1, 0.01, 1.0, -1.0).is_err());
        assert!(GainState::new(vec![0.1], vec![0.1, 0.1], vec![0.0], vec![0.0]).is_err());
        assert!(Controller::fixed(vec![f64::NAN]).is_err());
    }

    fn sis(n: usize) -> DelayedNetwork {
        let w = DMatrix::from_fn(n, n, |i, j| if i != j { 0.05 } else { 0.0 });
        sis_network(Arc::new(CouplingGraph::from_weights(w, 0).unwrap()), 50.0).unwrap()
    }

    #[test]
    fn augmented_dimension_and_lags() {
        let net = sis(200);
        let mut ctrl = Controller::adaptive(GainState::uniform(200, 0.1, 0.01, 100.0, 10.0).unwrap());
        assert!(ClosedLoop::new(&net, &ctrl).is_err());
        if let Controller::Adaptive {
            allow_long_measurement_delay,
            ..
        } = &mut ctrl
        {
            *allow_long_measurement_delay = true;
        }
        let cl = ClosedLoop::new(&net, &ctrl).unwrap();
        assert_eq!(cl.dim(), 400);
        assert_eq!(cl.lag_count(), 2);
        assert_eq!(cl.window(), 100.0);
        assert_eq!(cl.lag(1, 3.0), 100.0);

        let fixed = Controller::fixed(vec![20.0; 200]).unwrap();
        let cl = ClosedLoop::new(&net, &fixed).unwrap();
        assert_eq!((cl.dim(), cl.lag_count(), cl.window()), (200, 1, 50.0));
        assert!(ClosedLoop::new(&net, &Controller::fixed(vec![1.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn zero_slope_matches_fixed_loop() {
        let net = sis(3);
        let adaptive = Controller::adaptive(GainState::uniform(3, 0.1, 0.0, 10.0, 2.0).unwrap());
        let fixed = Controller::fixed(vec![2.0; 3]).unwrap();
        let (ca, cf) = (ClosedLoop::new(&net, &adaptive).unwrap(), ClosedLoop::new(&net, &fixed).unwrap());
        let state = [0.3, 0.1, 0.7, 2.0, 2.0, 2.0];
        let lag = [0.2, 0.4, 0.1, 0.9, 0.9, 0.9];
        let (mut da, mut df) = (vec![0.0; 6], vec![0.0; 3]);
        ca.eval(0.0, &state, Lagged::new(&lag, 3), &mut da);
        cf.eval(0.0, &state[..3], Lagged::new(&lag[..3], 3), &mut df);
        assert_eq!(&da[..3], &df[..]);
        assert_eq!(&da[3..], &[0.0; 3]);
    }

    #[test]
    fn gain_ceiling_freezes_rate() {
        let net = sis(2);
        let ctrl = Controller::Adaptive {
            gains: GainState::uniform(2, 1.0, 1.0, 0.0, 1.0).unwrap(),
            k_max: Some(vec![1.0, 5.0]),
            allow_long_measurement_delay: false,
        };
        let cl = ClosedLoop::new(&net, &ctrl).unwrap();
        let mut dx = vec![0.0; 4];
        cl.eval(0.0, &[0.5, 0.5, 1.0, 1.0], Lagged::new(&[0.0, 0.0], 2), &mut dx);
        assert_eq!(&dx[2..], &[0.0, 0.5]);
        let mut s = [0.0, 0.0, 3.0, 7.0];
        cl.clamp_gains(&mut s);
        assert_eq!(&s[2..], &[1.0, 5.0]);
    }

    #[test]
    fn initial_state_extends_phi_periodically() {
        let net = sis(1);
        let ctrl = Controller::Adaptive {
            gains: GainState::uniform(1, 0.1, 0.01, 100.0, 10.0).unwrap(),
            k_max: None,
            allow_long_measurement_delay: true,
        };
        let cl = ClosedLoop::new(&net, &ctrl).unwrap();
        let phi = |theta: f64, out: &mut [f64]| out[0] = theta;
        let mut s = [0.0; 2];
        cl.initial_state(&phi, -70.0, &mut s);
        assert_eq!(s, [-20.0, 10.0]);
        cl.initial_state(&phi, -30.0, &mut s);
        assert_eq!(s, [-30.0, 10.0]);
    }
}
