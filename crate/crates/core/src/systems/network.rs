use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dde::Lagged;
use crate::error::{Error, Result};

use super::delay::{self, DelaySpec};

/// `f(t, x, y_1..y_r)` written into the output slice.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], Lagged<'_>, &mut [f64]) + Send + Sync>;
/// `B(t, x, y_1..y_r)` as a dense matrix.
pub type MatrixFn = Arc<dyn Fn(f64, &[f64], Lagged<'_>) -> DMatrix<f64> + Send + Sync>;
/// `H(t, x, y_1..y_r)` written into the output slice.
pub type OutputFn = Arc<dyn Fn(f64, &[f64], Lagged<'_>, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum InputMatrix {
    Diagonal(Vec<f64>),
    Constant(DMatrix<f64>),
    StateDependent(MatrixFn),
}

impl InputMatrix {
    pub fn matrix(&self, t: f64, x: &[f64], lagged: Lagged<'_>) -> DMatrix<f64> {
        match self {
            InputMatrix::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            InputMatrix::Constant(m) => m.clone(),
            InputMatrix::StateDependent(f) => f(t, x, lagged),
        }
    }

    /// `out += B(t, x, y) u`
    pub fn apply_add(&self, t: f64, x: &[f64], lagged: Lagged<'_>, u: &[f64], out: &mut [f64]) {
        match self {
            InputMatrix::Diagonal(d) => {
                for ((o, di), ui) in out.iter_mut().zip(d).zip(u) {
                    *o += di * ui;
                }
            }
            InputMatrix::Constant(m) => add_mat_vec(m, u, out),
            InputMatrix::StateDependent(f) => add_mat_vec(&f(t, x, lagged), u, out),
        }
    }
}

fn add_mat_vec(m: &DMatrix<f64>, u: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o += (0..m.ncols()).map(|j| m[(i, j)] * u[j]).sum::<f64>();
    }
}

#[derive(Clone)]
pub enum Feedback {
    /// `x' = f + B K x`
    State(InputMatrix),
    /// `x' = f + K H`
    Output(OutputFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackForm {
    StateFeedback,
    OutputFeedback,
}

/// A nonlinear time-delayed network with an equilibrium at the origin.
#[derive(Clone)]
pub struct DelayedNetwork {
    n: usize,
    delays: Vec<DelaySpec>,
    drift: DriftFn,
    feedback: Feedback,
}

/// Times at which the origin property of `f` and `H` is spot-checked.
const ORIGIN_PROBES: [f64; 5] = [0.0, 0.5, 1.0, 10.0, 100.0];

impl DelayedNetwork {
    pub fn state_feedback(n: usize, delays: Vec<DelaySpec>, drift: DriftFn, input: InputMatrix) -> Result<Self> {
        if let InputMatrix::Diagonal(d) = &input {
            Error::check_dim("input matrix diagonal", n, d.len())?;
        }
        if let InputMatrix::Constant(m) = &input {
            Error::check_dim("input matrix rows", n, m.nrows())?;
            Error::check_dim("input matrix columns", n, m.ncols())?;
        }
        let net = Self {
            n,
            delays,
            drift,
            feedback: Feedback::State(input),
        };
        net.check_origin()?;
        Ok(net)
    }

    pub fn output_feedback(n: usize, delays: Vec<DelaySpec>, drift: DriftFn, output: OutputFn) -> Result<Self> {
        let net = Self {
            n,
            delays,
            drift,
            feedback: Feedback::Output(output),
        };
        net.check_origin()?;
        Ok(net)
    }

    fn check_origin(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("network must have at least one node"));
        }
        let zero = vec![0.0; self.n];
        let lag_zero = vec![0.0; self.n * self.delays.len()];
        let mut out = vec![0.0; self.n];
        for t in ORIGIN_PROBES {
            let lagged = Lagged::new(&lag_zero, self.n);
            out.fill(0.0);
            (self.drift)(t, &zero, lagged, &mut out);
            if let Some(v) = out.iter().find(|v| **v != 0.0) {
                return Err(Error::param(format!("drift does not vanish at the origin: f({t}, 0) has entry {v}")));
            }
            if let Feedback::Output(h) = &self.feedback {
                out.fill(0.0);
                h(t, &zero, lagged, &mut out);
                if let Some(v) = out.iter().find(|v| **v != 0.0) {
                    return Err(Error::param(format!(
                        "output map does not vanish at the origin: H({t}, 0) has entry {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[DelaySpec] {
        &self.delays
    }

    /// `T_d`, the largest declared delay.
    pub fn max_delay(&self) -> f64 {
        delay::max_delay(&self.delays)
    }

    pub fn rate_bound(&self) -> f64 {
        delay::max_rate_bound(&self.delays)
    }

    pub fn form(&self) -> FeedbackForm {
        match self.feedback {
            Feedback::State(_) => FeedbackForm::StateFeedback,
            Feedback::Output(_) => FeedbackForm::OutputFeedback,
        }
    }

    pub fn feedback(&self) -> &Feedback {
        &self.feedback
    }

    pub fn input_matrix(&self) -> Option<&InputMatrix> {
        match &self.feedback {
            Feedback::State(b) => Some(b),
            Feedback::Output(_) => None,
        }
    }

    pub fn output_map(&self) -> Option<&OutputFn> {
        match &self.feedback {
            Feedback::Output(h) => Some(h),
            Feedback::State(_) => None,
        }
    }

    pub fn drift_into(&self, t: f64, x: &[f64], lagged: Lagged<'_>, out: &mut [f64]) {
        (self.drift)(t, x, lagged, out)
    }
}

impl fmt::Debug for DelayedNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayedNetwork")
            .field("n", &self.n)
            .field("delays", &self.delays)
            .field("form", &self.form())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_must_vanish_at_origin() {
        let bad: DriftFn = Arc::new(|_, _, _, out: &mut [f64]| out[0] = 1.0);
        let r = DelayedNetwork::state_feedback(1, vec![], bad, InputMatrix::Diagonal(vec![-1.0]));
        assert!(r.is_err());
    }

    #[test]
    fn output_map_must_vanish_at_origin() {
        let drift: DriftFn = Arc::new(|_, _, _, _| {});
        let h: OutputFn = Arc::new(|t, _, _, out: &mut [f64]| out[0] = t);
        assert!(DelayedNetwork::output_feedback(1, vec![], drift, h).is_err());
    }

    #[test]
    fn form_matches_feedback() {
        let drift: DriftFn = Arc::new(|_, _, _, _| {});
        let net = DelayedNetwork::state_feedback(2, vec![], drift.clone(), InputMatrix::Diagonal(vec![-1.0; 2])).unwrap();
        assert_eq!(net.form(), FeedbackForm::StateFeedback);
        assert!(net.input_matrix().is_some() && net.output_map().is_none());
        let h: OutputFn = Arc::new(|_, x, _, out: &mut [f64]| out.copy_from_slice(x));
        let dual = DelayedNetwork::output_feedback(2, vec![], drift, h).unwrap();
        assert_eq!(dual.form(), FeedbackForm::OutputFeedback);
        assert!(dual.input_matrix().is_none() && dual.output_map().is_some());
    }

    #[test]
    fn input_matrix_dimension_checked() {
        let drift: DriftFn = Arc::new(|_, _, _, _| {});
        assert!(DelayedNetwork::state_feedback(2, vec![], drift, InputMatrix::Diagonal(vec![-1.0])).is_err());
    }

    #[test]
    fn dense_and_diagonal_inputs_agree() {
        let d = InputMatrix::Diagonal(vec![-1.0, -2.0]);
        let m = InputMatrix::Constant(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]));
        let lag = Lagged::new(&[], 2);
        let (mut a, mut b) = (vec![1.0, 1.0], vec![1.0, 1.0]);
        d.apply_add(0.0, &[0.0; 2], lag, &[3.0, 4.0], &mut a);
        m.apply_add(0.0, &[0.0; 2], lag, &[3.0, 4.0], &mut b);
        assert_eq!(a, b);
        assert_eq!(d.matrix(0.0, &[0.0; 2], lag), m.matrix(0.0, &[0.0; 2], lag));
    }
}
