use std::sync::Arc;

use nalgebra::DMatrix;

use crate::certificates::ConstantJacobian;
use crate::dde::Lagged;
use crate::error::{Error, Result};

use super::delay::DelaySpec;
use super::network::{DelayedNetwork, DriftFn, InputMatrix, OutputFn};

/// `x' = A_0 x + sum_l A_l x(t - T_l) + B u` with constant matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearNetwork {
    pub drift: DMatrix<f64>,
    pub delayed: Vec<DMatrix<f64>>,
    pub delays: Vec<f64>,
    pub input: DMatrix<f64>,
}

impl LinearNetwork {
    pub fn new(drift: DMatrix<f64>, delayed: Vec<DMatrix<f64>>, delays: Vec<f64>, input: DMatrix<f64>) -> Result<Self> {
        let n = drift.nrows();
        Error::check_dim("drift matrix columns", n, drift.ncols())?;
        Error::check_dim("delay count", delayed.len(), delays.len())?;
        for m in delayed.iter().chain(std::iter::once(&input)) {
            Error::check_dim("matrix rows", n, m.nrows())?;
            Error::check_dim("matrix columns", n, m.ncols())?;
        }
        Ok(Self {
            drift,
            delayed,
            delays,
            input,
        })
    }

    pub fn n(&self) -> usize {
        self.drift.nrows()
    }

    pub fn network(&self) -> Result<DelayedNetwork> {
        let n = self.n();
        let delays = self.delays.iter().map(|&d| DelaySpec::constant(d)).collect::<Result<Vec<_>>>()?;
        let a0 = self.drift.clone();
        let lagged_mats = self.delayed.clone();
        let drift: DriftFn = Arc::new(move |_t, x, lagged: Lagged<'_>, out| {
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc: f64 = (0..n).map(|j| a0[(i, j)] * x[j]).sum();
                for (l, m) in lagged_mats.iter().enumerate() {
                    let y = lagged.get(l);
                    acc += (0..n).map(|j| m[(i, j)] * y[j]).sum::<f64>();
                }
                *o = acc;
            }
        });
        DelayedNetwork::state_feedback(n, delays, drift, InputMatrix::Constant(self.input.clone()))
    }

    /// Virtual Jacobians of `g = A_0 xi + sum_l A_l eta_l + B K xi`.
    pub fn virtual_jacobian(&self, gains: &[f64]) -> ConstantJacobian {
        let k = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(gains));
        ConstantJacobian {
            d_xi: &self.drift + &self.input * k,
            d_eta: self.delayed.clone(),
        }
    }

    /// Drift-only virtual Jacobians (`K = 0`).
    pub fn drift_jacobian(&self) -> ConstantJacobian {
        self.virtual_jacobian(&vec![0.0; self.n()])
    }
}

/// A three-node nonlinear network in output-feedback form,
/// `x' = A_0 x + A_1 tanh(x(t - 1)) + K H(x)` with
/// `H_i = -x_i + 0.25 tanh(x_{i+1}) - 0.1 sin(x_{i+2})` (indices mod 3).
///
/// The drift is unstable on its own, while `dH/dx` is row dominant with
/// `w = 1` and margin `0.65` everywhere.
pub fn output_feedback_demo() -> Result<DelayedNetwork> {
    const N: usize = 3;
    let a0 = DMatrix::from_row_slice(N, N, &[0.3, 0.2, 0.0, 0.1, 0.2, 0.2, 0.2, 0.0, 0.4]);
    let a1 = DMatrix::from_row_slice(N, N, &[0.0, 0.2, 0.1, 0.15, 0.0, 0.1, 0.1, 0.2, 0.0]);
    let drift: DriftFn = Arc::new(move |_t, x, lagged: Lagged<'_>, out| {
        let y = lagged.get(0);
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..N).map(|j| a0[(i, j)] * x[j] + a1[(i, j)] * y[j].tanh()).sum();
        }
    });
    let output: OutputFn = Arc::new(|_t, x, _lagged, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = -x[i] + 0.25 * x[(i + 1) % N].tanh() - 0.1 * x[(i + 2) % N].sin();
        }
    });
    DelayedNetwork::output_feedback(N, vec![DelaySpec::constant(1.0)?], drift, output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_network_evaluates_drift() {
        let lin = LinearNetwork::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            vec![DMatrix::identity(2, 2)],
            vec![1.0],
            -DMatrix::identity(2, 2),
        )
        .unwrap();
        let net = lin.network().unwrap();
        let mut out = vec![0.0; 2];
        net.drift_into(0.0, &[1.0, 1.0], Lagged::new(&[0.5, -0.5], 2), &mut out);
        assert_eq!(out, vec![3.5, 6.5]);
        let j = lin.virtual_jacobian(&[2.0, 3.0]);
        assert_eq!(j.d_xi, DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 3.0, 1.0]));
    }

    #[test]
    fn mismatched_shapes_rejected() {
        assert!(LinearNetwork::new(DMatrix::zeros(2, 2), vec![DMatrix::zeros(3, 3)], vec![1.0], DMatrix::zeros(2, 2)).is_err());
        assert!(LinearNetwork::new(DMatrix::zeros(2, 2), vec![], vec![1.0], DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn demo_has_output_map() {
        let net = output_feedback_demo().unwrap();
        assert_eq!((net.n(), net.r()), (3, 1));
        assert!(net.output_map().is_some());
    }
}
