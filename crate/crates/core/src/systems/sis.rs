use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::certificates::{SamplePoint, VirtualJacobian};
use crate::dde::Lagged;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

use super::delay::DelaySpec;
use super::graph::CouplingGraph;
use super::network::{DelayedNetwork, DriftFn, InputMatrix};

/// Slack on the unit box when checking recorded SIS states.
pub const BOX_TOL: f64 = 1e-9;

fn sis_drift_into(graph: &CouplingGraph, x: &[f64], y: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let infection: f64 = graph.row(i).iter().map(|&(j, c)| c * y[j]).sum();
        *o = (1.0 - x[i]) * infection;
    }
}

/// Uncontrolled SIS rate `(1 - x_i) sum_j c_ij y_j`; recovery enters through
/// the controller with `B = -I`.
pub fn sis_drift(_t: f64, x: &[f64], y: &[f64], graph: &CouplingGraph) -> Result<Vec<f64>> {
    Error::check_dim("SIS state", graph.n(), x.len())?;
    Error::check_dim("SIS delayed state", graph.n(), y.len())?;
    let mut out = vec![0.0; graph.n()];
    sis_drift_into(graph, x, y, &mut out);
    Ok(out)
}

/// SIS network with a single transmission delay and input matrix `-I`.
pub fn sis_network(graph: Arc<CouplingGraph>, delay: f64) -> Result<DelayedNetwork> {
    let n = graph.n();
    let g = graph.clone();
    let drift: DriftFn = Arc::new(move |_t, x, lagged: Lagged<'_>, out| sis_drift_into(&g, x, lagged.get(0), out));
    DelayedNetwork::state_feedback(n, vec![DelaySpec::constant(delay)?], drift, InputMatrix::Diagonal(vec![-1.0; n]))
}

/// Virtual system `g_i = (1 - x_i) sum_j c_ij eta_j - k_i xi_i` of the SIS loop.
pub struct SisVirtual {
    pub graph: Arc<CouplingGraph>,
    pub gains: Vec<f64>,
}

impl VirtualJacobian for SisVirtual {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn r(&self) -> usize {
        1
    }

    fn d_xi(&self, _: &SamplePoint) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(self.n(), self.gains.iter().map(|k| -k)))
    }

    fn d_eta(&self, p: &SamplePoint, _lag: usize) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for &(j, c) in self.graph.row(i) {
                m[(i, j)] = (1.0 - p.x[i]) * c;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxViolation {
    pub t: f64,
    pub node: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxInvariance {
    pub holds: bool,
    pub first_violation: Option<BoxViolation>,
}

/// Checks every recorded state against `[-BOX_TOL, 1 + BOX_TOL]^n`.
pub fn check_box_invariance(traj: &Trajectory) -> BoxInvariance {
    let first_violation = traj.times.iter().zip(&traj.states).find_map(|(&t, x)| {
        x.iter()
            .position(|v| !(*v >= -BOX_TOL && *v <= 1.0 + BOX_TOL))
            .map(|node| BoxViolation { t, node, value: x[node] })
    });
    BoxInvariance {
        holds: first_violation.is_none(),
        first_violation,
    }
}
