use nalgebra::DMatrix;

use crate::dde::Lagged;
use crate::systems::{DelayedNetwork, Feedback};

use super::sampler::{MatrixField, SamplePoint, VirtualJacobian};

fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Central-difference Jacobian of `map` with respect to the coordinates
/// selected by `slot`.
fn central_difference(
    n: usize,
    base: &[f64],
    mut map: impl FnMut(&[f64], &mut [f64]),
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(n, base.len());
    let mut probe = base.to_vec();
    let (mut plus, mut minus) = (vec![0.0; n], vec![0.0; n]);
    for j in 0..base.len() {
        let h = fd_step(base[j]);
        probe[j] = base[j] + h;
        plus.fill(0.0);
        map(&probe, &mut plus);
        probe[j] = base[j] - h;
        minus.fill(0.0);
        map(&probe, &mut minus);
        probe[j] = base[j];
        for i in 0..n {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// The canonical virtual system of a closed loop with fixed gains `K`:
/// `g = f(t, xi, eta) + B(t, x, y) K xi` for state feedback and
/// `g = f(t, xi, eta) + K H(t, xi, eta)` for output feedback, differentiated
/// numerically.
pub struct NetworkVirtual<'a> {
    pub network: &'a DelayedNetwork,
    pub gains: Vec<f64>,
}

impl NetworkVirtual<'_> {
    /// `f + K H` (output feedback) or `f` (state feedback) at virtual arguments.
    fn virtual_part(&self, t: f64, xi: &[f64], eta: &[f64], out: &mut [f64]) {
        let n = self.network.n();
        let lag = Lagged::new(eta, n);
        self.network.drift_into(t, xi, lag, out);
        if let Feedback::Output(h) = self.network.feedback() {
            let mut hv = vec![0.0; n];
            h(t, xi, lag, &mut hv);
            for i in 0..n {
                out[i] += self.gains[i] * hv[i];
            }
        }
    }
}

impl VirtualJacobian for NetworkVirtual<'_> {
    fn n(&self) -> usize {
        self.network.n()
    }

    fn r(&self) -> usize {
        self.network.r()
    }

    fn d_xi(&self, p: &SamplePoint) -> DMatrix<f64> {
        let n = self.n();
        let eta = p.eta_flat();
        let mut jac = central_difference(n, &p.xi, |xi, out| self.virtual_part(p.t, xi, &eta, out));
        if let Feedback::State(b) = self.network.feedback() {
            let y = p.y_flat();
            let bm = b.matrix(p.t, &p.x, Lagged::new(&y, n));
            for j in 0..n {
                for i in 0..n {
                    jac[(i, j)] += bm[(i, j)] * self.gains[j];
                }
            }
        }
        jac
    }

    fn d_eta(&self, p: &SamplePoint, lag: usize) -> DMatrix<f64> {
        let n = self.n();
        let eta = p.eta_flat();
        let slice = lag * n..(lag + 1) * n;
        let mut full = eta.clone();
        central_difference(n, &eta[slice.clone()], |part, out| {
            full[slice.clone()].copy_from_slice(part);
            self.virtual_part(p.t, &p.xi, &full, out);
        })
    }
}

/// `B(t, x, y)` of a state-feedback network.
pub struct InputMatrixField<'a>(pub &'a DelayedNetwork);

impl MatrixField for InputMatrixField<'_> {
    fn n(&self) -> usize {
        self.0.n()
    }

    fn r(&self) -> usize {
        self.0.r()
    }

    fn eval(&self, p: &SamplePoint) -> DMatrix<f64> {
        let y = p.y_flat();
        match self.0.input_matrix() {
            Some(b) => b.matrix(p.t, &p.x, Lagged::new(&y, self.0.n())),
            None => DMatrix::from_element(self.0.n(), self.0.n(), f64::NAN),
        }
    }
}

/// `dH/dx (t, x, y)` of an output-feedback network, by central differences.
pub struct OutputJacobianField<'a>(pub &'a DelayedNetwork);

impl MatrixField for OutputJacobianField<'_> {
    fn n(&self) -> usize {
        self.0.n()
    }

    fn r(&self) -> usize {
        self.0.r()
    }

    fn eval(&self, p: &SamplePoint) -> DMatrix<f64> {
        let n = self.0.n();
        let y = p.y_flat();
        match self.0.output_map() {
            Some(h) => central_difference(n, &p.x, |x, out| h(p.t, x, Lagged::new(&y, n), out)),
            None => DMatrix::from_element(n, n, f64::NAN),
        }
    }
}
