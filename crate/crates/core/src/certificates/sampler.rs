use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `(t, x, y_1..y_r, xi, eta_1..eta_r)` of the virtual-system domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
}

impl SamplePoint {
    /// Delayed states concatenated, as a right-hand side expects them.
    pub fn y_flat(&self) -> Vec<f64> {
        self.y.concat()
    }

    pub fn eta_flat(&self) -> Vec<f64> {
        self.eta.concat()
    }
}

/// Jacobians of a virtual system `g(t, x, y, xi, eta)` with respect to its
/// virtual arguments.
pub trait VirtualJacobian: Send + Sync {
    fn n(&self) -> usize;
    fn r(&self) -> usize;
    fn d_xi(&self, p: &SamplePoint) -> DMatrix<f64>;
    fn d_eta(&self, p: &SamplePoint, lag: usize) -> DMatrix<f64>;
}

/// A matrix-valued function of `(t, x, y)`: an input matrix `B` or an output
/// Jacobian `dH/dx`.
pub trait MatrixField: Send + Sync {
    fn n(&self) -> usize;
    fn r(&self) -> usize;
    fn eval(&self, p: &SamplePoint) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn at(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

/// Box domain with a deterministic sampling plan.
///
/// Sample 0 is the lower corner, 1 the upper corner, 2 the centre; the first
/// half of the remainder follows a Kronecker low-discrepancy sequence and the
/// rest are seeded uniform draws. Every point is a pure function of its index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDomain {
    pub t: Interval,
    pub x: Vec<Interval>,
    pub y: Vec<Interval>,
    pub xi: Vec<Interval>,
    pub eta: Vec<Interval>,
    pub samples: usize,
    pub seed: u64,
}

/// Default number of sample points per check.
pub const DEFAULT_SAMPLES: usize = 10_000;

impl SampleDomain {
    /// Same interval for every component of each coordinate group.
    pub fn uniform(
        n: usize,
        t: Interval,
        x: Interval,
        y: Interval,
        xi: Interval,
        eta: Interval,
        samples: usize,
        seed: u64,
    ) -> Self {
        Self {
            t,
            x: vec![x; n],
            y: vec![y; n],
            xi: vec![xi; n],
            eta: vec![eta; n],
            samples,
            seed,
        }
    }

    /// Every coordinate of every group in the same interval.
    pub fn cube(n: usize, range: Interval, samples: usize, seed: u64) -> Self {
        Self::uniform(n, Interval::new(0.0, 1.0), range, range, range, range, samples, seed)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::EmptySamples);
        }
        for (name, group) in [("x", &self.x), ("y", &self.y), ("xi", &self.xi), ("eta", &self.eta)] {
            if group.len() != n {
                return Err(Error::param(format!("domain group {name} has {} intervals, expected {n}", group.len())));
            }
        }
        let all = std::iter::once(&self.t).chain(self.x.iter()).chain(&self.y).chain(&self.xi).chain(&self.eta);
        for iv in all {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= iv.hi) {
                return Err(Error::param(format!("invalid domain interval [{}, {}]", iv.lo, iv.hi)));
            }
        }
        Ok(())
    }

    fn coords(&self, r: usize) -> usize {
        1 + self.x.len() + r * self.y.len() + self.xi.len() + r * self.eta.len()
    }

    /// The `index`-th sample point for a system with `r` delays.
    pub fn point(&self, index: usize, r: usize) -> SamplePoint {
        let dim = self.coords(r);
        let unit: Vec<f64> = match index {
            0 => vec![0.0; dim],
            1 => vec![1.0; dim],
            2 => vec![0.5; dim],
            k if k - 3 < self.samples.saturating_sub(3) / 2 => kronecker(k - 3, dim),
            k => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(k as u64);
                (0..dim).map(|_| rng.gen::<f64>()).collect()
            }
        };
        let mut u = unit.into_iter();
        let mut take = |ivs: &[Interval]| -> Vec<f64> { ivs.iter().map(|iv| iv.at(u.next().unwrap())).collect() };
        let t = take(std::slice::from_ref(&self.t))[0];
        let x = take(&self.x);
        let y = (0..r).map(|_| take(&self.y)).collect();
        let xi = take(&self.xi);
        let eta = (0..r).map(|_| take(&self.eta)).collect();
        SamplePoint { t, x, y, xi, eta }
    }
}

/// Additive recurrence `frac(0.5 + k alpha_d)` with the generalized golden
/// ratio of dimension `dim`.
fn kronecker(k: usize, dim: usize) -> Vec<f64> {
    // root of phi^(dim+1) = phi + 1
    let mut phi = 2.0f64;
    for _ in 0..64 {
        let f = phi.powi(dim as i32 + 1) - phi - 1.0;
        let df = (dim as f64 + 1.0) * phi.powi(dim as i32) - 1.0;
        phi -= f / df;
    }
    (1..=dim)
        .map(|d| {
            let alpha = (1.0 / phi.powi(d as i32)).fract();
            (0.5 + (k as f64 + 1.0) * alpha).fract()
        })
        .collect()
}

/// Jacobians that do not depend on the sample point.
#[derive(Debug, Clone)]
pub struct ConstantJacobian {
    pub d_xi: DMatrix<f64>,
    pub d_eta: Vec<DMatrix<f64>>,
}

impl VirtualJacobian for ConstantJacobian {
    fn n(&self) -> usize {
        self.d_xi.nrows()
    }
    fn r(&self) -> usize {
        self.d_eta.len()
    }
    fn d_xi(&self, _: &SamplePoint) -> DMatrix<f64> {
        self.d_xi.clone()
    }
    fn d_eta(&self, _: &SamplePoint, lag: usize) -> DMatrix<f64> {
        self.d_eta[lag].clone()
    }
}

#[derive(Debug, Clone)]
pub struct ConstantField {
    pub matrix: DMatrix<f64>,
    pub r: usize,
}

impl MatrixField for ConstantField {
    fn n(&self) -> usize {
        self.matrix.nrows()
    }
    fn r(&self) -> usize {
        self.r
    }
    fn eval(&self, _: &SamplePoint) -> DMatrix<f64> {
        self.matrix.clone()
    }
}

pub type PointMatrixFn = Arc<dyn Fn(&SamplePoint) -> DMatrix<f64> + Send + Sync>;
pub type PointLagMatrixFn = Arc<dyn Fn(&SamplePoint, usize) -> DMatrix<f64> + Send + Sync>;

/// Closure-backed virtual Jacobian.
#[derive(Clone)]
pub struct FnJacobian {
    pub n: usize,
    pub r: usize,
    pub d_xi: PointMatrixFn,
    pub d_eta: PointLagMatrixFn,
}

impl VirtualJacobian for FnJacobian {
    fn n(&self) -> usize {
        self.n
    }
    fn r(&self) -> usize {
        self.r
    }
    fn d_xi(&self, p: &SamplePoint) -> DMatrix<f64> {
        (self.d_xi)(p)
    }
    fn d_eta(&self, p: &SamplePoint, lag: usize) -> DMatrix<f64> {
        (self.d_eta)(p, lag)
    }
}

#[derive(Clone)]
pub struct FnField {
    pub n: usize,
    pub r: usize,
    pub eval: PointMatrixFn,
}

impl MatrixField for FnField {
    fn n(&self) -> usize {
        self.n
    }
    fn r(&self) -> usize {
        self.r
    }
    fn eval(&self, p: &SamplePoint) -> DMatrix<f64> {
        (self.eval)(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_centre_come_first() {
        let d = SampleDomain::uniform(
            2,
            Interval::new(0.0, 10.0),
            Interval::new(0.0, 1.0),
            Interval::new(-1.0, 1.0),
            Interval::new(-2.0, 2.0),
            Interval::new(-3.0, 3.0),
            100,
            7,
        );
        let lo = d.point(0, 1);
        assert_eq!(lo.t, 0.0);
        assert_eq!(lo.x, vec![0.0, 0.0]);
        assert_eq!(lo.y, vec![vec![-1.0, -1.0]]);
        assert_eq!(lo.eta, vec![vec![-3.0, -3.0]]);
        let hi = d.point(1, 1);
        assert_eq!(hi.xi, vec![2.0, 2.0]);
        let mid = d.point(2, 1);
        assert_eq!(mid.t, 5.0);
    }

    #[test]
    fn points_are_deterministic_and_inside_the_box() {
        let d = SampleDomain::cube(3, Interval::new(-1.0, 2.0), 50, 11);
        for k in 0..50 {
            let p = d.point(k, 2);
            assert_eq!(p, d.point(k, 2));
            for v in p.x.iter().chain(p.xi.iter()).chain(p.y.iter().flatten()).chain(p.eta.iter().flatten()) {
                assert!((-1.0..=2.0).contains(v));
            }
        }
        assert_ne!(d.point(10, 2), d.point(11, 2));
        assert_ne!(d.point(40, 2), d.point(41, 2));
    }

    #[test]
    fn validation_catches_bad_domains() {
        let mut d = SampleDomain::cube(2, Interval::new(0.0, 1.0), 10, 0);
        assert!(d.validate(2).is_ok());
        assert!(d.validate(3).is_err());
        d.samples = 0;
        assert!(matches!(d.validate(2), Err(Error::EmptySamples)));
        d.samples = 3;
        d.x[0] = Interval::new(1.0, 0.0);
        assert!(d.validate(2).is_err());
    }
}
