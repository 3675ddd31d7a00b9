use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sampler::{MatrixField, SampleDomain, SamplePoint, VirtualJacobian};

/// Which weighted dominance inequality a report certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Column dominance of `dg/dxi` with delay terms `a r / (1 - d)`.
    VirtualColumn,
    /// Row dominance of `dg/dxi` with delay terms `a r`.
    VirtualRow,
    /// Column dominance of the input matrix `B`.
    InputMatrixColumn,
    /// Row dominance of the output Jacobian `dH/dx`.
    OutputMapRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominanceMode {
    Column,
    Row,
}

impl Condition {
    pub fn mode(self) -> DominanceMode {
        match self {
            Condition::VirtualColumn | Condition::InputMatrixColumn => DominanceMode::Column,
            Condition::VirtualRow | Condition::OutputMapRow => DominanceMode::Row,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstSample {
    /// Index into the sampling plan.
    pub index: usize,
    /// Column (or row) attaining the largest margin.
    pub component: usize,
    pub margin: f64,
    pub point: SamplePoint,
}

/// Outcome of a sampled dominance check.
///
/// `c_star` is minus the largest normalized margin over all checked samples
/// and components; the condition holds on the samples with decay rate
/// `c_star` iff `c_star > 0`. Verdicts are certified on samples only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub condition: Condition,
    pub weight: Vec<f64>,
    pub c_star: f64,
    pub worst_sample: Option<WorstSample>,
    pub samples_checked: usize,
    pub a_bound: f64,
    pub d_bound: f64,
    pub r: usize,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.c_star > 0.0
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed() {
            "certified on samples"
        } else {
            "violated on samples"
        }
    }
}

/// Normalized margins of every column (or row) of `m`:
/// column j: `[v_j (s + m_jj) + sum_{i != j} v_i (s + |m_ij|)] / v_j`,
/// row i: `[(s + m_ii) w_i + sum_{j != i} (s + |m_ij|) w_j] / w_i`.
pub fn margins(m: &DMatrix<f64>, weights: &[f64], offset: f64, mode: DominanceMode) -> Vec<f64> {
    let n = m.nrows();
    (0..n)
        .map(|p| {
            let mut acc = 0.0;
            for q in 0..n {
                let entry = match mode {
                    DominanceMode::Column => m[(q, p)],
                    DominanceMode::Row => m[(p, q)],
                };
                let term = if q == p { offset + entry } else { offset + entry.abs() };
                acc += weights[q] * term;
            }
            acc / weights[p]
        })
        .collect()
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    Error::check_dim("weight vector", n, weights.len())?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::param(format!("weights must be element-wise positive, found {w}")));
    }
    Ok(())
}

/// Largest margin over the sampling plan, reduced with a fixed tie-break so the
/// result does not depend on thread scheduling.
fn worst_margin(
    domain: &SampleDomain,
    r: usize,
    weights: &[f64],
    offset: f64,
    mode: DominanceMode,
    matrix_at: impl Fn(&SamplePoint) -> DMatrix<f64> + Sync,
) -> Result<(f64, usize, usize)> {
    let best = (0..domain.samples)
        .into_par_iter()
        .map(|k| {
            let p = domain.point(k, r);
            let m = matrix_at(&p);
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteJacobian { sample: k });
            }
            let (comp, margin) = margins(&m, weights, offset, mode)
                .into_iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
            Ok((margin, k, comp))
        })
        .try_reduce(
            || (f64::NEG_INFINITY, usize::MAX, 0),
            |a, b| Ok(if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;
    Ok(best)
}

fn report(
    condition: Condition,
    domain: &SampleDomain,
    r: usize,
    weights: &[f64],
    worst: (f64, usize, usize),
    a_bound: f64,
    d_bound: f64,
) -> CertificateReport {
    let (margin, index, component) = worst;
    CertificateReport {
        condition,
        weight: weights.to_vec(),
        c_star: -margin,
        worst_sample: Some(WorstSample {
            index,
            component,
            margin,
            point: domain.point(index, r),
        }),
        samples_checked: domain.samples,
        a_bound,
        d_bound,
        r,
    }
}

/// Column dominance of `dg/dxi` with delay allowance `a r / (1 - d)`.
pub fn check_virtual_column(
    jac: &dyn VirtualJacobian,
    domain: &SampleDomain,
    v: &[f64],
    a: f64,
    d: f64,
) -> Result<CertificateReport> {
    let (n, r) = (jac.n(), jac.r());
    check_weights(v, n)?;
    domain.validate(n)?;
    if !(0.0..1.0).contains(&d) {
        return Err(Error::param(format!("delay derivative bound must lie in [0, 1), got {d}")));
    }
    if !(a >= 0.0) {
        return Err(Error::param(format!("delayed-Jacobian bound must be >= 0, got {a}")));
    }
    let offset = a * r as f64 / (1.0 - d);
    let worst = worst_margin(domain, r, v, offset, DominanceMode::Column, |p| jac.d_xi(p))?;
    Ok(report(Condition::VirtualColumn, domain, r, v, worst, a, d))
}

/// Row dominance of `dg/dxi` with delay allowance `a r`; the delay-derivative
/// bound does not enter.
pub fn check_virtual_row(
    jac: &dyn VirtualJacobian,
    domain: &SampleDomain,
    w: &[f64],
    a: f64,
) -> Result<CertificateReport> {
    let (n, r) = (jac.n(), jac.r());
    check_weights(w, n)?;
    domain.validate(n)?;
    if !(a >= 0.0) {
        return Err(Error::param(format!("delayed-Jacobian bound must be >= 0, got {a}")));
    }
    let offset = a * r as f64;
    let worst = worst_margin(domain, r, w, offset, DominanceMode::Row, |p| jac.d_xi(p))?;
    Ok(report(Condition::VirtualRow, domain, r, w, worst, a, 0.0))
}

/// Weighted column dominance of the input matrix `B(t, x, y)`.
pub fn check_input_matrix(field: &dyn MatrixField, domain: &SampleDomain, v: &[f64]) -> Result<CertificateReport> {
    let (n, r) = (field.n(), field.r());
    check_weights(v, n)?;
    domain.validate(n)?;
    let worst = worst_margin(domain, r, v, 0.0, DominanceMode::Column, |p| field.eval(p))?;
    Ok(report(Condition::InputMatrixColumn, domain, r, v, worst, 0.0, 0.0))
}

/// Weighted row dominance of the output Jacobian `dH/dx (t, x, y)`.
pub fn check_output_map(field: &dyn MatrixField, domain: &SampleDomain, w: &[f64]) -> Result<CertificateReport> {
    let (n, r) = (field.n(), field.r());
    check_weights(w, n)?;
    domain.validate(n)?;
    let worst = worst_margin(domain, r, w, 0.0, DominanceMode::Row, |p| field.eval(p))?;
    Ok(report(Condition::OutputMapRow, domain, r, w, worst, 0.0, 0.0))
}

/// Sampled estimate of `a`: the largest `|dg_i/deta_{l,j}|` seen.
///
/// This is a lower estimate of the true supremum.
pub fn estimate_a(jac: &dyn VirtualJacobian, domain: &SampleDomain) -> Result<f64> {
    let (n, r) = (jac.n(), jac.r());
    domain.validate(n)?;
    (0..domain.samples)
        .into_par_iter()
        .map(|k| {
            let p = domain.point(k, r);
            let mut best = 0.0f64;
            for l in 0..r {
                let m = jac.d_eta(&p, l);
                for v in m.iter() {
                    if !v.is_finite() {
                        return Err(Error::NonFiniteJacobian { sample: k });
                    }
                    best = best.max(v.abs());
                }
            }
            Ok(best)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Smallest `a` for which the drift Jacobian `M = df/dxi` satisfies
/// `v_j M_jj + sum_{i != j} v_i |M_ij| <= (a r / (1 - d)) v_j` at every sample.
pub fn drift_column_allowance(
    jac: &dyn VirtualJacobian,
    domain: &SampleDomain,
    v: &[f64],
    d: f64,
) -> Result<f64> {
    let (n, r) = (jac.n(), jac.r());
    check_weights(v, n)?;
    domain.validate(n)?;
    if r == 0 {
        return Ok(0.0);
    }
    let (worst, _, _) = worst_margin(domain, r, v, 0.0, DominanceMode::Column, |p| jac.d_xi(p))?;
    Ok((worst * (1.0 - d) / r as f64).max(0.0))
}

/// Row analogue of [`drift_column_allowance`] with allowance `a r w_i`.
pub fn drift_row_allowance(jac: &dyn VirtualJacobian, domain: &SampleDomain, w: &[f64]) -> Result<f64> {
    let (n, r) = (jac.n(), jac.r());
    check_weights(w, n)?;
    domain.validate(n)?;
    if r == 0 {
        return Ok(0.0);
    }
    let (worst, _, _) = worst_margin(domain, r, w, 0.0, DominanceMode::Row, |p| jac.d_xi(p))?;
    Ok((worst / r as f64).max(0.0))
}
