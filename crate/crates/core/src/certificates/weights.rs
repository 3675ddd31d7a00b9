use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dominance::{margins, DominanceMode};

/// Upper bound on each weight; weights are normalized to lie in `[1, V_MAX]`.
pub const DEFAULT_WEIGHT_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub weights: Vec<f64>,
    /// Decay margin achieved by `weights` on every supplied matrix.
    pub c: f64,
}

/// Searches for positive weights making every sampled matrix weighted
/// column- (or row-) dominant, maximizing the common decay margin `c`.
///
/// For fixed `c` the inequalities are linear in the weights, so the largest
/// feasible `c` is found by bisection over LP feasibility problems; among the
/// weights achieving it, the one with the smallest sum is returned. `offset`
/// is added to every entry as in the delay-augmented conditions (zero for
/// plain matrix dominance). Returns `Ok(None)` when no positive `c` is
/// feasible.
pub fn find_weights(
    matrices: &[DMatrix<f64>],
    mode: DominanceMode,
    offset: f64,
    weight_cap: f64,
) -> Result<Option<WeightSolution>> {
    let first = matrices.first().ok_or(Error::EmptySamples)?;
    let n = first.nrows();
    for m in matrices {
        Error::check_dim("sample matrix rows", n, m.nrows())?;
        Error::check_dim("sample matrix columns", n, m.ncols())?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("sample matrices must be finite"));
        }
    }
    if !(weight_cap >= 1.0) {
        return Err(Error::param(format!("weight cap must be >= 1, got {weight_cap}")));
    }
    let mut unique: Vec<&DMatrix<f64>> = Vec::new();
    for m in matrices {
        if !unique.contains(&m) {
            unique.push(m);
        }
    }

    // Off-diagonal terms are nonnegative, so c cannot exceed -(offset + diag).
    let c_hi = unique
        .iter()
        .flat_map(|m| (0..n).map(move |p| -(offset + m[(p, p)])))
        .fold(f64::INFINITY, f64::min);
    if !(c_hi > 0.0) {
        return Ok(None);
    }

    let problem = WeightLp {
        matrices: &unique,
        n,
        mode,
        offset,
        cap: weight_cap,
    };
    if let Some(v) = problem.solve_at(c_hi)? {
        return Ok(Some(problem.finish(v)));
    }
    let mut lo = c_hi * 1e-9;
    let mut best = match problem.solve_at(lo)? {
        Some(v) => v,
        None => return Ok(None),
    };
    let mut hi = c_hi;
    while hi - lo > 1e-9 * c_hi {
        let mid = 0.5 * (lo + hi);
        match problem.solve_at(mid)? {
            Some(v) => {
                lo = mid;
                best = v;
            }
            None => hi = mid,
        }
    }
    Ok(Some(problem.finish(best)))
}

struct WeightLp<'a> {
    matrices: &'a [&'a DMatrix<f64>],
    n: usize,
    mode: DominanceMode,
    offset: f64,
    cap: f64,
}

impl WeightLp<'_> {
    /// Coefficients of the inequality for component `p` of matrix `m` at rate `c`.
    fn row(&self, m: &DMatrix<f64>, p: usize, c: f64) -> Vec<f64> {
        (0..self.n)
            .map(|q| {
                let entry = match self.mode {
                    DominanceMode::Column => m[(q, p)],
                    DominanceMode::Row => m[(p, q)],
                };
                if q == p {
                    self.offset + entry + c
                } else {
                    self.offset + entry.abs()
                }
            })
            .collect()
    }

    /// Minimum-sum feasible weights at rate `c`, via constraint generation.
    fn solve_at(&self, c: f64) -> Result<Option<Vec<f64>>> {
        let total = self.matrices.len() * self.n;
        let mut active = vec![false; total];
        // seed with the least dominant matrix per component
        for p in 0..self.n {
            let worst = (0..self.matrices.len())
                .max_by(|&a, &b| {
                    let sa: f64 = self.row(self.matrices[a], p, c).iter().sum();
                    let sb: f64 = self.row(self.matrices[b], p, c).iter().sum();
                    sa.total_cmp(&sb)
                })
                .unwrap_or(0);
            active[worst * self.n + p] = true;
        }
        loop {
            let mut lp = Problem::new(OptimizationDirection::Minimize);
            let vars: Vec<_> = (0..self.n).map(|_| lp.add_var(1.0, (1.0, self.cap))).collect();
            for (idx, _) in active.iter().enumerate().filter(|(_, on)| **on) {
                let coefs = self.row(self.matrices[idx / self.n], idx % self.n, c);
                let expr: Vec<_> = vars.iter().copied().zip(coefs).collect();
                lp.add_constraint(expr.as_slice(), ComparisonOp::Le, 0.0);
            }
            let solution = match lp.solve() {
                Ok(outcome) => outcome
                    .into_solution()
                    .map_err(|e| Error::Solver(format!("interrupted: {:?}", e.termination_reason())))?,
                Err(microlp::Error::Infeasible) => return Ok(None),
                Err(e) => return Err(Error::Solver(e.to_string())),
            };
            let v: Vec<f64> = vars.iter().map(|&x| solution.var_value(x)).collect();
            let scale: f64 = v.iter().sum();
            let mut violated: Vec<(f64, usize)> = (0..total)
                .filter(|&idx| !active[idx])
                .filter_map(|idx| {
                    let coefs = self.row(self.matrices[idx / self.n], idx % self.n, c);
                    let lhs: f64 = coefs.iter().zip(&v).map(|(a, b)| a * b).sum();
                    (lhs > 1e-9 * scale).then_some((lhs, idx))
                })
                .collect();
            if violated.is_empty() {
                return Ok(Some(v));
            }
            violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, idx) in violated.iter().take(64) {
                active[idx] = true;
            }
        }
    }

    fn finish(&self, weights: Vec<f64>) -> WeightSolution {
        let worst = self
            .matrices
            .iter()
            .flat_map(|m| margins(m, &weights, self.offset, self.mode))
            .fold(f64::NEG_INFINITY, f64::max);
        WeightSolution { weights, c: -worst }
    }
}

/// Perron-style weight guess for a single constant matrix: the dominant
/// eigenvector of `|offdiag| + offset` (transposed for column mode), obtained
/// by power iteration. Used as a cross-check on the LP search.
pub fn perron_weights(m: &DMatrix<f64>, mode: DominanceMode, offset: f64, iterations: usize) -> Vec<f64> {
    let n = m.nrows();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[(i, j)] = offset + m[(i, j)].abs();
            }
        }
    }
    if mode == DominanceMode::Column {
        a = a.transpose();
    }
    // shift keeps the iteration primitive when the pattern is reducible
    a += DMatrix::<f64>::identity(n, n);
    let mut v = vec![1.0; n];
    for _ in 0..iterations {
        let next: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * v[j]).sum()).collect();
        let lo = next.iter().copied().fold(f64::INFINITY, f64::min);
        v = next.iter().map(|x| x / lo).collect();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn identity_case_gives_unit_weights() {
        let sol = find_weights(&[-DMatrix::identity(2, 2)], DominanceMode::Column, 0.0, DEFAULT_WEIGHT_CAP)
            .unwrap()
            .unwrap();
        assert_eq!(sol.weights, vec![1.0, 1.0]);
        assert_eq!(sol.c, 1.0);
    }

    #[test]
    fn lower_triangular_example_is_feasible() {
        let b = m2(-2.0, 0.0, 3.0, -1.0);
        let sol = find_weights(std::slice::from_ref(&b), DominanceMode::Column, 0.0, DEFAULT_WEIGHT_CAP)
            .unwrap()
            .unwrap();
        assert!(sol.c >= 1.0 - 1e-9, "c = {}", sol.c);
        // hand check: v = (1, 0.1) gives column margins (-1.7, -1)
        let hand = margins(&b, &[1.0, 0.1], 0.0, DominanceMode::Column);
        assert!((hand[0] + 1.7).abs() < 1e-12 && (hand[1] + 1.0).abs() < 1e-12);
        for mg in margins(&b, &sol.weights, 0.0, DominanceMode::Column) {
            assert!(mg <= -sol.c + 1e-12);
        }
    }

    #[test]
    fn zero_diagonal_with_positive_offdiagonal_is_infeasible() {
        let b = m2(0.0, 0.0, 1.0, -1.0);
        assert!(find_weights(&[b], DominanceMode::Column, 0.0, DEFAULT_WEIGHT_CAP).unwrap().is_none());
    }

    #[test]
    fn mutually_coupled_matrix_is_infeasible() {
        let b = m2(-1.0, 2.0, 2.0, -1.0);
        assert!(find_weights(&[b], DominanceMode::Row, 0.0, DEFAULT_WEIGHT_CAP).unwrap().is_none());
    }

    #[test]
    fn empty_sample_set_is_an_error() {
        assert!(matches!(
            find_weights(&[], DominanceMode::Row, 0.0, DEFAULT_WEIGHT_CAP),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn many_samples_handled_by_constraint_generation() {
        let mats: Vec<_> = (0..400)
            .map(|k| {
                let s = (k as f64 * 0.37).sin();
                DMatrix::from_row_slice(3, 3, &[-3.0 + s, 0.5, 0.2 * s.abs(), 1.0, -2.5, 0.3, 0.1, 0.4 * s, -2.0])
            })
            .collect();
        for mode in [DominanceMode::Column, DominanceMode::Row] {
            let sol = find_weights(&mats, mode, 0.0, DEFAULT_WEIGHT_CAP).unwrap().unwrap();
            assert!(sol.c > 0.0);
            for m in &mats {
                for mg in margins(m, &sol.weights, 0.0, mode) {
                    assert!(mg <= -sol.c + 1e-12);
                }
            }
        }
    }

    #[test]
    fn lp_optimum_beats_perron_guess_on_a_constant_matrix() {
        let b = DMatrix::from_row_slice(3, 3, &[-4.0, 1.0, 0.5, 2.0, -3.0, 0.2, 0.3, 1.0, -2.0]);
        let guess = perron_weights(&b, DominanceMode::Column, 0.0, 200);
        let guess_c = -margins(&b, &guess, 0.0, DominanceMode::Column).into_iter().fold(f64::MIN, f64::max);
        let sol = find_weights(&[b], DominanceMode::Column, 0.0, DEFAULT_WEIGHT_CAP).unwrap().unwrap();
        assert!(guess_c > 0.0);
        assert!(sol.c >= guess_c - 1e-7, "lp {} vs perron {}", sol.c, guess_c);
    }
}
