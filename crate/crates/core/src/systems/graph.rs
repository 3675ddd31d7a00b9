use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Nonnegative coupling weights `c_{i,j}` with a cached sparse row view.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    n: usize,
    seed: u64,
    weights: DMatrix<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl CouplingGraph {
    pub fn from_weights(weights: DMatrix<f64>, seed: u64) -> Result<Self> {
        let n = weights.nrows();
        Error::check_dim("coupling matrix columns", n, weights.ncols())?;
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::param(format!("coupling weights must be finite and nonnegative, found {w}")));
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter_map(|j| {
                        let w = weights[(i, j)];
                        (w != 0.0).then_some((j, w))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { n, seed, weights, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Nonzero entries of row `i` as `(j, c_ij)`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    /// Number of undirected edges, assuming a symmetric pattern.
    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.rows[i].iter().filter(|(j, _)| *j > i).count()).sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.weights == self.weights.transpose()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_weights(&self.weights * factor, self.seed)
    }

    /// Text export: a `# n=<n> seed=<seed>` header followed by one `i j weight`
    /// line per nonzero entry, row-major, 0-based.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# n={} seed={}\n", self.n, self.seed);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, w) in row {
                let _ = writeln!(s, "{i} {j} {w}");
            }
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::param("edge list is empty"))?;
        let (mut n, mut seed) = (None, None);
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("seed=") {
                seed = v.parse::<u64>().ok();
            }
        }
        let (n, seed) = match (header.starts_with('#'), n, seed) {
            (true, Some(n), Some(seed)) => (n, seed),
            _ => return Err(Error::param(format!("malformed edge list header `{header}`"))),
        };
        let mut weights = DMatrix::zeros(n, n);
        for (lineno, line) in lines.enumerate() {
            let parts: Vec<_> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [i, j, w] => i.parse::<usize>().ok().zip(j.parse::<usize>().ok()).zip(w.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some(((i, j), w)) if i < n && j < n => weights[(i, j)] = w,
                _ => return Err(Error::param(format!("malformed edge list line {}: `{line}`", lineno + 2))),
            }
        }
        Self::from_weights(weights, seed)
    }
}

/// Preferential-attachment (Barabási–Albert) graph with unit edges scaled by
/// `coupling`.
///
/// Starts from the complete graph on `m + 1` nodes; every further node links to
/// `m` distinct existing nodes drawn with probability proportional to degree.
pub fn generate_scale_free(n: usize, m: usize, seed: u64, coupling: f64) -> Result<CouplingGraph> {
    if m == 0 || n <= m {
        return Err(Error::param(format!("scale-free generator needs n > m >= 1, got n = {n}, m = {m}")));
    }
    if !(coupling.is_finite() && coupling >= 0.0) {
        return Err(Error::param(format!("coupling scale must be finite and nonnegative, got {coupling}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = DMatrix::<f64>::zeros(n, n);
    // each node appears once per incident edge end
    let mut ends: Vec<usize> = Vec::with_capacity(2 * m * n);
    for i in 0..=m {
        for j in (i + 1)..=m {
            adj[(i, j)] = 1.0;
            adj[(j, i)] = 1.0;
            ends.push(i);
            ends.push(j);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in (m + 1)..n {
        targets.clear();
        while targets.len() < m {
            let u = ends[rng.gen_range(0..ends.len())];
            if !targets.contains(&u) {
                targets.push(u);
            }
        }
        for &u in &targets {
            adj[(u, v)] = 1.0;
            adj[(v, u)] = 1.0;
            ends.push(u);
            ends.push(v);
        }
    }
    CouplingGraph::from_weights(adj * coupling, seed)
}
