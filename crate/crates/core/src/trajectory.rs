use serde::{Deserialize, Serialize};

/// Threshold on `|x_i|` below which a node counts as converged.
pub const DEFAULT_X_TOL: f64 = 1e-3;
/// Trailing fraction of the horizon over which convergence is judged.
pub const DEFAULT_FINAL_FRACTION: f64 = 0.05;
/// Trailing fraction of the horizon over which gain plateaus are judged.
pub const PLATEAU_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub x_tol: f64,
    pub final_fraction: f64,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            x_tol: DEFAULT_X_TOL,
            final_fraction: DEFAULT_FINAL_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    /// Largest `|x_i|` at the final recorded sample.
    pub max_final_x: f64,
    pub mean_final_gain: f64,
    /// Earliest recorded time after which every `|x_i|` stays below `x_tol`.
    pub t_convergence: Option<f64>,
    pub x_tol: f64,
    pub final_fraction: f64,
    pub converged_all: bool,
}

/// Recorded samples of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Gains per sample; constant for fixed-gain runs.
    pub gains: Vec<Vec<f64>>,
    pub lyapunov_vs: Option<Vec<f64>>,
    pub lyapunov_vm: Option<Vec<f64>>,
    pub converged: Vec<bool>,
    pub summary: TrajectorySummary,
}

impl Trajectory {
    /// Builds a trajectory and derives flags and summary from the samples.
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>, gains: Vec<Vec<f64>>, criterion: ConvergenceCriterion) -> Self {
        let mut traj = Self {
            times,
            states,
            gains,
            lyapunov_vs: None,
            lyapunov_vm: None,
            converged: Vec::new(),
            summary: TrajectorySummary {
                max_final_x: 0.0,
                mean_final_gain: 0.0,
                t_convergence: None,
                x_tol: criterion.x_tol,
                final_fraction: criterion.final_fraction,
                converged_all: false,
            },
        };
        traj.evaluate(criterion);
        traj
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the first sample inside the trailing `fraction` of the run.
    pub fn tail_start(&self, fraction: f64) -> usize {
        let (Some(&t0), Some(&t1)) = (self.times.first(), self.times.last()) else {
            return 0;
        };
        let cut = t1 - fraction * (t1 - t0);
        self.times.partition_point(|&t| t < cut - 1e-9 * (t1 - t0).abs().max(1.0))
    }

    /// Recomputes convergence flags and summary statistics.
    pub fn evaluate(&mut self, criterion: ConvergenceCriterion) {
        let n = self.n();
        let tail = self.tail_start(criterion.final_fraction);
        self.converged = (0..n)
            .map(|i| {
                let peak = self.states[tail..].iter().map(|x| x[i].abs()).fold(0.0, f64::max);
                !self.states.is_empty() && peak < criterion.x_tol
            })
            .collect();
        let max_final_x = self.states.last().map_or(0.0, |x| x.iter().map(|v| v.abs()).fold(0.0, f64::max));
        let mean_final_gain = self
            .gains
            .last()
            .filter(|g| !g.is_empty())
            .map_or(0.0, |g| g.iter().sum::<f64>() / g.len() as f64);
        // scan backwards for the last sample above tolerance
        let last_bad = self
            .states
            .iter()
            .rposition(|x| x.iter().any(|v| !(v.abs() < criterion.x_tol)));
        let t_convergence = match last_bad {
            None => self.times.first().copied(),
            Some(k) => self.times.get(k + 1).copied(),
        };
        self.summary = TrajectorySummary {
            max_final_x,
            mean_final_gain,
            t_convergence,
            x_tol: criterion.x_tol,
            final_fraction: criterion.final_fraction,
            converged_all: !self.converged.is_empty() && self.converged.iter().all(|c| *c),
        };
    }

    /// Largest spread `max k_i - min k_i` of any gain over the trailing
    /// `fraction` of the run.
    pub fn gain_variation(&self, fraction: f64) -> f64 {
        let tail = self.tail_start(fraction);
        let n = self.gains.first().map_or(0, Vec::len);
        (0..n)
            .map(|i| {
                let (lo, hi) = self.gains[tail..]
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g[i]), hi.max(g[i])));
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Nodes flagged as not converged.
    pub fn unconverged_nodes(&self) -> Vec<usize> {
        self.converged.iter().enumerate().filter(|(_, c)| !**c).map(|(i, _)| i).collect()
    }

    /// First recorded gain decrease larger than `slack`, as `(sample, node)`.
    pub fn first_gain_decrease(&self, slack: f64) -> Option<(usize, usize)> {
        self.gains.windows(2).enumerate().find_map(|(k, w)| {
            w[0].iter()
                .zip(&w[1])
                .position(|(a, b)| b - a < -slack)
                .map(|i| (k + 1, i))
        })
    }

    /// First recorded gain slope above `rate_caps[i] + slack`, as `(sample, node)`.
    pub fn first_rate_violation(&self, rate_caps: &[f64], slack: f64) -> Option<(usize, usize)> {
        self.gains.windows(2).zip(self.times.windows(2)).enumerate().find_map(|(k, (g, t))| {
            let dt = t[1] - t[0];
            (0..g[0].len())
                .find(|&i| (g[1][i] - g[0][i]) / dt > rate_caps[i] + slack)
                .map(|i| (k + 1, i))
        })
    }
}
