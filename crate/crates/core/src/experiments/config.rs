use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificates::{drift_column_allowance, ConstantJacobian, Interval, SampleDomain, DEFAULT_SAMPLES};
use crate::control::{Controller, GainState};
use crate::dde::{InitialFunction, SolverConfig};
use crate::error::{Error, Result};
use crate::systems::{
    generate_scale_free, output_feedback_demo, sis_network, CouplingGraph, DelayedNetwork, LinearNetwork,
};

/// A scalar applied to every node, or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerNode {
    pub fn expand(&self, n: usize, field: &str) -> Result<Vec<f64>> {
        match self {
            PerNode::Scalar(v) => Ok(vec![*v; n]),
            PerNode::Vector(v) if v.len() == n => Ok(v.clone()),
            PerNode::Vector(v) => Err(Error::config(field, format!("expected {n} values, got {}", v.len()))),
        }
    }
}

impl From<f64> for PerNode {
    fn from(v: f64) -> Self {
        PerNode::Scalar(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Sis {
        n: usize,
        m: usize,
        graph_seed: u64,
        coupling_scale: f64,
        delay: f64,
    },
    LinearTest {
        #[serde(default)]
        a0: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        delayed: Option<Vec<Vec<Vec<f64>>>>,
        #[serde(default)]
        delays: Option<Vec<f64>>,
        #[serde(default)]
        input: Option<Vec<Vec<f64>>>,
    },
    OutputFeedbackDemo,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    Adaptive {
        a: PerNode,
        b: PerNode,
        t_k: PerNode,
        k0: PerNode,
        #[serde(default)]
        k_max: Option<PerNode>,
        #[serde(default)]
        allow_long_measurement_delay: bool,
    },
    Fixed {
        k_fixed: PerNode,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiConfig {
    /// Constant history with each component drawn uniformly from `[lo, hi]`.
    UniformConst { lo: f64, hi: f64, seed: u64 },
    Constant { value: PerNode },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub h: f64,
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    pub phi: PhiConfig,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    /// Weights `v`; defaults to all ones.
    #[serde(default)]
    pub weights: Option<PerNode>,
    /// Delayed-Jacobian bound; derived from the model when absent.
    #[serde(default)]
    pub a: Option<f64>,
    /// Decay margin used for the default gate.
    #[serde(default = "one")]
    pub c: f64,
    /// Gain gate; defaults to the required gain bound for `(a, c, v)`.
    #[serde(default)]
    pub gate: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            weights: None,
            a: None,
            c: 1.0,
            gate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_lyapunov: bool,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    /// Write the long-form trajectory CSV.
    #[serde(default = "yes")]
    pub trajectory_csv: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            dir: None,
            emit_lyapunov: false,
            lyapunov: LyapunovConfig::default(),
            trajectory_csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// State range sampled for `x`, `y`, `xi` and `eta`; model default when absent.
    #[serde(default)]
    pub x_range: Option<[f64; 2]>,
    #[serde(default = "default_t_range")]
    pub t_range: [f64; 2],
    /// Search weights by linear programming instead of using all ones.
    #[serde(default)]
    pub find_weights: bool,
    #[serde(default = "default_safety")]
    pub a_safety: f64,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_t_range() -> [f64; 2] {
    [0.0, 100.0]
}

fn default_safety() -> f64 {
    crate::certificates::DEFAULT_A_SAFETY
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            x_range: None,
            t_range: default_t_range(),
            find_weights: false,
            a_safety: default_safety(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    /// Seeds used by `compare` and `sweep`.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

/// A network together with what is known about its structure.
pub struct Model {
    pub network: DelayedNetwork,
    pub kind: ModelKind,
}

pub enum ModelKind {
    Sis(Arc<CouplingGraph>),
    Linear(LinearNetwork),
    OutputDemo,
    Custom,
}

impl Model {
    pub fn custom(network: DelayedNetwork) -> Self {
        Self {
            network,
            kind: ModelKind::Custom,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Sis(_) => "sis",
            ModelKind::Linear(_) => "linear_test",
            ModelKind::OutputDemo => "output_feedback_demo",
            ModelKind::Custom => "custom",
        }
    }

    /// Default sampling range of the state for certificates.
    pub fn default_x_range(&self) -> [f64; 2] {
        match self.kind {
            ModelKind::Sis(_) => [0.0, 1.0],
            _ => [-1.0, 1.0],
        }
    }

    /// Bound `a` on the delayed Jacobian entries (and, for linear models, on
    /// the drift column allowance for weights `v`), when known in closed form.
    pub fn known_delay_bound(&self, v: &[f64]) -> Result<Option<f64>> {
        match &self.kind {
            ModelKind::Sis(g) => Ok(Some(g.max_weight())),
            ModelKind::Linear(lin) => {
                let delayed = lin.delayed.iter().flat_map(|m| m.iter()).map(|x| x.abs()).fold(0.0, f64::max);
                let jac = ConstantJacobian {
                    d_xi: lin.drift.clone(),
                    d_eta: lin.delayed.clone(),
                };
                let dom = SampleDomain::cube(lin.n(), Interval::new(0.0, 0.0), 1, 0);
                let allowance = drift_column_allowance(&jac, &dom, v, self.network.rate_bound())?;
                Ok(Some(delayed.max(allowance)))
            }
            _ => Ok(None),
        }
    }
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(field, "expected a non-empty square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Three-node constant-coefficient test network: column sums of `A_0` are
/// positive, so it diverges without feedback.
pub fn default_linear_test() -> LinearNetwork {
    LinearNetwork::new(
        DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.1, 0.1, 0.4, 0.2, 0.2, 0.1, 0.3]),
        vec![DMatrix::from_row_slice(3, 3, &[0.1, 0.2, 0.0, 0.0, 0.1, 0.2, 0.2, 0.0, 0.1])],
        vec![1.0],
        -DMatrix::identity(3, 3),
    )
    .expect("static dimensions")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies a seed to every seeded component (graph and initial function).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        if let ModelConfig::Sis { graph_seed, .. } = &mut cfg.model {
            *graph_seed = seed;
        }
        if let PhiConfig::UniformConst { seed: s, .. } = &mut cfg.sim.phi {
            *s = seed;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        SolverConfig::new(self.sim.h, self.sim.horizon, self.sim.record_stride)?;
        match &self.model {
            ModelConfig::Sis {
                n,
                m,
                coupling_scale,
                delay,
                ..
            } => {
                if *m == 0 || *n <= *m {
                    return Err(Error::config("model.n", format!("need n > m >= 1, got n = {n}, m = {m}")));
                }
                if !(coupling_scale.is_finite() && *coupling_scale >= 0.0) {
                    return Err(Error::config("model.coupling_scale", "must be finite and >= 0"));
                }
                if !(delay.is_finite() && *delay > 0.0) {
                    return Err(Error::config("model.delay", "must be positive"));
                }
            }
            ModelConfig::Custom => {
                return Err(Error::config(
                    "model.type",
                    "custom models are built in code and cannot be loaded from a config file",
                ))
            }
            _ => {}
        }
        if let PhiConfig::UniformConst { lo, hi, .. } = &self.sim.phi {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::config("sim.phi", format!("need finite lo <= hi, got [{lo}, {hi}]")));
            }
        }
        let c = &self.certify;
        if c.samples < 3 {
            return Err(Error::config("certify.samples", "need at least 3 samples"));
        }
        if !(c.a_safety >= 1.0) {
            return Err(Error::config("certify.a_safety", "must be >= 1"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        match &self.model {
            ModelConfig::Sis {
                n,
                m,
                graph_seed,
                coupling_scale,
                delay,
            } => {
                let graph = Arc::new(generate_scale_free(*n, *m, *graph_seed, *coupling_scale)?);
                Ok(Model {
                    network: sis_network(graph.clone(), *delay)?,
                    kind: ModelKind::Sis(graph),
                })
            }
            ModelConfig::LinearTest {
                a0,
                delayed,
                delays,
                input,
            } => {
                let base = default_linear_test();
                let drift = match a0 {
                    Some(rows) => matrix(rows, "model.a0")?,
                    None => base.drift.clone(),
                };
                let n = drift.nrows();
                let delayed = match delayed {
                    Some(ms) => ms.iter().map(|m| matrix(m, "model.delayed")).collect::<Result<Vec<_>>>()?,
                    None => base.delayed.clone(),
                };
                let delays = delays.clone().unwrap_or_else(|| base.delays.clone());
                let input = match input {
                    Some(rows) => matrix(rows, "model.input")?,
                    None => -DMatrix::identity(n, n),
                };
                let lin = LinearNetwork::new(drift, delayed, delays, input)
                    .map_err(|e| Error::config("model", e.to_string()))?;
                Ok(Model {
                    network: lin.network()?,
                    kind: ModelKind::Linear(lin),
                })
            }
            ModelConfig::OutputFeedbackDemo => Ok(Model {
                network: output_feedback_demo()?,
                kind: ModelKind::OutputDemo,
            }),
            ModelConfig::Custom => Err(Error::config("model.type", "custom models are built in code")),
        }
    }

    pub fn build_controller(&self, n: usize) -> Result<Controller> {
        match &self.controller {
            ControllerConfig::Adaptive {
                a,
                b,
                t_k,
                k0,
                k_max,
                allow_long_measurement_delay,
            } => {
                let gains = GainState::new(
                    a.expand(n, "controller.a")?,
                    b.expand(n, "controller.b")?,
                    t_k.expand(n, "controller.t_k")?,
                    k0.expand(n, "controller.k0")?,
                )?;
                let k_max = k_max.as_ref().map(|k| k.expand(n, "controller.k_max")).transpose()?;
                Ok(Controller::Adaptive {
                    gains,
                    k_max,
                    allow_long_measurement_delay: *allow_long_measurement_delay,
                })
            }
            ControllerConfig::Fixed { k_fixed } => Controller::fixed(k_fixed.expand(n, "controller.k_fixed")?),
        }
    }

    pub fn initial_function(&self, n: usize) -> Result<InitialFunction> {
        Ok(match &self.sim.phi {
            PhiConfig::UniformConst { lo, hi, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                InitialFunction::Constant((0..n).map(|_| if lo == hi { *lo } else { rng.gen_range(*lo..=*hi) }).collect())
            }
            PhiConfig::Constant { value } => InitialFunction::Constant(value.expand(n, "sim.phi.value")?),
            PhiConfig::Zero => InitialFunction::Constant(vec![0.0; n]),
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        SolverConfig::new(self.sim.h, self.sim.horizon, self.sim.record_stride)
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.controller, ControllerConfig::Adaptive { .. })
    }
}
