use std::fmt;
use std::sync::Arc;

use crate::control::{ClosedLoop, Controller};
use crate::error::{Error, Result};
use crate::systems::DelayedNetwork;
use crate::trajectory::{ConvergenceCriterion, Trajectory};

use super::history::HistoryBuffer;
use super::rk4::{DelayedRhs, Integrator, SolverConfig};

pub type PhiFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Initial function `phi` on `[-T_d, 0]` (offsets relative to the start time).
#[derive(Clone)]
pub enum InitialFunction {
    Constant(Vec<f64>),
    Function { dim: usize, func: PhiFn },
}

impl fmt::Debug for InitialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialFunction::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            InitialFunction::Function { dim, .. } => f.debug_struct("Function").field("dim", dim).finish_non_exhaustive(),
        }
    }
}

impl InitialFunction {
    pub fn function(dim: usize, func: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        InitialFunction::Function {
            dim,
            func: Arc::new(func),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialFunction::Constant(v) => v.len(),
            InitialFunction::Function { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, theta: f64, out: &mut [f64]) {
        match self {
            InitialFunction::Constant(v) => out.copy_from_slice(v),
            InitialFunction::Function { func, .. } => func(theta, out),
        }
    }
}

/// Integrates the closed loop from `t = 0` to `cfg.horizon`.
pub fn simulate(
    network: &DelayedNetwork,
    controller: &Controller,
    phi: &InitialFunction,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    simulate_with(network, controller, phi, cfg, ConvergenceCriterion::default(), |_, _| {})
}

/// Like [`simulate`], calling `on_record(t, history)` at every recorded sample.
pub fn simulate_with(
    network: &DelayedNetwork,
    controller: &Controller,
    phi: &InitialFunction,
    cfg: &SolverConfig,
    criterion: ConvergenceCriterion,
    mut on_record: impl FnMut(f64, &HistoryBuffer),
) -> Result<Trajectory> {
    cfg.validate()?;
    Error::check_dim("initial function", network.n(), phi.dim())?;
    let closed = ClosedLoop::new(network, controller)?;
    cfg.check_against(&closed)?;
    let n = network.n();
    let init = |theta: f64, out: &mut [f64]| closed.initial_state(&|s, o| phi.eval(s, o), theta, out);
    let mut integ = Integrator::new(&closed, 0.0, cfg.h, closed.window(), init)?;

    let steps = cfg.steps();
    let cap = steps / cfg.record_stride + 2;
    let (mut times, mut states, mut gains) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    let mut record = |integ: &Integrator<'_, ClosedLoop<'_>>| {
        let s = integ.state();
        times.push(integ.time());
        states.push(s[..n].to_vec());
        gains.push(closed.gains_of(s).to_vec());
        on_record(integ.time(), integ.history());
    };
    record(&integ);
    for step in 1..=steps {
        integ.step_with(|s| closed.clamp_gains(s))?;
        if step % cfg.record_stride == 0 || step == steps {
            record(&integ);
        }
    }
    debug_assert_eq!(closed.dim(), integ.state().len());
    Ok(Trajectory::new(times, states, gains, criterion))
}
