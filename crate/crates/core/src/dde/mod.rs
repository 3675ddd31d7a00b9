//! Fixed-step integration of delay differential equations.
//!
//! States in the past are reconstructed from a [`HistoryBuffer`] of knots on
//! the step grid; the initial function seeds the buffer before the first step.

mod history;
mod rk4;
mod simulate;

pub use history::HistoryBuffer;
pub use rk4::{step_rk4, DelayedRhs, Integrator, Lagged, Rk4Stepper, SolverConfig};
pub use simulate::{simulate, simulate_with, InitialFunction, PhiFn};
