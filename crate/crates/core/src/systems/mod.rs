//! Network models: generic delayed networks, the SIS epidemic model, linear
//! test networks and the scale-free coupling generator.

mod delay;
mod graph;
mod linear;
mod network;
mod sis;

pub use delay::{max_delay, max_rate_bound, DelayFn, DelaySpec};
pub use graph::{generate_scale_free, CouplingGraph};
pub use linear::{output_feedback_demo, LinearNetwork};
pub use network::{DelayedNetwork, DriftFn, Feedback, FeedbackForm, InputMatrix, MatrixFn, OutputFn};
pub use sis::{check_box_invariance, sis_drift, sis_network, BoxInvariance, BoxViolation, SisVirtual, BOX_TOL};
