//! Simulation and certification of delayed networks under decentralized
//! adaptive high-gain feedback.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod certificates;
pub mod control;
pub mod dde;
pub mod error;
pub mod experiments;
pub mod lyapunov;
pub mod systems;
pub mod trajectory;

pub use error::{Error, Result};
