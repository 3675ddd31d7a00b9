//! Configuration, orchestration and persistence of simulation runs,
//! controller comparisons, seed sweeps and certificate reports.

mod certify;
mod compare;
mod config;
mod run;
mod sweep;

pub use certify::{certify, certify_model, sample_domain, CertifySummary};
pub use compare::{compare, compare_csv, CompareRow};
pub use config::{
    default_linear_test, CertifyConfig, ControllerConfig, ExperimentConfig, LyapunovConfig, Model, ModelConfig,
    ModelKind, OutputsConfig, PerNode, PhiConfig, SimConfig,
};
pub use run::{
    execute, execute_model, fmt_f64, lyapunov_csv, lyapunov_setup, run, summarize, trajectory_csv, write_json, write_outputs,
    LyapunovOutput, RunOutcome, RunSummary, GAIN_MONOTONE_TOL, GAIN_RATE_TOL, PLATEAU_TOL,
};
pub use sweep::{sweep, sweep_csv, SweepRow};
