use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificates::required_gain_bound;
use crate::dde::simulate;
use crate::error::{Error, Result};
use crate::lyapunov::{monitor_decrease, simulate_monitored, DecreaseReport, FunctionalConfig};
use crate::systems::{check_box_invariance, BoxInvariance, FeedbackForm};
use crate::trajectory::{Trajectory, PLATEAU_FRACTION};

use super::config::{ExperimentConfig, Model, ModelKind};

/// Slack on recorded gain decreases.
pub const GAIN_MONOTONE_TOL: f64 = 1e-12;
/// Slack on recorded gain slopes above the rate cap.
pub const GAIN_RATE_TOL: f64 = 1e-9;
/// Largest gain variation over the trailing window that counts as a plateau.
pub const PLATEAU_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub controller: String,
    pub n: usize,
    pub h: f64,
    pub horizon: f64,
    pub samples: usize,
    pub max_final_x: f64,
    pub mean_final_gain: f64,
    pub t_convergence: Option<f64>,
    pub x_tol: f64,
    pub final_fraction: f64,
    pub converged_all: bool,
    pub converged: Vec<bool>,
    pub unconverged_nodes: Vec<usize>,
    pub gain_variation: f64,
    pub plateau_fraction: f64,
    pub gains_plateaued: bool,
    pub gains_monotone: bool,
    pub gain_rate_within_cap: bool,
    pub box_invariance: Option<BoxInvariance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOutput {
    pub weights: Vec<f64>,
    pub a: f64,
    pub d: f64,
    pub gate: f64,
    pub report: Option<DecreaseReport>,
}

pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub summary: RunSummary,
    pub lyapunov: Option<LyapunovOutput>,
}

pub fn summarize(cfg: &ExperimentConfig, model: &Model, traj: &Trajectory) -> Result<RunSummary> {
    let controller = cfg.build_controller(model.network.n())?;
    let variation = traj.gain_variation(PLATEAU_FRACTION);
    Ok(RunSummary {
        model: model.name().to_string(),
        controller: if controller.is_adaptive() { "adaptive" } else { "fixed" }.to_string(),
        n: traj.n(),
        h: cfg.sim.h,
        horizon: cfg.sim.horizon,
        samples: traj.len(),
        max_final_x: traj.summary.max_final_x,
        mean_final_gain: traj.summary.mean_final_gain,
        t_convergence: traj.summary.t_convergence,
        x_tol: traj.summary.x_tol,
        final_fraction: traj.summary.final_fraction,
        converged_all: traj.summary.converged_all,
        converged: traj.converged.clone(),
        unconverged_nodes: traj.unconverged_nodes(),
        gain_variation: variation,
        plateau_fraction: PLATEAU_FRACTION,
        gains_plateaued: variation < PLATEAU_TOL,
        gains_monotone: traj.first_gain_decrease(GAIN_MONOTONE_TOL).is_none(),
        gain_rate_within_cap: traj.first_rate_violation(&controller.rate_caps(), GAIN_RATE_TOL).is_none()
            || !controller.is_adaptive(),
        box_invariance: matches!(model.kind, ModelKind::Sis(_)).then(|| check_box_invariance(traj)),
    })
}

/// Functional constants and gate for Lyapunov monitoring of `model`.
pub fn lyapunov_setup(cfg: &ExperimentConfig, model: &Model) -> Result<(FunctionalConfig, f64)> {
    let net = &model.network;
    if net.form() != FeedbackForm::StateFeedback {
        return Err(Error::config(
            "outputs.emit_lyapunov",
            "the delay functional is defined for state-feedback models only",
        ));
    }
    let n = net.n();
    let lcfg = &cfg.outputs.lyapunov;
    let v = match &lcfg.weights {
        Some(w) => w.expand(n, "outputs.lyapunov.weights")?,
        None => vec![1.0; n],
    };
    let a = match lcfg.a {
        Some(a) => a,
        None => model.known_delay_bound(&v)?.ok_or_else(|| {
            Error::config("outputs.lyapunov.a", "no closed-form bound for this model; set it explicitly")
        })?,
    };
    let d = net.rate_bound();
    let functional = FunctionalConfig::new(v.clone(), a, d, net.delays().to_vec())
        .map_err(|e| Error::config("outputs.lyapunov", e.to_string()))?;
    let gate = match lcfg.gate {
        Some(g) => g,
        None => required_gain_bound(a, net.r(), d, lcfg.c, &v).map_err(|e| Error::config("outputs.lyapunov", e.to_string()))?,
    };
    Ok((functional, gate))
}

/// Builds and simulates the configured experiment without writing files.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    execute_model(cfg, &model)
}

/// Like [`execute`] for an already built (possibly custom) model.
pub fn execute_model(cfg: &ExperimentConfig, model: &Model) -> Result<RunOutcome> {
    let n = model.network.n();
    let controller = cfg.build_controller(n)?;
    let phi = cfg.initial_function(n)?;
    let sim = cfg.solver_config()?;
    let (trajectory, lyapunov) = if cfg.outputs.emit_lyapunov {
        let (functional, gate) = lyapunov_setup(cfg, model)?;
        let traj = simulate_monitored(&model.network, &controller, &phi, &sim, &functional, Some(&functional.weights))?;
        let report = monitor_decrease(&traj, gate)?;
        let out = LyapunovOutput {
            weights: functional.weights.clone(),
            a: functional.a,
            d: functional.d,
            gate,
            report: Some(report),
        };
        (traj, Some(out))
    } else {
        (simulate(&model.network, &controller, &phi, &sim)?, None)
    };
    let summary = summarize(cfg, model, &trajectory)?;
    Ok(RunOutcome {
        trajectory,
        summary,
        lyapunov,
    })
}

/// Shortest round-trip text for `v`; scientific outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Long-form CSV with header `t,node,x,k`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.len() * traj.n() * 32 + 16);
    out.push_str("t,node,x,k\n");
    for ((t, x), k) in traj.times.iter().zip(&traj.states).zip(&traj.gains) {
        for i in 0..x.len() {
            let _ = writeln!(out, "{},{i},{},{}", fmt_f64(*t), fmt_f64(x[i]), fmt_f64(k[i]));
        }
    }
    out
}

/// CSV with header `t,V_s,V_m`.
pub fn lyapunov_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,V_s,V_m\n");
    let vs = traj.lyapunov_vs.as_deref().unwrap_or(&[]);
    let vm = traj.lyapunov_vm.as_deref().unwrap_or(&[]);
    for (k, t) in traj.times.iter().enumerate() {
        let fmt = |s: &[f64]| s.get(k).map_or(String::new(), |v| fmt_f64(*v));
        let _ = writeln!(out, "{},{},{}", fmt_f64(*t), fmt(vs), fmt(vm));
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `trajectory.csv`, `summary.json`, the graph edge list for SIS
/// models, and `lyapunov.json` / `lyapunov.csv` when requested.
pub fn write_outputs(dir: &Path, model: &Model, outcome: &RunOutcome, with_trajectory: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    if with_trajectory {
        fs::write(dir.join("trajectory.csv"), trajectory_csv(&outcome.trajectory))?;
    }
    write_json(&dir.join("summary.json"), &outcome.summary)?;
    if let ModelKind::Sis(graph) = &model.kind {
        fs::write(dir.join("graph.edgelist"), graph.to_edge_list())?;
    }
    if let Some(l) = &outcome.lyapunov {
        write_json(&dir.join("lyapunov.json"), l)?;
        fs::write(dir.join("lyapunov.csv"), lyapunov_csv(&outcome.trajectory))?;
    }
    Ok(())
}

/// Runs the experiment and writes its artifacts into `dir`.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let outcome = execute_model(cfg, &model)?;
    write_outputs(dir, &model, &outcome, cfg.outputs.trajectory_csv)?;
    Ok(outcome)
}
