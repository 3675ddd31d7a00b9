use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::run::{execute, fmt_f64, write_outputs, RunOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub seed: u64,
    pub adaptive_converged_all: bool,
    pub fixed_converged_all: bool,
    pub adaptive_mean_final_gain: f64,
    pub fixed_worst_final_x: f64,
    pub adaptive_unconverged: Vec<usize>,
    pub fixed_unconverged: Vec<usize>,
}

fn nodes(list: &[usize]) -> String {
    list.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(
        "seed,adaptive_converged_all,fixed_converged_all,adaptive_mean_final_gain,fixed_worst_final_x,\
         adaptive_unconverged,fixed_unconverged\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.seed,
            r.adaptive_converged_all,
            r.fixed_converged_all,
            fmt_f64(r.adaptive_mean_final_gain),
            fmt_f64(r.fixed_worst_final_x),
            nodes(&r.adaptive_unconverged),
            nodes(&r.fixed_unconverged)
        );
    }
    out
}

fn check_pair(adaptive: &ExperimentConfig, fixed: &ExperimentConfig) -> Result<()> {
    if !adaptive.is_adaptive() {
        return Err(Error::config("controller.mode", "first configuration of a comparison must be adaptive"));
    }
    if fixed.is_adaptive() {
        return Err(Error::config("controller.mode", "baseline configuration of a comparison must be fixed"));
    }
    if adaptive.model != fixed.model {
        return Err(Error::config("model", "compared configurations must share model settings"));
    }
    if adaptive.sim != fixed.sim {
        return Err(Error::config("sim", "compared configurations must share simulation settings"));
    }
    Ok(())
}

/// Runs both controllers on each seed; rows come back in seed order.
/// With `out_dir`, per-seed artifacts go to `seed_<s>/{adaptive,fixed}` and
/// the table to `compare.csv`.
pub fn compare(
    adaptive: &ExperimentConfig,
    fixed: &ExperimentConfig,
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Vec<CompareRow>> {
    check_pair(adaptive, fixed)?;
    if seeds.is_empty() {
        return Err(Error::config("seeds", "no seeds given"));
    }
    let run_one = |cfg: &ExperimentConfig, seed: u64, label: &str| -> Result<RunOutcome> {
        let cfg = cfg.with_seed(seed);
        let outcome = execute(&cfg)?;
        if let Some(dir) = out_dir {
            let model = cfg.build_model()?;
            write_outputs(&dir.join(format!("seed_{seed}")).join(label), &model, &outcome, cfg.outputs.trajectory_csv)?;
        }
        Ok(outcome)
    };
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            let a = run_one(adaptive, seed, "adaptive")?;
            let f = run_one(fixed, seed, "fixed")?;
            Ok(CompareRow {
                seed,
                adaptive_converged_all: a.summary.converged_all,
                fixed_converged_all: f.summary.converged_all,
                adaptive_mean_final_gain: a.summary.mean_final_gain,
                fixed_worst_final_x: f.summary.max_final_x,
                adaptive_unconverged: a.summary.unconverged_nodes,
                fixed_unconverged: f.summary.unconverged_nodes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("compare.csv"), compare_csv(&rows))?;
    }
    Ok(rows)
}
