use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::run::{execute, fmt_f64, write_outputs, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub summary: RunSummary,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "seed,converged_all,unconverged,mean_final_gain,max_final_x,t_convergence,gains_plateaued,gains_monotone\n",
    );
    for r in rows {
        let s = &r.summary;
        let unconverged = s.unconverged_nodes.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
        let t_conv = s.t_convergence.map_or(String::new(), fmt_f64);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.seed,
            s.converged_all,
            unconverged,
            fmt_f64(s.mean_final_gain),
            fmt_f64(s.max_final_x),
            t_conv, s.gains_plateaued, s.gains_monotone
        );
    }
    out
}

/// Runs the configuration once per seed in parallel; rows are in seed order.
pub fn sweep(cfg: &ExperimentConfig, seeds: &[u64], out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "no seeds given"));
    }
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = cfg.with_seed(seed);
            let outcome = execute(&cfg)?;
            if let Some(dir) = out_dir {
                let model = cfg.build_model()?;
                write_outputs(&dir.join(format!("seed_{seed}")), &model, &outcome, cfg.outputs.trajectory_csv)?;
            }
            Ok(SweepRow {
                seed,
                summary: outcome.summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), sweep_csv(&rows))?;
    }
    Ok(rows)
}
