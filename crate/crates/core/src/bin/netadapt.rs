use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netadapt::experiments::{self, ExperimentConfig};
use netadapt::Error;

#[derive(Parser)]
#[command(name = "netadapt", version, about = "Delayed network simulation with decentralized adaptive gains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `outputs.dir`, then `out`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides `sim.horizon`.
    #[arg(long)]
    horizon: Option<f64>,
    /// Overrides `sim.h`.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trajectory, summary and optional Lyapunov report.
    Simulate(Common),
    /// Run adaptive and fixed-gain controllers over the configured seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Fixed-gain configuration to compare against.
        #[arg(long)]
        baseline: PathBuf,
    },
    /// Sampled dominance certificates and gain bound.
    Certify(Common),
    /// Run one configuration over the configured seeds.
    Sweep(Common),
}

impl Common {
    fn load(&self, path: &Path) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(h) = self.horizon {
            cfg.sim.horizon = h;
        }
        if let Some(h) = self.step {
            cfg.sim.h = h;
        }
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
            cfg.certify.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| cfg.outputs.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn seeds(&self, cfg: &ExperimentConfig) -> Result<Vec<u64>, Error> {
        match self.seed {
            Some(s) => Ok(vec![s]),
            None if !cfg.seeds.is_empty() => Ok(cfg.seeds.clone()),
            None => Err(Error::Config {
                field: "seeds".into(),
                message: "no seeds configured; pass --seed or set `seeds`".into(),
            }),
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.load(&c.config)?;
            let dir = c.out_dir(&cfg);
            let out = experiments::run(&cfg, &dir)?;
            let s = &out.summary;
            println!(
                "{} / {}: converged_all={} max_final_x={:e} mean_final_gain={:.6} -> {}",
                s.model,
                s.controller,
                s.converged_all,
                s.max_final_x,
                s.mean_final_gain,
                dir.display()
            );
        }
        Command::Compare { common, baseline } => {
            let cfg = common.load(&common.config)?;
            let base = common.load(&baseline)?;
            let dir = common.out_dir(&cfg);
            let rows = experiments::compare(&cfg, &base, &common.seeds(&cfg)?, Some(&dir))?;
            print!("{}", experiments::compare_csv(&rows));
        }
        Command::Certify(c) => {
            let cfg = c.load(&c.config)?;
            let dir = c.out_dir(&cfg);
            let s = experiments::certify(&cfg, Some(&dir))?;
            for r in &s.reports {
                println!("{:?}: c_star={} ({})", r.condition, r.c_star, r.verdict());
            }
            println!("a_estimate={} a_used={} required_gain_bound={:?}", s.a_estimate, s.a_used, s.required_gain_bound);
        }
        Command::Sweep(c) => {
            let cfg = c.load(&c.config)?;
            let dir = c.out_dir(&cfg);
            let rows = experiments::sweep(&cfg, &c.seeds(&cfg)?, Some(&dir))?;
            print!("{}", experiments::sweep_csv(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } | Error::Json(_) => 2,
                Error::NumericBlowup { .. } => 3,
                _ => 1,
            })
        }
    }
}
