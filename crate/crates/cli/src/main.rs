use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use coexist_core::codebook_io;
use coexist_core::harness::plot::{plot_csv, PlotKind};
use coexist_core::harness::{codebook_for, run_experiment, ExperimentPlan, Sweep, OUT_DIR_ENV};
use coexist_core::{NetworkConfig, SolverKind};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "coexist", version, about = "eMBB / MTD uplink coexistence simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write metrics.csv and roc.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Sweep axis and values, e.g. `snr_e=-20,-10,0`.
        #[arg(long)]
        sweep: Option<String>,
        /// Override the solver (amp, admm, sbl, somp).
        #[arg(long)]
        solver: Option<SolverKind>,
        #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
        out: PathBuf,
        /// Also render SVG plots next to the CSV files.
        #[arg(long)]
        plot: bool,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate the codebook of a configuration and write it to a file.
    Codebook {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a CSV produced by `simulate`.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        kind: PlotKind,
    },
}

fn load(path: &PathBuf) -> Result<NetworkConfig> {
    NetworkConfig::from_file(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Command::Simulate { config, sweep, solver, out, plot, jobs, seed } => {
            let mut cfg = load(&config)?;
            if let Some(kind) = solver {
                cfg.solver.kind = kind;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let mut plan = ExperimentPlan::new(cfg);
            if let Some(arg) = sweep {
                plan = plan.with_sweep(Sweep::parse(&arg)?);
            }
            plan.out_dir = Some(out.clone());
            plan.plot = plot;
            plan.jobs = jobs;
            let result = run_experiment::<f64>(&plan)?;
            for p in &result.points {
                let r = &p.report;
                log::info!(
                    "{} {}: pmd {:.4e} pfa {:.4e} p_out {:.4} nmse_embb {:.4e} ({} trials, {} failed)",
                    result.sweep_var,
                    p.value,
                    r.pmd.mean().unwrap_or(f64::NAN),
                    r.pfa.mean().unwrap_or(f64::NAN),
                    r.p_out,
                    r.nmse_embb.mean().unwrap_or(f64::NAN),
                    r.trials,
                    r.failed
                );
            }
            println!("{}", out.join("metrics.csv").display());
        }
        Command::Codebook { config, out } => {
            let cfg = load(&config)?;
            let cb = codebook_for::<f64>(&cfg, 0)?;
            if cb.header_pilot_leakage() > 1e-10 {
                bail!("generated headers are not orthogonal to the pilots");
            }
            codebook_io::write(&cb, &out)?;
            println!("{}", out.display());
        }
        Command::Plot { csv, kind } => {
            let path = plot_csv(&csv, kind)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
