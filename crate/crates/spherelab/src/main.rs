use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spherelab::config::parse_lr_range;
use spherelab::{analyze, run_baseline, run_grid, AnalysisOverrides, ExperimentConfig, LabError};
use spherelab_core::oracles::{run_oracle_checks, OracleOptions};

/// Projected SGD on the unit sphere: sweeps, thermodynamic analysis and
/// closed-form checks.
#[derive(Parser)]
#[command(name = "spherelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for initialization and batches, overriding `sgd.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train at every learning rate of the grid and write series and summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Keep only grid learning rates in lo:hi.
        #[arg(long)]
        lr_range: Option<String>,
    },
    /// Temperature intervals, free energy and diagnostics of a run directory.
    Analyze {
        /// Experiment directory written by `run`.
        #[arg(long)]
        out: PathBuf,
        /// Learning-rate range lo:hi used for temperature estimation.
        #[arg(long)]
        lr_range: Option<String>,
        /// Slack of the free-energy minimum.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Check the closed-form identities numerically.
    VerifyOracles {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, hide = true)]
        perturb_factorization: f64,
    },
    /// Loss and entropy of uniform samples on the sphere.
    Baseline {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.sgd.seed = seed;
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<ExitCode, LabError> {
    match command {
        Command::Run {
            common,
            jobs,
            lr_range,
        } => {
            let mut cfg = load(&common)?;
            if let Some(r) = lr_range {
                let (lo, hi) = parse_lr_range(&r)?;
                cfg.lr_grid.retain(|lr| *lr >= lo && *lr <= hi);
            }
            let out = run_grid(&cfg, jobs)?;
            for r in &out.runs {
                let e = &r.estimate;
                println!(
                    "lr {:.3e}  U {:.6e}  S {:.4}  stabilized {}{}",
                    e.lr,
                    e.loss,
                    e.entropy,
                    e.stabilized,
                    if r.stopped_early {
                        "  (stopped early)"
                    } else {
                        ""
                    }
                );
            }
            println!("wrote {}", out.dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze {
            out,
            lr_range,
            epsilon,
        } => {
            let overrides = AnalysisOverrides {
                lr_range: lr_range.as_deref().map(parse_lr_range).transpose()?,
                epsilon,
            };
            let report = match analyze(&out, &overrides) {
                Ok(r) => r,
                Err(e @ LabError::MissingData(_)) => {
                    let partial = out
                        .join(spherelab::analyze::ANALYSIS_DIR)
                        .join("report.txt");
                    if let Ok(text) = std::fs::read_to_string(partial) {
                        print!("{text}");
                    }
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            for v in &report.verdicts {
                println!("{v}");
            }
            Ok(if report.hypothesis_holds() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::VerifyOracles {
            seed,
            perturb_factorization,
        } => {
            let opts = OracleOptions {
                seed,
                factorization_perturbation: perturb_factorization,
            };
            let checks = run_oracle_checks(&opts)?;
            let mut ok = true;
            for c in &checks {
                ok &= c.passed();
                println!(
                    "{} {:<34} max residual {:.3e} (tolerance {:.1e})  {}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.max_residual,
                    c.tolerance,
                    c.detail
                );
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Baseline { common } => {
            let cfg = load(&common)?;
            let b = run_baseline(&cfg, &cfg.output_dir)?;
            println!(
                "U {:.6e} ± {:.2e}  S {:.4} ± {:.4}  ({} windows)",
                b.loss, b.loss_std, b.entropy, b.entropy_std, b.windows
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
