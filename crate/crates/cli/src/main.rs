use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use theta_incl::harness::{self, RunConfig, Scenario, StudyPlan};
use theta_incl::Error;

/// θ-scheme solver for parabolic differential inclusions.
#[derive(Parser)]
#[command(name = "theta-incl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem and write its trajectory and report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a refinement study.
    Study {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Maximum number of concurrent runs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check the structural hypotheses of a scenario by sampling.
    Validate {
        #[arg(long)]
        scenario: String,
        /// Run configuration whose overrides are applied first.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Recompute the report of a stored trajectory.
    Diagnose {
        #[arg(long)]
        trajectory: PathBuf,
    },
}

fn execute(cmd: Command) -> Result<i32, Error> {
    match cmd {
        Command::Solve { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let output = harness::run(&cfg)?;
            harness::write_run(&out, &output)?;
            println!("{}", serde_json::to_string_pretty(&output.report)?);
            Ok(0)
        }
        Command::Study { plan, out, jobs } => {
            let plan = StudyPlan::load(&plan)?;
            let report = harness::run_study(&plan, jobs)?;
            harness::write_study(&out, &report)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.families {
                let order = f
                    .orders
                    .as_ref()
                    .map_or("-".to_string(), |o| format!("{:.3}", o.pointwise_h.slope));
                println!(
                    "family {} {} theta={}: order {order}, decreasing {}, uniformity {:.3}",
                    f.family,
                    f.label,
                    f.theta,
                    f.strictly_decreasing,
                    f.uniformity.worst()
                );
            }
            Ok(0)
        }
        Command::Validate {
            scenario,
            config,
            samples,
            seed,
        } => {
            let sc = match config {
                Some(path) => {
                    let mut cfg = RunConfig::load(&path)?;
                    cfg.scenario = scenario;
                    cfg.scenario()?
                }
                None => Scenario::named(&scenario)?,
            };
            let report = sc.validate(samples, seed)?;
            println!("{report}");
            Ok(if report.pass { 0 } else { harness::VALIDATION_FAILURE })
        }
        Command::Diagnose { trajectory } => {
            let d = harness::diagnose(&trajectory)?;
            println!("{}", serde_json::to_string_pretty(&d.report)?);
            if d.matches_stored {
                Ok(0)
            } else {
                eprintln!("recomputed report differs from the stored report.json");
                Ok(harness::VALIDATION_FAILURE)
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("THETA_INCL_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
