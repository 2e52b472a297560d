//! `oqrw` — validate, analyze, evolve and sample open quantum random walks.
//!
//! Exit codes: 0 on success, 1 on validation failure, 2 on parse errors,
//! 3 on internal diagnostic failures (e.g. a peripheral spectrum that does
//! not form a root-of-unity group).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oqrw::analyze::{analyze, load_walk_source, AnalyzeOptions};
use oqrw::config::walk_to_json;
use oqrw::error::Error;
use oqrw::numerics::CVector;
use oqrw::registry;
use oqrw::series::{emit_series, SeriesMode};
use oqrw::walk::{BlockState, WalkModel, VALIDATE_TOL};

#[derive(Parser)]
#[command(name = "oqrw", version, about = "Open quantum random walk toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the total-probability condition of a walk definition.
    Validate {
        /// JSON file path or builtin:NAME
        source: String,
        /// Absolute tolerance on the per-site deviation
        #[arg(long, default_value_t = VALIDATE_TOL)]
        tol: f64,
    },
    /// Classify a walk: invariant states, irreducibility, period, decomposition.
    Analyze {
        /// JSON file path or builtin:NAME
        source: String,
        /// Absolute tolerance on the stochasticity deviation
        #[arg(long, default_value_t = VALIDATE_TOL)]
        tol: f64,
        /// Seed for the decomposition's random splitting
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Emit the report as JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Evolve a state and write site_probs.csv / blocks.csv.
    Evolve {
        /// JSON file path or builtin:NAME
        source: String,
        #[arg(long)]
        steps: usize,
        /// Write running Cesaro averages instead of raw channel powers
        #[arg(long)]
        cesaro: bool,
        #[command(flatten)]
        initial: InitialArg,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample quantum trajectories and write CSV reports.
    Sample {
        /// JSON file path or builtin:NAME
        source: String,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        trajectories: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        initial: InitialArg,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Print (or write) a builtin walk as JSON.
    Example {
        /// Builtin name, optionally with parameters (e.g. m4-eps?eps=0.05)
        name: String,
        /// Write to a file instead of stdout
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InitialArg {
    /// Initial state, e.g. `site=2` for a pure basis state at that site.
    /// Defaults to the first site in label order.
    #[arg(long)]
    initial: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Stochasticity { .. } => 1,
        Error::PeripheralMismatch(_) | Error::Degenerate(_) | Error::Convergence(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Validate { source, tol } => {
            let walk = load_walk_source(&source)?;
            let report = walk.validate(tol)?;
            for (site, dev) in &report.per_site {
                println!("site {site:<8} deviation {dev:.3e}");
            }
            match report.worst() {
                Some((site, dev)) if !report.ok => {
                    println!("FAIL: worst deviation {dev:.3e} at site `{site}` exceeds {tol:.1e}");
                    Ok(ExitCode::from(1))
                }
                worst => {
                    let (site, dev) = worst.cloned().unwrap_or_default();
                    println!("OK: worst deviation {dev:.3e} at site `{site}` (tol {tol:.1e})");
                    Ok(ExitCode::SUCCESS)
                }
            }
        }
        Command::Analyze { source, tol, seed, json } => {
            let walk = load_walk_source(&source)?;
            let opts = AnalyzeOptions {
                validate_tol: tol,
                seed,
                ..AnalyzeOptions::default()
            };
            let report = analyze(&walk, &opts)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            } else {
                println!("{report}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Evolve { source, steps, cesaro, initial, out } => {
            let walk = load_walk_source(&source)?;
            require_valid(&walk)?;
            let rho0 = initial_state(&walk, initial.initial.as_deref())?;
            let mode = if cesaro { SeriesMode::Cesaro } else { SeriesMode::Direct };
            let files = emit_series(&walk, &rho0, steps, &mode, &out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample { source, steps, trajectories, seed, initial, out } => {
            let walk = load_walk_source(&source)?;
            require_valid(&walk)?;
            let rho0 = initial_state(&walk, initial.initial.as_deref())?;
            let mode = SeriesMode::Sample { trajectories, seed };
            let files = emit_series(&walk, &rho0, steps, &mode, &out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Example { name, write } => {
            let walk = registry::builtin(&name)?;
            let text = walk_to_json(&walk);
            match write {
                Some(path) => {
                    std::fs::write(&path, text)?;
                    println!("wrote {}", path.display());
                }
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn require_valid(walk: &WalkModel) -> Result<(), Error> {
    let report = walk.validate(VALIDATE_TOL)?;
    if !report.ok {
        let (site, deviation) = report.worst().cloned().unwrap_or_default();
        return Err(Error::Stochasticity {
            site,
            deviation,
            tol: VALIDATE_TOL,
        });
    }
    Ok(())
}

/// Default initial state: pure e_1 at the first site in label order;
/// `site=ID` selects another site.
fn initial_state(walk: &WalkModel, spec: Option<&str>) -> Result<BlockState, Error> {
    let site = match spec {
        None => walk.sites()[0].id.clone(),
        Some(s) => {
            let Some(id) = s.strip_prefix("site=") else {
                return Err(Error::InvalidArgument(format!(
                    "unsupported initial state `{s}` (expected site=ID)"
                )));
            };
            id.to_string()
        }
    };
    let d = walk.dim_of(&site)?;
    BlockState::pure(walk, &site, &CVector::basis(d, 0))
}
