use std::path::PathBuf;
use std::process::ExitCode;

use bdf_afem::experiments::{parse_pair, pair_name, verify_manufactured, ExperimentConfig};
use bdf_afem::run_with;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bdf-afem", version, about = "Adaptive finite elements for Brinkman-Darcy-Forchheimer flow with point sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an adaptive experiment and write trace.csv, rate.txt and VTK files.
    Solve {
        /// example1, example2, example3 or manufactured
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// `key = value` configuration file
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        /// th or mini
        #[arg(long)]
        pair: Option<String>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record zero seconds so traces are reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        dump_config: bool,
        /// Report each adaptive iteration on stderr.
        #[arg(long)]
        progress: bool,
    },
    /// Convergence orders against the smooth manufactured solution.
    Verify {
        #[arg(long, default_value = "th")]
        pair: String,
        #[arg(long, default_value_t = 4)]
        refinements: usize,
    },
}

const USAGE: u8 = 1;
const SOLVER_FAILURE: u8 = 2;

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(USAGE)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Solve {
            preset,
            config,
            alpha,
            pair,
            iters,
            out,
            no_timing,
            dump_config,
            progress,
        } => {
            let base = match (preset, config) {
                (_, Some(path)) => std::fs::read_to_string(&path)
                    .map_err(|e| format!("{}: {e}", path.display()))
                    .and_then(|text| ExperimentConfig::parse(&text).map_err(|e| e.to_string())),
                (Some(name), None) => ExperimentConfig::preset(&name).map_err(|e| e.to_string()),
                (None, None) => Err("one of --preset or --config is required".to_string()),
            };
            let mut config = match base {
                Ok(c) => c,
                Err(e) => return usage(e),
            };
            if let Some(a) = alpha {
                config.alpha = a;
            }
            if let Some(p) = pair {
                match parse_pair(&p) {
                    Ok(p) => config.pair = p,
                    Err(e) => return usage(e),
                }
            }
            if let Some(n) = iters {
                config.iterations = n;
            }
            if let Some(o) = out {
                config.output = o;
            }
            if no_timing {
                config.timing = false;
            }
            if let Err(e) = config.validate() {
                return usage(e);
            }
            if dump_config {
                print!("{}", config.to_text());
                return ExitCode::SUCCESS;
            }
            let report = |state: &bdf_afem::adaptivity::IterationState<'_, f64>| {
                if progress {
                    eprintln!(
                        "iter {}: elements={} ndof={} estimator={:e} picard={} marked={}",
                        state.iter,
                        state.mesh.n_elements(),
                        state.space.ndof(),
                        state.indicators.global,
                        state.report.iterations,
                        state.marked.len()
                    );
                }
            };
            match run_with(&config, report) {
                Ok(summary) => {
                    println!("{}", summary.line());
                    if summary.trace.failure.is_some() {
                        ExitCode::from(SOLVER_FAILURE)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e @ bdf_afem::Error::Io(_)) => usage(e),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(SOLVER_FAILURE)
                }
            }
        }
        Command::Verify { pair, refinements } => {
            let pair = match parse_pair(&pair) {
                Ok(p) => p,
                Err(e) => return usage(e),
            };
            if refinements == 0 {
                return usage("--refinements must be at least 1");
            }
            match verify_manufactured(pair, refinements) {
                Ok(rows) => {
                    println!("pair={} level,h,ndof,velocity_h1,pressure_l2,velocity_order,pressure_order", pair_name(pair));
                    for (l, r) in rows.iter().enumerate() {
                        let fmt = |o: Option<f64>| o.map_or("-".to_string(), |v| format!("{v:.3}"));
                        println!(
                            "{l},{:.4e},{},{:.4e},{:.4e},{},{}",
                            r.h,
                            r.ndof,
                            r.velocity_h1,
                            r.pressure_l2,
                            fmt(r.velocity_order),
                            fmt(r.pressure_order)
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(SOLVER_FAILURE)
                }
            }
        }
    }
}
