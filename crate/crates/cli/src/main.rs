//! `oscisep`: long runs, ε-sweeps, resonance reports and modulated Fourier
//! diagnostics for oscillatory Hamiltonian systems.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical blow-up.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use oscisep::experiment::{self, Coupling, ExperimentConfig, DEVIATIONS_FILE, ENERGIES_FILE};
use oscisep::Error;

#[derive(Parser)]
#[command(name = "oscisep", version, about = "Energy exchange in multiscale oscillatory systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write energies.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        /// A number, or `epsilon` for a = ε.
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long = "dt-factor")]
        dt_factor: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configuration for several ε and tabulate the deviations.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated list, e.g. 0.02,0.01,0.005.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gap, almost-resonant set, module and modified frequencies.
    Resonance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Modulated Fourier expansions on consecutive windows.
    Mfe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        windows: usize,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { 2 } else { 1 };
        Failure { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    Ok(ExperimentConfig::load(path)?)
}

fn parse_coupling(s: &str) -> Result<Coupling, Failure> {
    if s.trim() == "epsilon" {
        return Ok(Coupling::Epsilon);
    }
    let x = s.trim().parse::<f64>().with_context(|| format!("--a must be a number or `epsilon`, got {s:?}"))?;
    Ok(Coupling::Value(x))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, epsilon, a, tmax, dt_factor, out } => {
            let mut cfg = load(&config)?;
            if let Some(e) = epsilon {
                cfg.epsilon = e;
            }
            if let Some(a) = a {
                cfg.a = parse_coupling(&a)?;
            }
            if let Some(t) = tmax {
                cfg.t_end = t;
            }
            if let Some(f) = dt_factor {
                cfg.dt_factor = f;
            }
            cfg.validate()?;
            let dir = out.unwrap_or_else(|| cfg.output_path.clone());
            let row = experiment::simulate(&cfg, Some(&dir))?;
            println!("{}", row.summary());
            println!("wrote {}", dir.join(ENERGIES_FILE).display());
        }
        Command::Sweep { config, epsilons, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_path.clone());
            let report = experiment::sweep(&cfg, &epsilons, &dir)?;
            println!("{:>10} {:>14} {:>14} {:>14}", "epsilon", "a", "max dev", "every step");
            for e in &report.entries {
                match &e.row {
                    Some(r) => println!(
                        "{:>10} {:>14.6e} {:>14.6e} {:>14.6e}",
                        r.epsilon, r.a, r.max_deviation, r.max_deviation_every_step
                    ),
                    None => println!("{:>10} failed: {}", e.epsilon, e.error.as_deref().unwrap_or("")),
                }
            }
            if let Some(s) = report.slope {
                println!("log–log slope of deviation vs ε: {s:.3}");
            }
            println!("wrote {}", dir.join(DEVIATIONS_FILE).display());
            let failures: Vec<_> = report.failures().collect();
            if !failures.is_empty() {
                let code = if failures.iter().any(|e| e.numerical_failure) { 2 } else { 1 };
                let eps: Vec<String> = failures.iter().map(|e| e.epsilon.to_string()).collect();
                return Err(Failure { code, error: anyhow::anyhow!("{} run(s) failed: ε = {}", failures.len(), eps.join(", ")) });
            }
        }
        Command::Resonance { config, order, json } => {
            let cfg = load(&config)?;
            let report = experiment::resonance_report(&cfg, order.unwrap_or(cfg.order))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).context("serializing report")?);
            } else {
                print!("{report}");
            }
        }
        Command::Mfe { config, windows, order, out } => {
            let cfg = load(&config)?;
            let report = experiment::mfe_diagnose(&cfg, windows, order.unwrap_or(cfg.order))?;
            let dir = out.unwrap_or_else(|| cfg.output_path.clone());
            report.write(&dir)?;
            print!("{}", report.summary_text());
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
