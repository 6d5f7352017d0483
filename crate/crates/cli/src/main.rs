//! `swipt`: experiment runner for the secure SWIPT OFDMA solvers.
//!
//! Exit codes: 0 success, 1 config error, 2 I/O error, 3 oracle guard rail,
//! 4 a self-check or oracle comparison failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swipt_ofdma::checks::{oracle_check, selftest};
use swipt_ofdma::experiment::{
    parse_schemes, run_experiment, write_csv, write_csv_file, ExperimentConfig,
};
use swipt_ofdma::Error;

#[derive(Parser)]
#[command(
    name = "swipt",
    version,
    about = "Harvested-power maximisation under secrecy-rate demands"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write the aggregate CSV.
    Run {
        config: PathBuf,
        /// Output path; `-` or absent (with none in the config) writes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated schemes: ppa, pub, fps, fsa, oracle, oracle_ub.
        #[arg(long)]
        schemes: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Fill the wall_ms_mean column (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Compare the solvers with brute-force oracles on the config's instances.
    OracleCheck { config: PathBuf },
    /// Run the built-in invariant checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Csv(_) => 2,
        Error::GuardRail(_) => 3,
        _ => 1,
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    ExperimentConfig::from_toml_str(&text)
}

fn run(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Run {
            config,
            out,
            schemes,
            seed,
            trials,
            timing,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = schemes {
                cfg.run.schemes = parse_schemes(&s)?;
            }
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(t) = trials {
                cfg.run.trials = t;
            }
            cfg.run.timing |= timing;
            if let Some(o) = out {
                cfg.run.output = Some(o);
            }
            cfg.validate()?;
            let result = run_experiment(&cfg)?;
            match cfg.run.output.as_deref() {
                Some(p) if p.as_os_str() != "-" => {
                    write_csv_file(&result.rows, p)?;
                    log::info!("wrote {} rows to {}", result.rows.len(), p.display());
                }
                _ => write_csv(&result.rows, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck { config } => {
            let cfg = load(&config)?;
            let rep = oracle_check(&cfg)?;
            println!("instances {}", rep.instances);
            println!(
                "ppa >= 98% of oracle on {}/{} feasible instances",
                rep.ppa_within, rep.pa_feasible
            );
            println!(
                "pub >= 95% of oracle on {}/{} feasible instances",
                rep.pub_within, rep.ub_feasible
            );
            let worst = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
            println!(
                "worst ratios: ppa {:.4} pub {:.4}",
                worst(&rep.ppa_ratios),
                worst(&rep.pub_ratios)
            );
            Ok(if rep.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            })
        }
        Command::Selftest { seed } => {
            let results = selftest(seed);
            for c in &results {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                println!("{mark} {} {}", c.name, c.detail);
            }
            Ok(if results.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
