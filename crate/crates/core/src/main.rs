//! `qubit-hamid`: simulate, identify and export plot data.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 estimation
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qubit_hamid::config::RunConfig;
use qubit_hamid::pipeline::{run_once, run_replicates, simulate};
use qubit_hamid::report::{render_text, write_figures, Report};
use qubit_hamid::spectral::Stage1Method;
use qubit_hamid::{Error, Result};

#[derive(Parser)]
#[command(name = "qubit-hamid", version, about = "Single-qubit Hamiltonian identification from sigma-z records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the pole-start record of every control setting.
    Simulate(Common),
    /// Run the full identification and write report.json.
    Identify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        replicates: Option<u32>,
        /// Directory from a previous run whose `series/` records are reused.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Export plot-ready CSVs from a run directory.
    Report {
        /// Run directory holding report.json and series/.
        #[arg(long)]
        out: PathBuf,
        /// Report to read instead of `<out>/report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noiseless expectation values, no readout error.
    #[arg(long)]
    exact: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fourier,
    Cosine,
    Parabola,
}

impl From<Method> for Stage1Method {
    fn from(m: Method) -> Self {
        match m {
            Method::Fourier => Stage1Method::Fourier,
            Method::Cosine => Stage1Method::CosineFit,
            Method::Parabola => Stage1Method::MinimumParabola,
        }
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.exact {
        cfg.exact = true;
    }
    if common.out.is_some() {
        cfg.output_dir = common.out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = load(&common)?;
            cfg.validate()?;
            let out = cfg.output_dir.clone().ok_or_else(|| Error::Config("simulate needs --out".into()))?;
            let files = simulate(&cfg, cfg.seed, &out)?;
            std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;
            println!("wrote {} series to {}", files.len(), out.join("series").display());
        }
        Command::Identify { common, method, replicates, replay } => {
            let mut cfg = load(&common)?;
            if let Some(m) = method {
                cfg.stage1_method = m.into();
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            if replay.is_some() {
                cfg.replay_dir = replay;
            }
            cfg.validate()?;
            let out = cfg.output_dir.clone();
            if cfg.replicates > 1 {
                let (_, summary) = run_replicates(&cfg, out.as_deref())?;
                print!("{}", summary.to_json()?);
                if summary.failures.len() == summary.replicates {
                    return Err(Error::Validation("every replicate failed".into()).into_estimation());
                }
            } else {
                let report = run_once(&cfg, cfg.seed, out.as_deref())?;
                print!("{}", render_text(&report));
            }
        }
        Command::Report { out, report } => {
            let path = report.unwrap_or_else(|| out.join("report.json"));
            let report = Report::read(&path)?;
            let files = write_figures(&report, &out.join("series"), &out.join("figures"))?;
            println!("wrote {} files to {}", files.len(), out.join("figures").display());
        }
    }
    Ok(())
}

trait IntoEstimation {
    fn into_estimation(self) -> Error;
}

impl IntoEstimation for Error {
    fn into_estimation(self) -> Error {
        Error::FitFailure(self.to_string())
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
