use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmsim::config::ExperimentConfig;
use dmsim::experiment::run_experiment;

/// Directional-modulation secure transceiver simulator.
#[derive(Debug, Parser)]
#[command(name = "dmsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// DOA measurement-error histogram at a fixed SNR.
    ErrorHist(RunArgs),
    /// RMSE of the refined DOA versus SNR and training-set size.
    DoaRmse(RunArgs),
    /// Secrecy rate versus SNR for measured and perfect channel knowledge.
    SrVsSnr(RunArgs),
    /// Optimal versus fixed power allocation over an antenna-count sweep.
    PaGain(RunArgs),
    /// Average SINR maps over angle/range grids.
    SinrMap(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for the whole run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; defaults to `<experiment>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte-Carlo trials per swept point.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (0 = default pool); results are worker-count invariant.
    #[arg(long)]
    workers: Option<usize>,
    /// Additional `section.key=value` overrides.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn experiment_id(&self) -> &'static str {
        match self {
            Command::ErrorHist(_) => "error-hist",
            Command::DoaRmse(_) => "doa-rmse",
            Command::SrVsSnr(_) => "sr-vs-snr",
            Command::PaGain(_) => "pa-gain",
            Command::SinrMap(_) => "sinr-map",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::ErrorHist(a)
            | Command::DoaRmse(a)
            | Command::SrVsSnr(a)
            | Command::PaGain(a)
            | Command::SinrMap(a) => a,
        }
    }
}

fn run(cli: &Cli) -> dmsim::Result<()> {
    let id = cli.command.experiment_id();
    let args = cli.command.args();

    let mut cfg = match &args.config {
        Some(path) => {
            let body = std::fs::read_to_string(path)?;
            ExperimentConfig::from_toml_str(&body)?
        }
        None => ExperimentConfig::for_experiment(id)?,
    };
    cfg.experiment = id.to_string();

    let mut overrides = Vec::new();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(trials) = args.trials {
        overrides.push(format!("trials={trials}"));
    }
    if let Some(workers) = args.workers {
        overrides.push(format!("workers={workers}"));
    }
    overrides.extend(args.overrides.iter().cloned());
    let cfg = cfg.apply_overrides(&overrides)?;

    let tables = run_experiment(&cfg)?;
    let base = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{id}.csv")));
    for (label, table) in &tables {
        let path = if label.is_empty() {
            base.clone()
        } else {
            let stem = base.file_stem().unwrap_or_default().to_string_lossy();
            let ext = base
                .extension()
                .map(|e| format!(".{}", e.to_string_lossy()))
                .unwrap_or_default();
            base.with_file_name(format!("{stem}_{label}{ext}"))
        };
        table.write(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
