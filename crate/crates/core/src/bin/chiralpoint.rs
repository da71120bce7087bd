use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use chiralpoint::commands::{execute, Command, RunOptions};
use chiralpoint::config;
use chiralpoint::export::{csv_string, run_record, write_file, Provenance};
use chiralpoint::{presets, Error, Result};

#[derive(Parser)]
#[command(name = "chiralpoint", version, about = "Plasmonic–photonic cavity with a chiral exceptional point")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Spectral density J(ω) and Purcell factor, with and without the mirror
    Ldos(RunArgs),
    /// Emitter emission spectrum S(ω), Γ(ω), Δ(ω)
    Emission(RunArgs),
    /// Emitter population after excitation
    Dynamics(RunArgs),
    /// Quantum yield table over Q_c and φ, or η(Δ_L)
    Yield(RunArgs),
    /// Scattering spectrum under plasmon drive and its eigenmode decomposition
    Scatter(RunArgs),
    /// Parameter sweep described by run.sweep
    Sweep(RunArgs),
    /// Least-squares fit of g1 (and gc, φ) to a Purcell spectrum
    Fit(RunArgs),
    /// List the shipped presets, or print one
    Presets { name: Option<String> },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped preset; a --config file is layered on top of it
    #[arg(long)]
    preset: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Remove the mirror (the hybrid cavity without the exceptional point)
    #[arg(long)]
    baseline: bool,
    /// Directory for resumable sweep results
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn sidecar(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn run(cmd: Command, args: RunArgs) -> Result<()> {
    let mut cfg = config::load(args.config.as_deref(), args.preset.as_deref())?;
    if args.baseline {
        cfg.file.mirror.present = Some(false);
        cfg.params = cfg.params.baseline();
    }
    let start = Instant::now();
    let opts = RunOptions { jobs: args.jobs, cache_dir: args.cache };
    let output = execute(cmd, &cfg, &opts)?;
    let elapsed = start.elapsed().as_secs_f64();
    let prov = Provenance::now(cmd.name(), &cfg.sha256());
    let text = match args.format {
        Format::Csv => csv_string(&output.table, &prov),
        Format::Json => {
            let conf = serde_json::to_value(&cfg.file).map_err(|e| Error::Config(e.to_string()))?;
            let mut summary = output.summary.clone();
            if let (Some(s), Some(row)) = (summary.as_mut(), &output.summary_table) {
                s["summary_row"] = serde_json::to_value(row).unwrap_or_default();
            }
            let rec = run_record(&output.table, &prov, &conf, summary, elapsed);
            serde_json::to_string_pretty(&rec).map_err(|e| Error::Config(e.to_string()))? + "\n"
        }
    };
    match &args.out {
        Some(path) => {
            write_file(path, &text)?;
            if let (Format::Csv, Some(row)) = (args.format, &output.summary_table) {
                write_file(&sidecar(path), &csv_string(row, &prov))?;
            }
        }
        None => print!("{text}"),
    }
    log::info!("{} finished in {elapsed:.2} s", cmd.name());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Ldos(a) => (Command::Ldos, a),
        Cmd::Emission(a) => (Command::Emission, a),
        Cmd::Dynamics(a) => (Command::Dynamics, a),
        Cmd::Yield(a) => (Command::Yield, a),
        Cmd::Scatter(a) => (Command::Scatter, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Presets { name: None } => {
            for n in presets::NAMES {
                println!("{n}");
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Presets { name: Some(n) } => match presets::get(&n) {
            Ok(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
    };
    match run(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
