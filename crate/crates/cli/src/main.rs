use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

mod config;
mod manifest;
mod run;

use config::{Command, ConfigError, Overrides};

const EXIT_CONFIG: u8 = 2;
const EXIT_INSUFFICIENT: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

/// Simulate read-disturbance variability, its error model, and threshold-aware mitigations.
#[derive(Debug, Parser)]
#[command(name = "vrd", version)]
struct Cli {
    /// What to run; `validate` only checks the config.
    #[arg(value_enum)]
    command: Command,
    /// JSON run config, or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Epochs simulated per trial.
    #[arg(long)]
    horizon: Option<u64>,
    /// Output directory (default `vrd-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Figure recipe for `report`.
    #[arg(long)]
    figure: Option<String>,
    /// Worker threads; never changes results.
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<vrd_core::Error>() {
        Some(e) if e.is_insufficient_data() => EXIT_INSUFFICIENT,
        Some(
            vrd_core::Error::InvalidGeometry(_)
            | vrd_core::Error::InvalidDeviceSpec(_)
            | vrd_core::Error::InvalidGrid(_)
            | vrd_core::Error::InvalidParams(_)
            | vrd_core::Error::InvalidPercentile(_)
            | vrd_core::Error::InvalidTrace(_)
            | vrd_core::Error::ZeroTrials
            | vrd_core::Error::HorizonTooShort { .. }
            | vrd_core::Error::ZeroThreshold
            | vrd_core::Error::Json(_),
        ) => EXIT_CONFIG,
        _ => EXIT_INTERNAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        horizon: cli.horizon,
        out: cli.out.clone(),
        figure: cli.figure.clone(),
    };
    let (file, base) = match &cli.config {
        Some(p) => (
            Some(config::read_config_value(p)?),
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (None, PathBuf::new()),
    };

    if cli.command == Command::Validate {
        let value = config::merge(file, None, &overrides);
        let diags = config::diagnose(&value, &base);
        if diags.is_empty() {
            println!("ok");
            return Ok(0);
        }
        for d in &diags {
            println!("{d}");
        }
        return Ok(EXIT_CONFIG);
    }

    let value = config::merge(file, Some(cli.command), &overrides);
    let cfg = config::resolve(&value, &base)?;
    let out_dir = overrides
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("vrd-out"));
    let outcome = run::execute(&cfg, out_dir, cli.threads)?;
    println!("{}", outcome.summary);
    println!("manifest: {}", outcome.manifest.display());
    Ok(0)
}
