//! Command-line front end. Every command reads a JSON [`RunConfig`] (or plain
//! flags), validates it fully before touching the filesystem, computes all
//! results in memory, and only then writes outputs atomically.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 I/O or malformed input
//! file, 4 numeric failure. On failure a one-line JSON record goes to stderr.

mod commands;
mod config;
mod fixtures;
mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::denoiser::DenoiserError;
use crate::format::FormatError;
use crate::metrics::{MetricError, Normalization};
use crate::sampler::SamplerError;

pub use commands::{
    cmd_enhance, cmd_generate, cmd_invert, cmd_metric, cmd_roundtrip, cmd_schedule, cmd_sweep_cfg, MetricArgs,
    RoundtripReport, ScheduleArgs, SweepArgs, SweepRow,
};
pub use config::{
    read_config, resolve_config, DenoiserSpec, MetricsConfig, Overrides, Prompts, Resolved, RunConfig,
    ScheduleConfig, SpatialPaths, TensorSource,
};
pub use fixtures::{cmd_make_fixtures, FixtureInfo};
pub use manifest::{sha256_hex, FileRecord, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn to_record(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "code": self.exit_code(), "message": self.to_string() }
        })
        .to_string()
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<DenoiserError> for CliError {
    fn from(e: DenoiserError) -> Self {
        match e {
            DenoiserError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            DenoiserError::Format(f) => f.into(),
            DenoiserError::Manifest(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Format(f) => f.into(),
            MetricError::Output(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "svr", version, about = "Sim-to-real video latent enhancement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Invert the input latent, then regenerate it under the real-world prompt.
    Enhance {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Map a clean latent to its noise latent.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sample a clean latent from a noise latent.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Invert then generate under identical conditioning and report the error.
    Roundtrip {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Object consistency between original and generated features.
    Metric {
        #[arg(long)]
        orig: PathBuf,
        #[arg(long)]
        gen: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
        #[arg(long, default_value = "per_object_mean")]
        mode: Normalization,
        /// Treat inputs as latents and extract toy features at this stride.
        #[arg(long)]
        toy_stride: Option<usize>,
        /// Output prefix: writes PREFIX.json, PREFIX.csv, PREFIX_perceptual.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Enhance once per guidance weight and score each result.
    SweepCfg {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "3,7,11")]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a small synthetic driving scene with masks, maps and configs.
    MakeFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a noise schedule as JSON.
    Schedule(ScheduleArgs),
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    let json = |v: serde_json::Value| v.to_string();
    Ok(match cli.command {
        Command::Enhance { config, overrides } => json(cmd_enhance(&config, &overrides)?),
        Command::Invert { config, overrides } => json(cmd_invert(&config, &overrides)?),
        Command::Generate { config, overrides } => json(cmd_generate(&config, &overrides)?),
        Command::Roundtrip { config, overrides } => {
            serde_json::to_string(&cmd_roundtrip(&config, &overrides)?).expect("serializable")
        }
        Command::Metric { orig, gen, masks, sidecar, mode, toy_stride, out } => {
            let args = MetricArgs { orig, gen, masks, sidecar, mode, toy_stride, out };
            json(cmd_metric(&args)?)
        }
        Command::SweepCfg { config, values, out, overrides } => {
            let rows = cmd_sweep_cfg(&SweepArgs { config, values, out, overrides })?;
            serde_json::to_string(&rows).expect("serializable")
        }
        Command::MakeFixtures { out, seed } => {
            serde_json::to_string(&cmd_make_fixtures(&out, seed)?).expect("serializable")
        }
        Command::Schedule(args) => cmd_schedule(&args)?,
    })
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_with_io<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", CliError::Config(first.to_string()).to_record());
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            let _ = writeln!(stdout, "{out}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_record());
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_with_io(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
