//! Batch front end: `fit`, `report`, `forecast-eval`, `cps1` and `synth`.
//!
//! Exit codes: 0 success, 2 invalid configuration or input schema, 3 data problems.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
pub use config::RunConfig;

/// Output directory override; takes precedence over `output_dir` in the config.
pub const OUT_ENV: &str = "LOADKIT_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "loadkit",
    version,
    about = "Load analytics for a balancing authority"
)]
pub struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides LOADKIT_OUT and the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the rolling models and write them with a summary.
    Fit,
    /// Scenario bias reports, EVI, accumulated difference, ramps and the anomaly gate.
    Report,
    /// Monthly MAE/MAPE of a day-ahead forecast against a baseline year.
    ForecastEval,
    /// Monthly CPS1 from minute telemetry.
    Cps1,
    /// Write a synthetic dataset and a config that analyses it.
    Synth {
        /// Generator seed (overrides `synth_seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Report => "report",
            Command::ForecastEval => "forecast-eval",
            Command::Cps1 => "cps1",
            Command::Synth { .. } => "synth",
        }
    }
}

/// Provenance stamped on every output file.
#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Meta {
    fn comment_line(&self) -> String {
        let mut s = format!(
            "# {} {} command={} config_sha256={}",
            self.toolkit, self.version, self.command, self.config_sha256
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!(" seed={seed}"));
        }
        s.push('\n');
        s
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes files under one directory, each stamped with [`Meta`].
pub struct Output {
    dir: PathBuf,
    meta: Meta,
}

impl Output {
    pub fn new(dir: PathBuf, meta: Meta) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Output { dir, meta })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(path)?))
    }

    /// JSON object with a `meta` field followed by the fields of `body`.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<()> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(
            &mut f,
            &Document {
                meta: &self.meta,
                body,
            },
        )?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    /// A file whose first line is the `#` provenance comment; the caller writes the rest.
    pub fn stamped(&self, name: &str) -> Result<BufWriter<File>> {
        let mut f = self.create(name)?;
        f.write_all(self.meta.comment_line().as_bytes())?;
        Ok(f)
    }

    /// CSV writer positioned after the provenance comment.
    pub fn csv(&self, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.stamped(name)?))
    }

    /// Unstamped text file (for generated configs, whose bytes are the hash input).
    pub fn plain(&self, name: &str, text: &str) -> Result<()> {
        let mut f = self.create(name)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidValue(_)
        | Error::Schema { .. }
        | Error::LayoutMismatch(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        _ => 3,
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("`--config <path>` is required".into()))?;
    let cfg = RunConfig::load(config_path)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone());
    let seed = match cli.command {
        Command::Synth { seed } => Some(seed.unwrap_or(cfg.synth.seed)),
        _ => None,
    };
    let out = Output::new(
        dir,
        Meta {
            toolkit: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: cli.command.name(),
            config_sha256: cfg.hash.clone(),
            seed,
        },
    )?;
    match cli.command {
        Command::Fit => commands::fit(&cfg, &out),
        Command::Report => commands::report(&cfg, &out),
        Command::ForecastEval => commands::forecast_eval(&cfg, &out),
        Command::Cps1 => commands::cps1(&cfg, &out),
        Command::Synth { .. } => commands::synth(&cfg, &out, seed.expect("synth seed")),
    }
}
