//! Command-line front end.
//!
//! Subcommands: `soliton | residual | simulate | hierarchy | figures`, each
//! taking `--config <path>`, `--out <dir>`, `--seed <u64>`, `--tol <float>`.
//! The `GQTODA_OUT` environment variable supplies the default output
//! directory. Exit codes: 0 pass, 1 tolerance failure, 2 config error,
//! 3 numeric error.

mod commands;
mod config;
mod report;

pub use config::{Flags, ModeConfig, OutputFormat, RunConfig, WindowConfig};
pub use report::{fmt_float, Metadata};

use std::path::PathBuf;

#[derive(Debug, Clone, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

const USAGE: &str = "\
usage: gqtoda <soliton|residual|simulate|hierarchy|figures> [flags]

flags:
  --config <path>   key-value run configuration file
  --out <dir>       output directory (default: $GQTODA_OUT or ./out)
  --seed <u64>      RNG seed for random specs and random smooth fields
  --tol <float>     overrides the default pass/fail tolerance

exit codes: 0 pass, 1 tolerance failure, 2 config error, 3 numeric error";

fn parse_flags(args: &[String]) -> Result<Flags, CliError> {
    let mut flags = Flags::default();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut grab = || {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("flag {arg} needs a value\n{USAGE}")))
        };
        match arg.as_str() {
            "--config" => flags.config_path = Some(PathBuf::from(grab()?)),
            "--out" => flags.out_dir = Some(PathBuf::from(grab()?)),
            "--seed" => {
                let raw = grab()?;
                flags.seed = Some(raw.parse().map_err(|_| {
                    CliError::Usage(format!("--seed expects an integer, got `{raw}`"))
                })?);
            }
            "--tol" => {
                let raw = grab()?;
                flags.tol = Some(raw.parse().map_err(|_| {
                    CliError::Usage(format!("--tol expects a number, got `{raw}`"))
                })?);
            }
            other => {
                return Err(CliError::Usage(format!("unknown flag `{other}`\n{USAGE}")));
            }
        }
    }
    Ok(flags)
}

/// Runs a subcommand; `Ok(true)` means every configured check passed.
pub fn run_command(command: &str, flags: &Flags, env_out: Option<String>) -> Result<bool, CliError> {
    let file_text = match &flags.config_path {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?),
        None => None,
    };
    let cfg = RunConfig::resolve(file_text.as_deref(), flags, env_out)?;
    match command {
        "soliton" => commands::cmd_soliton(&cfg),
        "residual" => commands::cmd_residual(&cfg),
        "simulate" => commands::cmd_simulate(&cfg),
        "hierarchy" => commands::cmd_hierarchy(&cfg),
        "figures" => commands::cmd_figures(&cfg),
        other => Err(CliError::Usage(format!(
            "unknown subcommand `{other}`\n{USAGE}"
        ))),
    }
}

/// Full CLI entry point: parses `args` (without the program name) and
/// returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    if args.iter().any(|a| a == "--help" || a == "-h") {
        println!("{USAGE}");
        return 0;
    }
    let Some((command, rest)) = args.split_first() else {
        eprintln!("{USAGE}");
        return 2;
    };
    let flags = match parse_flags(rest) {
        Ok(flags) => flags,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let env_out = std::env::var("GQTODA_OUT").ok();
    match run_command(command, &flags, env_out) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
