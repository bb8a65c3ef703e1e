//! `swrl`: experiment runner for the spiked Wigner ROC laboratory.
//!
//! Exit codes: 0 on success, 1 on usage or I/O errors, 2 when a numerical
//! guard trips (margin too small, degenerate denominator, overflow,
//! non-convergence).

mod config;
mod manifest;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::{resolve, resolve_threads, Cli, FileConfig, UsageError};
use manifest::{sha256_hex, OutputDigest, RunManifest};
use swrl_core::Error;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("usage: {0}")]
    Usage(#[from] UsageError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Core(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(
                Error::MarginTooSmall { .. }
                | Error::DegenerateDenominator
                | Error::Overflow
                | Error::ConvergenceFailure
                | Error::DivergentIntegral
                | Error::BudgetInfeasible { .. },
            ) => 2,
            _ => 1,
        }
    }
}

fn manifest_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (kind, flags) = cli.command.split();
    let file = match &flags.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let env_threads = std::env::var("SWRL_THREADS").ok();
    let threads = resolve_threads(&flags, &file, env_threads.as_deref())?;
    let cfg = resolve(kind, &flags, &file)?;
    if let Some(t) = threads {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }

    let start = Instant::now();
    let output = run::run(&cfg)?;
    let wall = start.elapsed().as_secs_f64();

    let digest = |path: String| OutputDigest {
        path,
        bytes: output.body.len(),
        sha256: sha256_hex(output.body.as_bytes()),
    };
    let threads = rayon::current_num_threads();
    match &cfg.out {
        Some(out) => {
            std::fs::write(out, &output.body)?;
            let manifest =
                RunManifest::new(&cfg, threads, wall, vec![digest(out.display().to_string())]);
            let mut text = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
            text.push('\n');
            std::fs::write(manifest_path(out), text)?;
        }
        None => {
            std::io::stdout().write_all(output.body.as_bytes())?;
            let manifest = RunManifest::new(&cfg, threads, wall, vec![digest("-".into())]);
            let text = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
            writeln!(std::io::stderr(), "{text}")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("swrl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
