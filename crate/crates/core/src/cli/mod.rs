//! The `spatex` command-line driver.

mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::{fit_pipeline, FitOutcome};
use config::RunConfig;

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "spatex", version, about = "Spatial extreme-value modelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Fit a dependence model to an observation panel.
    Fit,
    /// Simulate from a model at the configured stations.
    Simulate,
    /// Empirical and model dependence curves, extremograms and exceedance curves.
    Diagnose,
    /// Project and/or anisotropy-transform station coordinates.
    TransformCoords,
    /// Stationary-bootstrap quantiles of the fitted parameters.
    Bootstrap,
}

/// Files produced by a command, written only once the command has succeeded.
#[derive(Debug, Default)]
pub struct Outputs(Vec<(String, Vec<u8>)>);

impl Outputs {
    pub fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.0.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(n, _)| n.as_str())
    }

    fn write_all(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, bytes) in &self.0 {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, bytes) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(&path);
                return Err(e);
            }
            written.push(path);
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

/// Exit status for a failure: 2 for numerical trouble, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn execute(cli: &Cli) -> Result<(), StageError> {
    let path = cli.config.as_ref().ok_or_else(|| StageError {
        stage: "config",
        error: Error::Config("--config is required".into()),
    })?;
    let cfg = RunConfig::load(path).map_err(|error| StageError { stage: "config", error })?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let out = cli.out.clone().or_else(|| cfg.output.clone()).ok_or_else(|| StageError {
        stage: "config",
        error: Error::Config("an output directory is required (--out or output)".into()),
    })?;
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| StageError {
        stage: "config",
        error: Error::Config(format!("cannot start {threads} threads: {e}")),
    })?;
    let mut outputs = Outputs::default();
    pool.install(|| match cli.command {
        Command::Fit => commands::cmd_fit(&cfg, seed, &mut outputs),
        Command::Simulate => commands::cmd_simulate(&cfg, seed, &mut outputs),
        Command::Diagnose => commands::cmd_diagnose(&cfg, seed, &mut outputs),
        Command::TransformCoords => commands::cmd_transform_coords(&cfg, &mut outputs),
        Command::Bootstrap => commands::cmd_bootstrap(&cfg, seed, &mut outputs),
    })?;
    outputs.write_all(&out).map_err(|e| StageError { stage: "output", error: Error::Io(e) })?;
    for name in outputs.names() {
        log::info!("wrote {}", out.join(name).display());
    }
    Ok(())
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e.error)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_exit_with_two() {
        assert_eq!(exit_code(&Error::Numerical("x".into())), 2);
        assert_eq!(exit_code(&Error::Optimization("x".into())), 2);
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::InsufficientData("x".into())), 1);
    }

    #[test]
    fn outputs_are_written_together() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::default();
        o.push("a.txt", b"1".to_vec());
        o.push("b.txt", b"2".to_vec());
        o.write_all(&dir.path().join("out")).unwrap();
        assert_eq!(std::fs::read(dir.path().join("out/b.txt")).unwrap(), b"2");
        assert_eq!(o.names().collect::<Vec<_>>(), ["a.txt", "b.txt"]);
    }
}
