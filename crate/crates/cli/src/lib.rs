//! Experiment driver behind the `crossflux` binary.
//!
//! Each subcommand reads an [`config::ExperimentConfig`], writes its artifacts
//! into one output directory together with the resolved config, and returns a
//! short summary. Errors carry the process exit code.

pub mod commands;
pub mod config;
pub mod svg;

use std::path::{Path, PathBuf};

use serde::Serialize;

use config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Io(String),
    Config(String),
    Numerical(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crossflux::Error> for CliError {
    fn from(e: crossflux::Error) -> Self {
        use crossflux::Error as E;
        match e {
            E::Io(m) => CliError::Io(m),
            E::NotWeaklyCooperative | E::Regime(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Branches,
    Limit,
    Compare,
    Evolve,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Branches => "branches",
            Command::Limit => "limit",
            Command::Compare => "compare",
            Command::Evolve => "evolve",
            Command::Verify => "verify",
        }
    }
}

/// The output directory of one run.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
}

#[derive(Serialize)]
struct RunInfo<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
}

impl Output {
    /// Creates the directory and records the resolved config and tool version.
    pub fn prepare(dir: &Path, cfg: &ExperimentConfig, command: Command) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let out = Output { dir: dir.to_path_buf() };
        out.write_text("config.toml", &cfg.resolved_toml())?;
        let mut echo = cfg.clone();
        echo.model.x_left = Some(cfg.x_left());
        out.write_json(
            "run.json",
            &RunInfo { tool: "crossflux", version: VERSION, command: command.name(), config: &echo },
        )?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn subdir(&self, name: &str) -> Result<PathBuf, CliError> {
        let d = self.dir.join(name);
        std::fs::create_dir_all(&d).map_err(|e| CliError::Io(format!("{}: {e}", d.display())))?;
        Ok(d)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn create(&self, name: &str) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
        let p = self.path(name);
        let f = std::fs::File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        Ok(std::io::BufWriter::new(f))
    }
}

/// Loads the config, prepares the output directory and runs `command`.
///
/// Returns the human-readable summary printed by the binary.
pub fn run(command: Command, config: &Path, out: Option<&Path>) -> Result<String, CliError> {
    let cfg = ExperimentConfig::load(config)?;
    run_with(command, &cfg, out)
}

pub fn run_with(command: Command, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String, CliError> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.clone());
    let output = Output::prepare(&dir, cfg, command)?;
    match command {
        Command::Analyze => commands::analyze::run(cfg, &output),
        Command::Branches => commands::branches::run(cfg, &output),
        Command::Limit => commands::limit::run(cfg, &output),
        Command::Compare => commands::compare::run(cfg, &output),
        Command::Evolve => commands::evolve::run(cfg, &output),
        Command::Verify => commands::verify::run(cfg, &output),
    }
}
