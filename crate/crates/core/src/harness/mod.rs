//! Command-line experiment harness: argument/config handling, dispatch, and
//! JSON/CSV reports.

pub mod cli;
pub mod run;

use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

pub use cli::{parse_args, Cli, Command};
pub use run::run;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{stage}: {message}")]
    Validation { stage: &'static str, message: String },

    #[error("{stage}: {message}")]
    Runtime { stage: &'static str, message: String },

    #[error(transparent)]
    Usage(#[from] clap::Error),
}

impl HarnessError {
    /// 2 for bad input or configuration, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation { .. } | HarnessError::Usage(_) => 2,
            HarnessError::Runtime { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn validation<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> HarnessError {
    move |e| HarnessError::Validation {
        stage,
        message: e.to_string(),
    }
}

pub(crate) fn runtime<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> HarnessError {
    move |e| HarnessError::Runtime {
        stage,
        message: e.to_string(),
    }
}

/// Envelope shared by every JSON report. `results` holds the numeric
/// payload; only `elapsed_seconds` varies between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: C,
    pub elapsed_seconds: f64,
    pub results: R,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(command: &'static str, seed: u64, config: C, elapsed: Duration, results: R) -> Self {
        Self {
            command,
            version: VERSION,
            seed,
            config,
            elapsed_seconds: elapsed.as_secs_f64(),
            results,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &(self.to_json() + "\n"))
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(runtime("create output directory"))?;
    }
    std::fs::write(path, text).map_err(runtime("write output"))
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(runtime("create output directory"))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(runtime("write csv"))?;
    for r in rows {
        w.serialize(r).map_err(runtime("write csv"))?;
    }
    w.flush().map_err(runtime("write csv"))
}
