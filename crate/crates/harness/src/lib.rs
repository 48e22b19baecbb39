//! Configuration files, trajectory CSVs, SVG plots, verification reports and
//! parameter sweeps built on `eos-core`.

pub mod config;
pub mod csv;
pub mod plot;
pub mod replay;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{ConfigError, RunConfig};
pub use run::{run, RunOutcome};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const VERIFICATION_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DIVERGED: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The initial point could not be produced (empty region, sampler budget).
    #[error("initial point: {0}")]
    Init(eos_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::CsvError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Csv(_) => exit::VERIFICATION_FAILED,
            _ => exit::CONFIG,
        }
    }
}
