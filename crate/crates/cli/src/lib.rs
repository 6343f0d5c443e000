//! Command implementations behind the `limsup` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0}")]
    Core(#[from] limsup_core::Error),
    #[error("no fixed point after {0} stages; partial trace written")]
    StageOverflow(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("acceptance failures: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use limsup_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Core(E::DepthTooLarge(_) | E::WindowExceedsSchedule { .. }) => 3,
            CliError::Core(_) => 2,
            CliError::StageOverflow(_) | CliError::Io(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}

pub const OUT_ENV: &str = "LIMSUP_OUT";

/// Output root: the explicit value, else `$LIMSUP_OUT`, else `./limsup-out`.
pub fn output_root(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("limsup-out"))
}
