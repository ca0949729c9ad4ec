use std::fmt;

use synthgen_core::Error;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration or flags (exit 2).
    Config(String),
    /// A prerequisite artifact is missing (exit 3).
    Missing(String),
    /// The stage itself failed (exit 1).
    Stage(anyhow::Error),
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn missing(msg: impl Into<String>) -> Self {
        Failure::Missing(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Missing(_) => 3,
            Failure::Stage(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Missing(m) => write!(f, "missing prerequisite: {m}"),
            Failure::Stage(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation { .. } => Failure::Config(e.to_string()),
            other => Failure::Stage(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Stage(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Stage(e.into())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;
