use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates its documented range or shape.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// `x^T θ = 0`: the prior puts no mass where the likelihood is positive.
    #[error("degenerate Bayes update{}: prior and likelihood supports are disjoint", step_suffix(.step))]
    DegenerateUpdate { step: Option<usize> },

    /// An observation produced a non-finite log-likelihood ratio.
    #[error("degenerate observation: {0}")]
    DegenerateObservation(String),

    /// A closed-form bound is undefined for the given inputs.
    #[error("bound undefined: {0}")]
    BoundUndefined(String),

    /// Message passing was requested on a graph with a cycle.
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    /// A brute-force enumeration would exceed its budget.
    #[error("resource budget exceeded: {0}")]
    Resource(String),

    /// Experiment or network configuration is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error at {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),
}

fn step_suffix(step: &Option<usize>) -> String {
    match step {
        Some(k) => format!(" at step {k}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Self::Argument(msg.into())
    }

    /// Attach a step index to a degenerate-update error; other errors pass through.
    #[must_use]
    pub fn at_step(self, k: usize) -> Self {
        match self {
            Self::DegenerateUpdate { .. } => Self::DegenerateUpdate { step: Some(k) },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
