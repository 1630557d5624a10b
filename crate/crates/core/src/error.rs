use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Wavelength outside the validity window of a Sellmeier coefficient set.
    #[error("wavelength {wavelength_um:.5} µm outside the validity window [{min_um}, {max_um}] µm")]
    OutOfWindow {
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    /// A Fourier component with |q| ≥ k: it does not propagate.
    #[error("evanescent mode: q = {q:.6e} rad/m, Ω = {omega:.6e} rad/s, k = {k:.6e} rad/m")]
    Evanescent { q: f64, omega: f64, k: f64 },

    /// Generic precondition violation with a description of the constraint.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("Monte Carlo estimate failed: {0}")]
    FailedEstimate(String),

    #[error("grid too large for the dense SVD oracle: {cells} cells per photon (limit {limit}); try {suggestion}")]
    OracleTooLarge {
        cells: usize,
        limit: usize,
        suggestion: String,
    },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfWindow { .. } => "out_of_window",
            Error::Evanescent { .. } => "evanescent",
            Error::Domain(_) => "domain",
            Error::Validation { .. } => "validation",
            Error::Parse { .. } => "parse",
            Error::FailedEstimate(_) => "failed_estimate",
            Error::OracleTooLarge { .. } => "oracle_too_large",
            Error::Linalg(_) => "linalg",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
