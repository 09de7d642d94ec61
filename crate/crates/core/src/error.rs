use std::io;

use thiserror::Error;

/// Coarse failure classes. The command-line front end maps each one to a
/// distinct exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: {0}")]
    Length(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("ridgeless limit is singular on the interpolation threshold 2N = n = {n}")]
    PhaseBoundary { n: usize },
    #[error("numerical degeneracy: {0}")]
    Degeneracy(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Format(_)
            | Error::Length(_)
            | Error::Consistency(_)
            | Error::Capacity(_)
            | Error::DegenerateData(_) => ErrorKind::Data,
            Error::Shape(_)
            | Error::Domain(_)
            | Error::Convergence { .. }
            | Error::PhaseBoundary { .. }
            | Error::Degeneracy(_) => ErrorKind::Numerical,
            Error::Io(_) | Error::Csv(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
