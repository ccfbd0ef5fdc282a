use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid lattice, Hamiltonian, protocol, or analysis settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine did not reach its requested accuracy.
    #[error("numerical error: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    /// A state failed the normalization invariant on input.
    #[error("state is not normalized: |psi|^2 = {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("site index {site} out of range for {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("time {0} is not on the record grid")]
    TimeNotOnGrid(f64),

    /// One or more trajectories of an ensemble failed.
    #[error("{} trajectories failed, first: #{} ({})", failures.len(), failures[0].0, failures[0].1)]
    Trajectories { failures: Vec<(u64, String)> },

    #[error("file schema mismatch: expected {expected}, found {found}")]
    Schema { expected: String, found: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            residual,
        }
    }
}
