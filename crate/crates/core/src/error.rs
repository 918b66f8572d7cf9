use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid mesh, model, decomposition or scheme parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A coefficient or integrand produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Newton or linear solver did not converge.
    #[error("solver failure: {what} (worst residual {residual:.3e})")]
    Solver { what: String, residual: f64 },

    /// Two fields or vectors live on incompatible grids.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A failure inside an outer iteration sweep.
    #[error("sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn at_sweep(self, sweep: usize) -> Self {
        Error::Sweep {
            sweep,
            source: Box::new(self),
        }
    }

    /// Strips sweep wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sweep { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
