use std::fmt;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
    Check,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a physical formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The reservoir has run dry: dN/dμ is too small to invert.
    #[error("reservoir singularity: {0}")]
    Singular(String),

    #[error("step size underflow at t = {t:.6e} (h = {step:.3e}): {diagnostic}")]
    Stiff { t: f64, step: f64, diagnostic: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("analysis window undeterminable: {0}")]
    Window(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Window(_) => ErrorKind::Check,
            _ => ErrorKind::Numeric,
        }
    }

    pub(crate) fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
