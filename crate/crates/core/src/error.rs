use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested computation exceeds a configured size guard.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("objective is not finite at x = {x}")]
    NonFinite { x: f64 },

    /// A computed quantity violated an invariant it should satisfy by construction.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    /// One or more damping fits ended on a bound of the search interval.
    #[error("fit did not converge for level(s) {levels:?}")]
    Unconverged { levels: Vec<usize> },

    #[error("level {level}: {source}")]
    Level { level: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Strips `Level` wrappers and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Level { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {p} is not a probability in [0, 1]")))
    }
}

pub(crate) fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {x} must be finite and > 0")))
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("time {t} must be finite and >= 0")))
    }
}
