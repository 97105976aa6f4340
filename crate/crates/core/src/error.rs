use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a Gaussian state needs at least one mode")]
    NoModes,

    #[error("mode index {index} out of range for a {n_modes}-mode state")]
    ModeIndex { index: usize, n_modes: usize },

    #[error("two-mode operation needs distinct modes, got {0} twice")]
    SameMode(usize),

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("frequency grid is empty")]
    EmptyGrid,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("trace has no reference channel")]
    MissingReference,

    #[error("state is unphysical: min eigenvalue of cov + (i/4)Ω is {0:e}")]
    Unphysical(f64),

    #[error("malformed trace file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_param(
    name: &'static str,
    value: f64,
    ok: bool,
    reason: &'static str,
) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
