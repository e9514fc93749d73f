use alloc::string::String;
use core::fmt;

use crate::tape::TapeError;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    Tape(TapeError),
    /// The plant left the finite domain during a rollout.
    Diverged { trial: u64, step: usize, cause: TapeError },
    InvalidConfig(String),
    NonFiniteGradient { tensor: String },
    UnknownTensor(String),
    SamplingExhausted { attempts: usize },
    InvalidLesion { lesion: &'static str, architecture: &'static str },
    /// Propagated with the batch it happened in.
    InBatch { epoch: usize, batch: usize, cause: alloc::boxed::Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Tape(e) => write!(f, "{e}"),
            Error::Diverged { trial, step, cause } => {
                write!(f, "trial {trial} diverged at step {step}: {cause}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFiniteGradient { tensor } => write!(f, "non-finite gradient for `{tensor}`"),
            Error::UnknownTensor(name) => write!(f, "unknown tensor `{name}`"),
            Error::SamplingExhausted { attempts } => {
                write!(f, "no valid trial after {attempts} attempts; check the workspace bounds")
            }
            Error::InvalidLesion { lesion, architecture } => {
                write!(f, "lesion {lesion} is not defined for a {architecture} network")
            }
            Error::InBatch { epoch, batch, cause } => {
                write!(f, "epoch {epoch}, batch {batch}: {cause}")
            }
        }
    }
}

impl From<TapeError> for Error {
    fn from(e: TapeError) -> Self {
        Error::Tape(e)
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
