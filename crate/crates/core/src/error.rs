use thiserror::Error;

use crate::steppers::GnTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {what} (expected {expected}, got {got})")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The Gauss-Newton iteration produced non-finite values. The trace
    /// covers every iteration completed before the failure.
    #[error("divergence in {context} after {} iterations", trace.deltas.len())]
    Divergence {
        context: String,
        trace: Box<GnTrace>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("k_max = {k_max} aliases on a rule with {nodes} nodes")]
    Aliasing { k_max: usize, nodes: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}
