use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not stabilise: relative change {change:e} after {nodes} nodes")]
    Convergence { change: f64, nodes: usize },

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("path of {points} points exceeds the cap of {cap}")]
    PathSize { points: usize, cap: usize },

    #[error("time {t} is not a grid point of the path")]
    OffGrid { t: f64 },

    #[error("refinement step {new_dt} is not a dyadic fraction of the local step {local_dt}")]
    Alignment { new_dt: f64, local_dt: f64 },

    #[error("path covers [{have_lo}, {have_hi}] but [{want_lo}, {want_hi}] was requested")]
    Coverage {
        have_lo: f64,
        have_hi: f64,
        want_lo: f64,
        want_hi: f64,
    },

    #[error("forward and backward log-slopes disagree by {mismatch:e} at t = {at}")]
    StitchMismatch { mismatch: f64, at: f64 },

    #[error("two-horizon discrepancy {discrepancy:e} exceeds {tol:e}")]
    Certificate { discrepancy: f64, tol: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("trajectory never reaches {level}")]
    NoCrossing { level: f64 },

    #[error("inverse iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("series needs more than {terms} terms (tail estimate {tail:e})")]
    MoreTerms { terms: usize, tail: f64 },

    #[error("at a = {a}: {source}")]
    AtParameter { a: f64, source: Box<Error> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
