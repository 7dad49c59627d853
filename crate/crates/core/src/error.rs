//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("x = {x} outside field domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("field has no Taylor coefficients in t")]
    EmptyTaylor,

    #[error("bump radius must be positive, got {0}")]
    InvalidRadius(f64),

    #[error("test function supports derivatives up to order {have}, need {need}")]
    InsufficientOrder { have: usize, need: usize },

    #[error("field coefficient is not of the form i*b with b real: max |Re a| = {max_re} vs tol*sup|a| = {allowed}")]
    NotImaginaryForm { max_re: f64, allowed: f64 },

    #[error("field Taylor data has {have} coefficients, operation needs {need}")]
    InsufficientTaylorOrder { have: usize, need: usize },

    #[error("tower order k = {k} must exceed the growth order N = {n}")]
    KTooSmall { k: usize, n: usize },

    #[error("quadrature did not converge: refinement estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    QuadratureNonConvergence { estimate: f64, tol: f64 },

    #[error("oscillation unresolved: plan needs {required} nodes, cap is {cap}")]
    OscillationUnresolved { required: usize, cap: usize },

    #[error("argument {re}+{im}i leaves the sector |Im| < |Re| of the principal branch")]
    BranchViolation { re: f64, im: f64 },

    #[error("grid degenerate: {0}")]
    DegenerateGrid(String),

    #[error("t-grid must be strictly decreasing")]
    NotDecreasing,

    #[error("delta ladder must have at least 4 rungs, got {0}")]
    LadderTooShort(usize),

    #[error("xi ladder must have at least {need} rungs, got {have}")]
    XiLadderTooShort { need: usize, have: usize },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("derivative formula is stated for t != 0")]
    ZeroTime,

    #[error("first integral must satisfy Z(x,0) = x for the pairing pathway")]
    NonNormalizedIntegral,

    #[error("xi-coverage too small for inversion: boundary mass estimate {estimate:.3e} exceeds {allowed:.3e}")]
    TailDominated { estimate: f64, allowed: f64 },

    #[error("{0}")]
    Config(String),
}
