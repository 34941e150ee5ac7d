use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("jet order {order} exceeds the configured maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("jet dimension mismatch: expected {expected} variables, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{op}: degenerate base value {value:e} (too close to a singularity)")]
    Degenerate { op: &'static str, value: f64 },

    #[error("{op}: base value {value:e} outside the function's domain")]
    OutOfDomain { op: &'static str, value: f64 },

    #[error("field is not real: imaginary part {imag:e}{}", fmt_point(.point))]
    NonReal { imag: f64, point: Option<Vec<f64>> },

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("variable index {index} outside 1..={n}")]
    BadVariable { index: usize, n: usize },

    #[error("newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular jacobian in {0}")]
    SingularJacobian(&'static str),

    #[error("degenerate gradient (norm {norm:e})")]
    DegenerateGradient { norm: f64 },

    #[error("point at distance {delta:e} violates the collar (0, {collar:e}]")]
    CollarViolation { delta: f64, collar: f64 },

    #[error("not strictly pseudoconvex: Levi minimum {levi_min:e} at {point:?}")]
    NotPseudoconvex { levi_min: f64, point: Vec<f64> },

    #[error("adjugate form {value:e} too small (point not strictly pseudoconvex)")]
    DegenerateAdjugate { value: f64 },

    #[error("lower-order term t^{order} does not vanish (coefficient {value:e})")]
    NonVanishing { order: usize, value: f64 },

    #[error("extrapolation residual {residual:e} above tolerance {tolerance:e}")]
    Extrapolation { residual: f64, tolerance: f64 },

    #[error("no patch constant in the grid makes the series plurisubharmonic (min eigenvalue {min_eigenvalue:e}); shrink the collar")]
    PatchFailed { min_eigenvalue: f64 },

    #[error("profile is negative ({value:e}) at t = {t}")]
    NegativeProfile { t: f64, value: f64 },

    #[error("profile is not integrable near t = {t}")]
    NonIntegrable { t: f64 },

    #[error("projective chart breakdown: {0}")]
    ChartBreakdown(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("unsupported report schema version {found} (expected major {expected_major})")]
    SchemaVersion { found: String, expected_major: u64 },

    #[error("i/o error: {0}")]
    Io(String),
}

fn fmt_point(point: &Option<Vec<f64>>) -> String {
    match point {
        Some(p) => format!(" at witness point {p:?}"),
        None => String::new(),
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
