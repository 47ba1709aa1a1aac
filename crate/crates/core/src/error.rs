use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown function `{name}` at line {line}, column {column}")]
    UnknownFunction {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("variable `{0}` is not declared")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("base point mismatch: expected {expected:?}, got {actual:?}")]
    BasePointMismatch { expected: Vec<f64>, actual: Vec<f64> },
    #[error("singular jet: {0}")]
    SingularJet(String),
    #[error("jet order {requested} exceeds the cap of {cap}")]
    OrderTooHigh { requested: usize, cap: usize },
    #[error("order mismatch: {0}")]
    OrderMismatch(String),
    #[error("inconsistent group law: {0}")]
    InconsistentGroupLaw(String),
    #[error("chart breakdown: {0}")]
    ChartBreakdown(String),
    #[error("grid too small: need at least {required} nodes per axis, got {actual}")]
    GridTooSmall { required: usize, actual: usize },
    #[error("generator map not injective at order {0}")]
    NotInjectiveYet(usize),
    #[error("missing order-{0} lift")]
    MissingLift(usize),
    #[error("Newton iteration did not converge: {0}")]
    NewtonFailed(String),
    #[error("velocity field is not divergence free (max |div v| = {max:e})")]
    DivergenceNotZero { max: f64 },
    #[error("acceleration field is not curl free (max |curl| = {max:e})")]
    CurlNotZero { max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature with {points} points per axis cannot integrate degree {degree} exactly")]
    QuadratureOrderTooLow { points: usize, degree: usize },
    #[error("expression is not a polynomial: {0}")]
    NonPolynomial(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("malformed fixture: {0}")]
    Fixture(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Fixture(e.to_string())
    }
}
