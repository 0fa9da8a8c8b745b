use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is not unitary: ‖MM* − I‖ = {defect:.3e} exceeds {tol:.1e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("outer radius must exceed 1, got {0}")]
    InvalidRadius(f64),

    #[error("an atlas needs at least 3 charts, got {0}")]
    ChartCount(usize),

    #[error("point {0} lies outside the chart")]
    OutsideChart(String),

    #[error("point {0} lies outside the closed strip 0 ≤ Re z ≤ ln r1")]
    OutsideStrip(String),

    #[error("point {0} lies outside the closed annulus")]
    OutsideAnnulus(String),

    #[error("sections live over different bundles or frames")]
    BundleMismatch,

    #[error("exponent discrepancy {0} is not an integer")]
    ExponentDrift(f64),

    #[error("diagonal coefficient C[{0}][{0}] must be zero")]
    NonZeroDiagonal(usize),

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("tuple does not commute: max commutator norm {0:.3e}")]
    NotCommuting(f64),

    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("invalid witness: residual {residual:.3e} exceeds {tol:.1e}")]
    InvalidWitness { residual: f64, tol: f64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
