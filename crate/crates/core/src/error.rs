use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or distribution parameter is invalid.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    /// The precision analysis produced a non-positive reduced row sum.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// The moment equation has no root with a non-negative shape; the
    /// clamped shape is reported.
    #[error("degenerate fit: SLN CV^2 {cv2_sln} is below the zero-shape LSN CV^2 {cv2_lsn_zero}; shape clamped to {clamped_lambda}")]
    DegenerateFit {
        cv2_sln: f64,
        cv2_lsn_zero: f64,
        clamped_lambda: f64,
    },

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// A probability level outside the range an estimator supports.
    #[error("probability {p} outside supported range [{lo}, {hi}]")]
    Range { p: f64, lo: f64, hi: f64 },

    #[error("metric error: {0}")]
    Metric(String),
}
