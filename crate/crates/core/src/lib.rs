//! Log skew normal (LSN) approximation of sums of correlated lognormal
//! random variables.
//!
//! The fit matches the mean and squared coefficient of variation of the sum
//! while pinning the LSN lower-tail slope (on lognormal probability scale)
//! to the asymptotic slope implied by the precision matrix of the
//! log-domain covariance. A Fenton–Wilkinson lognormal is provided as a
//! baseline, a Monte Carlo sampler as ground truth, and an outage
//! probability model for hexagonal cellular layouts as an application.
//!
//! All internal quantities use natural-log units. Decibel values enter and
//! leave through [`db_to_nat`] / [`nat_to_db`].

pub mod distributions;
mod error;
pub mod lsn_fit;
pub mod montecarlo;
pub mod outage;
pub mod quad;
pub mod sln_model;
pub mod special_fn;

pub use distributions::{LognormalComponent, Moments2, SkewNormalParams};
pub use error::{Error, Result};
pub use lsn_fit::{fit_fenton_wilkinson, fit_lsn, FitResult};
pub use montecarlo::{EmpiricalCdf, SampleSpec};
pub use sln_model::{PrecisionAnalysis, SumModel, SumMoments};
pub use special_fn::Probability;

/// ξ = ln(10)/10, the factor converting dB quantities to natural-log units.
pub const XI: f64 = std::f64::consts::LN_10 / 10.0;

#[inline]
pub fn db_to_nat(db: f64) -> f64 {
    db * XI
}

#[inline]
pub fn nat_to_db(nat: f64) -> f64 {
    nat / XI
}
