//! Analytic log skew normal fit to a correlated lognormal sum, plus the
//! Fenton–Wilkinson lognormal baseline.
//!
//! The fit fixes the LSN lower-tail slope `√(1+λ²)/ω` on lognormal
//! probability scale to the sum's asymptotic slope `√(Σ B̃ᵢ)`, which ties the
//! scale to the shape: `ω² = (1+λ²)/Σ B̃ᵢ`. The shape then solves
//! `CV²_LSN(λ) = CV²_SLN`, and the location restores the mean.

use crate::distributions::{LognormalComponent, SkewNormalParams};
use crate::sln_model::{PrecisionAnalysis, SumModel};
use crate::special_fn::norm_cdf;
use crate::{Error, Result};

/// Required relative agreement between the two sides of the moment equation.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Final bracket width of the bisection.
pub const BISECTION_WIDTH: f64 = 1e-13;
/// Largest shape the bracket expansion will try.
pub const MAX_LAMBDA: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: SkewNormalParams,
    /// Starting guess from upper-slope matching.
    pub lambda0: f64,
    /// Bisection steps taken by the root finder.
    pub iterations: usize,
    /// `|CV²_LSN(λ)/CV²_SLN − 1|` at the returned shape.
    pub residual: f64,
    pub diagnostics: PrecisionAnalysis,
}

/// Squared coefficient of variation of the sum, `D²/m²`.
pub fn cv2_sln(model: &SumModel) -> f64 {
    model.sum_moments().cv2()
}

/// CV² of an LSN with shape `λ` and scale `ω = √((1+λ²)/s)`:
/// `e^{ω²} Φ(2λ/√s) / (2Φ²(λ/√s)) − 1`.
pub fn cv2_lsn_at(lambda: f64, sum_b_tilde: f64) -> f64 {
    let w2 = (1.0 + lambda * lambda) / sum_b_tilde;
    let a = lambda / sum_b_tilde.sqrt();
    (w2 + norm_cdf(2.0 * a).ln() - std::f64::consts::LN_2 - 2.0 * norm_cdf(a).ln()).exp_m1()
}

/// `λ₀ = √(max(maxᵢ B̃(i,i)² · Σ B̃ᵢ − 1, 0))`.
pub fn initial_guess(pa: &PrecisionAnalysis) -> f64 {
    let arg = pa.max_diag_b_tilde * pa.max_diag_b_tilde * pa.sum_b_tilde - 1.0;
    if arg > 0.0 && arg.is_finite() {
        arg.sqrt()
    } else {
        0.0
    }
}

/// Root of the moment equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `cv2_lsn_at(λ, Σ B̃ᵢ) = cv2_sln(model)` for `λ ≥ 0`.
///
/// The right side is increasing in `λ`, so the root is bracketed by
/// doubling from `max(2λ₀, 1)` and then bisected.
pub fn solve_lambda(model: &SumModel, pa: &PrecisionAnalysis) -> Result<LambdaSolution> {
    solve_for_target(cv2_sln(model), pa.sum_b_tilde, initial_guess(pa))
}

// By Jensen's inequality CV²_SLN ≥ e^{1/Σ B̃ᵢ} − 1 = cv2_lsn_at(0, Σ B̃ᵢ) for
// any valid model, so the degenerate branch only guards against round-off.
fn solve_for_target(target: f64, s: f64, lambda0: f64) -> Result<LambdaSolution> {
    let at_zero = cv2_lsn_at(0.0, s);
    let gap = target / at_zero - 1.0;
    if gap < -RESIDUAL_TOLERANCE {
        return Err(Error::DegenerateFit {
            cv2_sln: target,
            cv2_lsn_zero: at_zero,
            clamped_lambda: 0.0,
        });
    }
    // Within round-off of the zero-shape value (a single lognormal): the
    // residual contract already holds at λ = 0.
    if gap <= 1e-12 {
        return Ok(LambdaSolution {
            lambda: 0.0,
            iterations: 0,
            residual: (at_zero / target - 1.0).abs(),
        });
    }

    let excess = |lambda: f64| cv2_lsn_at(lambda, s) - target;
    let mut lo = 0.0;
    let mut hi = (2.0 * lambda0).max(1.0);
    while excess(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_LAMBDA {
            return Err(Error::FitFailure(format!(
                "moment equation not bracketed for shape up to {MAX_LAMBDA}"
            )));
        }
    }

    let mut iterations = 0;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let residual = (cv2_lsn_at(lambda, s) / target - 1.0).abs();
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::FitFailure(format!(
            "residual {residual:e} above {RESIDUAL_TOLERANCE:e} at shape {lambda}"
        )));
    }
    Ok(LambdaSolution {
        lambda,
        iterations,
        residual,
    })
}

/// Fits `SN(λ, ε, ω)` so that `e^X` approximates the sum:
/// `ω = √((1+λ²)/Σ B̃ᵢ)` and `ε = ln m − ω²/2 − ln(2Φ(λ/√Σ B̃ᵢ))`.
pub fn fit_lsn(model: &SumModel) -> Result<FitResult> {
    let pa = model.precision_analysis()?;
    let lambda0 = initial_guess(&pa);
    let sol = solve_lambda(model, &pa)?;
    let s = pa.sum_b_tilde;
    let lambda = sol.lambda;
    let omega = ((1.0 + lambda * lambda) / s).sqrt();
    let m = model.sum_moments().m;
    let epsilon = m.ln() - 0.5 * omega * omega - (2.0 * norm_cdf(lambda / s.sqrt())).ln();
    Ok(FitResult {
        params: SkewNormalParams::new(lambda, epsilon, omega)?,
        lambda0,
        iterations: sol.iterations,
        residual: sol.residual,
        diagnostics: pa,
    })
}

/// Lognormal with the sum's mean and variance:
/// `σ² = ln(1 + D²/m²)`, `μ = ln m − σ²/2`.
pub fn fit_fenton_wilkinson(model: &SumModel) -> Result<LognormalComponent> {
    let mom = model.sum_moments();
    let s2 = mom.cv2().ln_1p();
    LognormalComponent::new(mom.m.ln() - 0.5 * s2, s2.sqrt())
}
