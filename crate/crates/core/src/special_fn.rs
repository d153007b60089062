//! Standard normal pdf, cdf and quantile, and Owen's T function.
//!
//! The public functions validate their arguments. The crate-internal
//! `norm_*` and [`owen_t_unchecked`] variants skip validation and are what
//! the distribution code calls in hot loops.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::quad;
use crate::{Error, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// √(2π)
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::Domain(format!("probability {value} outside [0, 1]")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - p`.
    #[inline]
    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

fn require_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {x}")))
    }
}

#[inline]
pub(crate) fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x), with full relative accuracy in the lower tail.
#[inline]
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x), with full relative accuracy in the upper tail.
#[inline]
pub(crate) fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

// Acklam's rational approximation, relative error < 1.15e-9 before refinement.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const ACKLAM_P_LOW: f64 = 0.024_25;

/// Initial approximation for p in (0, 0.5].
fn acklam_lower(p: f64) -> f64 {
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    if p < ACKLAM_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Φ⁻¹(p) for p in (0, 1). The lower half is computed directly and refined
/// with one Halley step against the erfc-based cdf; the upper half uses
/// Φ⁻¹(p) = −Φ⁻¹(1 − p), where `1 − p` is exact for p ≥ 0.5.
#[inline]
pub(crate) fn norm_quantile(p: f64) -> f64 {
    if p > 0.5 {
        return -norm_quantile(1.0 - p);
    }
    if p == 0.5 {
        return 0.0;
    }
    let x = acklam_lower(p);
    if 0.5 * x * x > 700.0 {
        // exp(x²/2) would overflow; only subnormal p get here.
        return x;
    }
    let e = norm_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Owen's T without argument checks. Finite arguments are assumed.
pub(crate) fn owen_t_unchecked(h: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let sign = a.signum();
    let (h, a) = (h.abs(), a.abs());
    let t = if a <= 1.0 {
        owen_t_integral(h, a)
    } else {
        // T(h,a) + T(ah,1/a) = ½Φ(h) + ½Φ(ah) − Φ(h)Φ(ah) for h ≥ 0, a > 0,
        // written through upper-tail probabilities to avoid cancellation.
        let ah = a * h;
        let (q_h, q_ah) = (norm_sf(h), norm_sf(ah));
        0.5 * (norm_cdf(h) * q_ah + norm_cdf(ah) * q_h) - owen_t_integral(ah, 1.0 / a)
    };
    sign * t
}

/// Direct quadrature of the defining integral; intended for 0 < a ≤ 1.
fn owen_t_integral(h: f64, a: f64) -> f64 {
    let half_h2 = 0.5 * h * h;
    // The integrand is bounded by exp(-h²/2); below this the result underflows.
    if half_h2 > 745.0 {
        return 0.0;
    }
    let scale = (-half_h2).exp();
    let integrand = move |t: f64| {
        let one_t2 = 1.0 + t * t;
        (-half_h2 * one_t2).exp() / one_t2
    };
    let v = quad::integrate(integrand, 0.0, a, 1e-17 * scale * a, 1e-15);
    v / (2.0 * PI)
}

/// Standard normal density φ(x) = e^{−x²/2}/√(2π).
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    require_finite("x", x)?;
    Ok(norm_pdf(x))
}

/// Standard normal cdf Φ(x).
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    require_finite("x", x)?;
    Ok(Probability(norm_cdf(x)))
}

/// Standard normal quantile Φ⁻¹(p), defined for 0 < p < 1.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(norm_quantile(p))
    } else {
        Err(Error::Domain(format!("quantile requires 0 < p < 1, got {p}")))
    }
}

/// Owen's T function, T(h, a) = (1/2π) ∫₀^a exp(−h²(1+t²)/2)/(1+t²) dt.
pub fn owen_t(h: f64, a: f64) -> Result<f64> {
    require_finite("h", h)?;
    require_finite("a", a)?;
    Ok(owen_t_unchecked(h, a))
}
