//! Lognormal, skew normal (SN) and log skew normal (LSN) families.
//!
//! Parameters are stored in natural-log units. An LSN variable is `L = e^X`
//! with `X ~ SN(λ, ε, ω)`.

use rand::RngCore;

use crate::montecarlo::standard_normal;
use crate::special_fn::{norm_cdf, norm_pdf, owen_t_unchecked};
use crate::{db_to_nat, nat_to_db, Error, Result};

/// One lognormal term `e^X`, `X ~ N(mu_nat, sigma_nat²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalComponent {
    mu_nat: f64,
    sigma_nat: f64,
}

impl LognormalComponent {
    pub fn new(mu_nat: f64, sigma_nat: f64) -> Result<Self> {
        if !mu_nat.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("must be finite, got {mu_nat}"),
            });
        }
        if !(sigma_nat > 0.0 && sigma_nat.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be finite and > 0, got {sigma_nat}"),
            });
        }
        Ok(LognormalComponent { mu_nat, sigma_nat })
    }

    pub fn from_db(mu_db: f64, sigma_db: f64) -> Result<Self> {
        Self::new(db_to_nat(mu_db), db_to_nat(sigma_db))
    }

    pub fn mu_nat(&self) -> f64 {
        self.mu_nat
    }

    pub fn sigma_nat(&self) -> f64 {
        self.sigma_nat
    }

    pub fn mu_db(&self) -> f64 {
        nat_to_db(self.mu_nat)
    }

    pub fn sigma_db(&self) -> f64 {
        nat_to_db(self.sigma_nat)
    }

    pub fn pdf(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        let z = (l.ln() - self.mu_nat) / self.sigma_nat;
        norm_pdf(z) / (l * self.sigma_nat)
    }

    pub fn cdf(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        norm_cdf((l.ln() - self.mu_nat) / self.sigma_nat)
    }

    pub fn moments(&self) -> Moments2 {
        let s2 = self.sigma_nat * self.sigma_nat;
        let mean = (self.mu_nat + 0.5 * s2).exp();
        Moments2 {
            mean,
            variance: (2.0 * self.mu_nat + s2).exp() * s2.exp_m1(),
        }
    }
}

/// Mean and variance of a positive random variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments2 {
    pub mean: f64,
    pub variance: f64,
}

impl Moments2 {
    /// Squared coefficient of variation, variance / mean².
    pub fn cv2(&self) -> f64 {
        self.variance / (self.mean * self.mean)
    }
}

/// Skew normal `SN(λ, ε, ω)` with density `(2/ω) φ(z) Φ(λz)`, `z = (x−ε)/ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalParams {
    lambda: f64,
    epsilon: f64,
    omega: f64,
}

impl SkewNormalParams {
    pub fn new(lambda: f64, epsilon: f64, omega: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be finite, got {lambda}"),
            });
        }
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be finite, got {epsilon}"),
            });
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("must be finite and > 0, got {omega}"),
            });
        }
        Ok(SkewNormalParams { lambda, epsilon, omega })
    }

    /// Builds parameters from a location and scale given in dB.
    pub fn from_db(lambda: f64, epsilon_db: f64, omega_db: f64) -> Result<Self> {
        Self::new(lambda, db_to_nat(epsilon_db), db_to_nat(omega_db))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn epsilon_db(&self) -> f64 {
        nat_to_db(self.epsilon)
    }

    pub fn omega_db(&self) -> f64 {
        nat_to_db(self.omega)
    }

    /// β = λ/√(1+λ²), always in (−1, 1).
    pub fn beta(&self) -> f64 {
        self.lambda / (1.0 + self.lambda * self.lambda).sqrt()
    }

    #[inline]
    fn standardize(&self, x: f64) -> f64 {
        (x - self.epsilon) / self.omega
    }

    pub fn sn_pdf(&self, x: f64) -> f64 {
        let z = self.standardize(x);
        2.0 / self.omega * norm_pdf(z) * norm_cdf(self.lambda * z)
    }

    /// `Φ(z) − 2T(z, λ)`.
    pub fn sn_cdf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        let z = self.standardize(x);
        (norm_cdf(z) - 2.0 * owen_t_unchecked(z, self.lambda)).clamp(0.0, 1.0)
    }

    /// Survival function `1 − F(x) = Φ(−z) + 2T(z, λ)`, accurate in the upper tail.
    pub fn sn_sf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 1.0;
        }
        if x == f64::INFINITY {
            return 0.0;
        }
        let z = self.standardize(x);
        (norm_cdf(-z) + 2.0 * owen_t_unchecked(z, self.lambda)).clamp(0.0, 1.0)
    }

    pub fn lsn_pdf(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        self.sn_pdf(l.ln()) / l
    }

    pub fn lsn_cdf(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        self.sn_cdf(l.ln())
    }

    pub fn lsn_sf(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 1.0;
        }
        self.sn_sf(l.ln())
    }

    /// Mean and variance of `e^X` from the moment generating function
    /// `E[e^{tX}] = 2 exp(tε + t²ω²/2) Φ(βωt)`.
    pub fn lsn_moments(&self) -> Moments2 {
        let w2 = self.omega * self.omega;
        let bw = self.beta() * self.omega;
        let mean = 2.0 * (self.epsilon + 0.5 * w2).exp() * norm_cdf(bw);
        // cv² = e^{ω²} Φ(2βω) / (2Φ²(βω)) − 1, evaluated without cancellation.
        let cv2 = (w2 + norm_cdf(2.0 * bw).ln() - std::f64::consts::LN_2 - 2.0 * norm_cdf(bw).ln()).exp_m1();
        Moments2 {
            mean,
            variance: mean * mean * cv2,
        }
    }

    /// Parameters of `−X`.
    pub fn negate(&self) -> Self {
        SkewNormalParams {
            lambda: -self.lambda,
            epsilon: -self.epsilon,
            omega: self.omega,
        }
    }

    /// Parameters of `X + W` with `W ~ N(mean, std²)` independent of `X`.
    pub fn add_independent_normal(&self, mean: f64, std: f64) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(Error::Domain(format!(
                "normal standard deviation must be finite and >= 0, got {std}"
            )));
        }
        if !mean.is_finite() {
            return Err(Error::Domain(format!("normal mean must be finite, got {mean}")));
        }
        let ratio2 = (std / self.omega).powi(2);
        let lambda = self.lambda / ((1.0 + self.lambda * self.lambda) * ratio2 + 1.0).sqrt();
        SkewNormalParams::new(
            lambda,
            self.epsilon + mean,
            (self.omega * self.omega + std * std).sqrt(),
        )
    }

    /// Draws one SN variate as `ε + ω(β|U₀| + √(1−β²) U₁)`.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let beta = self.beta();
        let u0 = standard_normal(rng);
        let u1 = standard_normal(rng);
        self.epsilon + self.omega * (beta * u0.abs() + (1.0 - beta * beta).sqrt() * u1)
    }
}
