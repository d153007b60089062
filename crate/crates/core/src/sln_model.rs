//! The correlated lognormal sum `Λ = Σ e^{Xᵢ}`, `X ~ N(μ, M)`.

use nalgebra::{DMatrix, DVector};

use crate::distributions::LognormalComponent;
use crate::special_fn::norm_quantile;
use crate::{db_to_nat, Error, Result};

/// Row sums with magnitude at or below this fraction of `max |B(i,j)|` are
/// treated as zero when building the reduced index set.
pub const ROW_SUM_ZERO_THRESHOLD: f64 = 1e-10;

/// Minimum magnitude of `(eⁱ − w̃)ᵀ B w̃` for the tail assumption to hold.
pub const ASSUMPTION_THRESHOLD: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Mean vector and log-domain covariance of an N-dimensional lognormal vector.
#[derive(Debug, Clone)]
pub struct SumModel {
    mu: DVector<f64>,
    cov: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
    diagonal: bool,
}

/// Mean `m` and variance `D²` of the sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumMoments {
    pub m: f64,
    pub d2: f64,
}

impl SumMoments {
    pub fn cv2(&self) -> f64 {
        self.d2 / (self.m * self.m)
    }
}

impl SumModel {
    pub fn new(mu: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: "model needs at least one component".into(),
            });
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::InvalidParameter {
                name: "cov",
                reason: format!("expected {n}x{n}, got {}x{}", cov.nrows(), cov.ncols()),
            });
        }
        if let Some(bad) = mu.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("non-finite entry {bad}"),
            });
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cov",
                reason: "non-finite entry".into(),
            });
        }
        for i in 0..n {
            if cov[(i, i)] <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "cov",
                    reason: format!("diagonal entry {i} is {} (must be > 0)", cov[(i, i)]),
                });
            }
        }
        let scale = cov.amax();
        let mut diagonal = true;
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::InvalidParameter {
                        name: "cov",
                        reason: format!("not symmetric at ({i}, {j})"),
                    });
                }
                if cov[(i, j)] != 0.0 || cov[(j, i)] != 0.0 {
                    diagonal = false;
                }
            }
        }
        let chol_lower = if diagonal {
            DMatrix::from_diagonal(&cov.diagonal().map(f64::sqrt))
        } else {
            cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.unpack()
        };
        Ok(SumModel {
            mu: DVector::from_vec(mu),
            cov,
            chol_lower,
            diagonal,
        })
    }

    /// Covariance `ρσᵢσⱼ` off the diagonal, `σᵢ²` on it.
    /// Requires `ρ ∈ (−1/(N−1), 1)`.
    pub fn equicorrelated(mu: &[f64], sigma: &[f64], rho: f64) -> Result<Self> {
        let n = mu.len();
        if sigma.len() != n {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("length {} differs from mu length {n}", sigma.len()),
            });
        }
        let lower = if n > 1 { -1.0 / (n as f64 - 1.0) } else { -1.0 };
        if !(rho > lower && rho < 1.0) {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("must lie in ({lower}, 1) for N = {n}, got {rho}"),
            });
        }
        let cov = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                sigma[i] * sigma[i]
            } else {
                rho * sigma[i] * sigma[j]
            }
        });
        Self::new(mu.to_vec(), cov)
    }

    /// Builds the model from per-component standard deviations and a
    /// correlation matrix with unit diagonal.
    pub fn from_correlation(mu: &[f64], sigma: &[f64], corr: &DMatrix<f64>) -> Result<Self> {
        let n = mu.len();
        if sigma.len() != n || corr.nrows() != n || corr.ncols() != n {
            return Err(Error::InvalidParameter {
                name: "correlation",
                reason: format!("dimensions do not match N = {n}"),
            });
        }
        for i in 0..n {
            if (corr[(i, i)] - 1.0).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::InvalidParameter {
                    name: "correlation",
                    reason: format!("diagonal entry {i} is {} (must be 1)", corr[(i, i)]),
                });
            }
        }
        let cov = DMatrix::from_fn(n, n, |i, j| corr[(i, j)] * sigma[i] * sigma[j]);
        Self::new(mu.to_vec(), cov)
    }

    /// Equicorrelated model from dB means and standard deviations.
    pub fn from_db(means_db: &[f64], sigmas_db: &[f64], rho: f64) -> Result<Self> {
        let mu: Vec<f64> = means_db.iter().map(|&v| db_to_nat(v)).collect();
        let sigma: Vec<f64> = sigmas_db.iter().map(|&v| db_to_nat(v)).collect();
        Self::equicorrelated(&mu, &sigma, rho)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = M`.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol_lower
    }

    /// True when all off-diagonal covariances are exactly zero.
    pub fn is_independent(&self) -> bool {
        self.diagonal
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.cov[(i, i)].sqrt()
    }

    pub fn components(&self) -> Vec<LognormalComponent> {
        (0..self.len())
            .map(|i| LognormalComponent::new(self.mu[i], self.sigma(i)).expect("validated model"))
            .collect()
    }

    /// Returns the model with `shift` added to every `μᵢ` (every component
    /// scaled by `e^shift`).
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.mu.add_scalar_mut(shift);
        out
    }

    /// `m = Σ e^{μᵢ+σᵢ²/2}`, `D² = Σᵢⱼ e^{μᵢ+μⱼ+(σᵢ²+σⱼ²)/2}(e^{M(i,j)} − 1)`.
    pub fn sum_moments(&self) -> SumMoments {
        let n = self.len();
        let half_log_means: Vec<f64> = (0..n).map(|i| self.mu[i] + 0.5 * self.cov[(i, i)]).collect();
        let m: f64 = half_log_means.iter().map(|v| v.exp()).sum();
        let mut d2 = 0.0;
        for i in 0..n {
            if self.diagonal {
                d2 += (2.0 * half_log_means[i]).exp() * self.cov[(i, i)].exp_m1();
                continue;
            }
            for j in 0..n {
                let c = self.cov[(i, j)];
                if c != 0.0 {
                    d2 += (half_log_means[i] + half_log_means[j]).exp() * c.exp_m1();
                }
            }
        }
        SumMoments { m, d2: d2.max(0.0) }
    }

    /// `B = M⁻¹`, via the Cholesky factor.
    pub fn precision_matrix(&self) -> DMatrix<f64> {
        if self.diagonal {
            DMatrix::from_diagonal(&self.cov.diagonal().map(|v| 1.0 / v))
        } else {
            invert_spd(&self.cov).expect("validated model is positive definite")
        }
    }

    /// Precision-matrix tail analysis: reduced index set, tail slopes on
    /// lognormal probability scale and the tail assumption check.
    pub fn precision_analysis(&self) -> Result<PrecisionAnalysis> {
        let n = self.len();
        let b = self.precision_matrix();
        let row_sums: Vec<f64> = b.row_iter().map(|r| r.sum()).collect();
        let zero = ROW_SUM_ZERO_THRESHOLD * b.amax();
        let reduced_index_set: Vec<usize> = (0..n).filter(|&i| row_sums[i].abs() > zero).collect();
        let n_tilde = reduced_index_set.len();
        if n_tilde == 0 {
            return Err(Error::DegenerateModel("every precision row sum is zero".into()));
        }

        let m_tilde = self.cov.select_rows(&reduced_index_set).select_columns(&reduced_index_set);
        let b_tilde = if n_tilde == n {
            b.clone()
        } else if self.diagonal {
            DMatrix::from_diagonal(&m_tilde.diagonal().map(|v| 1.0 / v))
        } else {
            invert_spd(&m_tilde).ok_or(Error::NotPositiveDefinite)?
        };
        let b_tilde_row_sums: Vec<f64> = b_tilde.row_iter().map(|r| r.sum()).collect();
        let sum_b_tilde: f64 = b_tilde_row_sums.iter().sum();
        if !(sum_b_tilde > 0.0) {
            return Err(Error::DegenerateModel(format!(
                "sum of reduced precision row sums is {sum_b_tilde}"
            )));
        }
        let max_diag_b_tilde = b_tilde.diagonal().max();

        // w = B̃⁻¹1 / (1ᵀB̃⁻¹1) = M̃1 / (1ᵀM̃1)
        let m_tilde_ones: Vec<f64> = m_tilde.row_iter().map(|r| r.sum()).collect();
        let total: f64 = m_tilde_ones.iter().sum();
        let w: Vec<f64> = m_tilde_ones.iter().map(|v| v / total).collect();
        let mut w_tilde = vec![0.0; n];
        for (k, &i) in reduced_index_set.iter().enumerate() {
            w_tilde[i] = w[k];
        }

        let assumption_ok = if n_tilde == n {
            true
        } else {
            let bw = &b * DVector::from_column_slice(&w_tilde);
            let w_bw: f64 = w_tilde.iter().zip(bw.iter()).map(|(a, b)| a * b).sum();
            (0..n)
                .filter(|i| !reduced_index_set.contains(i))
                .all(|i| (bw[i] - w_bw).abs() > ASSUMPTION_THRESHOLD)
        };

        Ok(PrecisionAnalysis {
            b,
            row_sums,
            reduced_index_set,
            n_tilde,
            b_tilde,
            b_tilde_row_sums,
            sum_b_tilde,
            max_diag_b_tilde,
            left_slope: sum_b_tilde.sqrt(),
            right_slope: 1.0 / max_diag_b_tilde,
            assumption_ok,
            w,
            w_tilde,
        })
    }
}

/// Inverse of a symmetric positive definite matrix via `M = LLᵀ`.
fn invert_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = m.clone().cholesky()?.inverse();
    // Symmetrize away round-off.
    Some((&inv + inv.transpose()) * 0.5)
}

/// Result of [`SumModel::precision_analysis`].
#[derive(Debug, Clone)]
pub struct PrecisionAnalysis {
    /// `B = M⁻¹`.
    pub b: DMatrix<f64>,
    /// `Bᵢ`, row sums of `B`.
    pub row_sums: Vec<f64>,
    /// Zero-based indices `i` with `Bᵢ ≠ 0`.
    pub reduced_index_set: Vec<usize>,
    pub n_tilde: usize,
    /// Inverse of the covariance restricted to the reduced index set.
    pub b_tilde: DMatrix<f64>,
    pub b_tilde_row_sums: Vec<f64>,
    pub sum_b_tilde: f64,
    pub max_diag_b_tilde: f64,
    /// `√(Σ B̃ᵢ)`, the asymptotic lower-tail slope.
    pub left_slope: f64,
    /// `1 / maxᵢ B̃(i,i)`, used only for the starting guess and diagnostics.
    pub right_slope: f64,
    /// Whether the tail assumption holds for every index outside the
    /// reduced set (vacuously true when the set is complete).
    pub assumption_ok: bool,
    pub w: Vec<f64>,
    /// `w` scattered back to the original N indices, zero elsewhere.
    pub w_tilde: Vec<f64>,
}

/// Points mapped onto lognormal probability scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbScalePoints {
    /// `(x, Φ⁻¹(p))` pairs.
    pub points: Vec<(f64, f64)>,
    /// Number of input points with `p ∉ (0, 1)`.
    pub dropped: usize,
}

/// Maps `(x = ln l, p = F(l))` pairs to `(x, Φ⁻¹(p))`. A lognormal cdf
/// becomes the line `y = (x − μ)/σ`.
pub fn prob_scale_transform(cdf_values: &[(f64, f64)]) -> ProbScalePoints {
    let mut points = Vec::with_capacity(cdf_values.len());
    let mut dropped = 0;
    for &(x, p) in cdf_values {
        if p > 0.0 && p < 1.0 && x.is_finite() {
            points.push((x, norm_quantile(p)));
        } else {
            dropped += 1;
        }
    }
    ProbScalePoints { points, dropped }
}

/// Ordinary least-squares line through a point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub max_abs_residual: f64,
}

pub fn least_squares_line(points: &[(f64, f64)]) -> Option<LineFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = points
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept,
        r2,
        max_abs_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::norm_cdf;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    fn identity_error(model: &SumModel) -> f64 {
        let prod = model.precision_matrix() * model.cov();
        (prod - DMatrix::identity(model.len(), model.len())).amax()
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(SumModel::new(vec![], DMatrix::zeros(0, 0)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(SumModel::new(vec![0.0, 0.0], asym).is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(SumModel::new(vec![0.0, 0.0], not_pd).unwrap_err(), Error::NotPositiveDefinite);
        let zero_var = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(SumModel::new(vec![0.0], zero_var).is_err());
        assert!(SumModel::equicorrelated(&[0.0; 3], &[1.0; 3], -0.5).is_err());
        assert!(SumModel::equicorrelated(&[0.0; 3], &[1.0; 3], 1.0).is_err());
        assert!(SumModel::equicorrelated(&[0.0; 3], &[1.0; 3], -0.49).is_ok());
        assert!(SumModel::equicorrelated(&[0.0; 3], &[1.0; 2], 0.0).is_err());
    }

    #[test]
    fn sum_moments_single_component() {
        let s = SumModel::equicorrelated(&[0.0], &[1.0], 0.0).unwrap().sum_moments();
        assert!(rel(s.m, 1.648_721_270_700_128_2) < 1e-14);
        assert!(rel(s.d2, 4.670_774_270_471_605) < 1e-14);
    }

    #[test]
    fn sum_moments_pairs() {
        let s = SumModel::equicorrelated(&[0.0; 2], &[1.0; 2], 0.0).unwrap().sum_moments();
        assert!(rel(s.m, 3.297_442_541_400_256_3) < 1e-14);
        assert!(rel(s.d2, 9.341_548_540_943_21) < 1e-14);

        let s = SumModel::equicorrelated(&[0.0; 2], &[1.0; 2], 0.5).unwrap().sum_moments();
        assert!(rel(s.d2, 12.868_363_024_701_249) < 1e-14);
        assert!(rel(s.cv2(), 1.183_501_549_579_586_7) < 1e-14);
    }

    #[test]
    fn precision_analysis_single() {
        let pa = SumModel::equicorrelated(&[0.3], &[1.0], 0.0).unwrap().precision_analysis().unwrap();
        assert_eq!(pa.b[(0, 0)], 1.0);
        assert_eq!(pa.left_slope, 1.0);
        assert_eq!(pa.right_slope, 1.0);
        assert_eq!(pa.reduced_index_set, vec![0]);
        assert!(pa.assumption_ok);
        assert_eq!(pa.w, vec![1.0]);
    }

    #[test]
    fn precision_analysis_correlated_pair() {
        let model = SumModel::equicorrelated(&[0.0; 2], &[1.0; 2], 0.5).unwrap();
        let pa = model.precision_analysis().unwrap();
        let expected = [[4.0 / 3.0, -2.0 / 3.0], [-2.0 / 3.0, 4.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((pa.b[(i, j)] - expected[i][j]).abs() < 1e-14);
            }
            assert!((pa.row_sums[i] - 2.0 / 3.0).abs() < 1e-14);
        }
        assert!((pa.sum_b_tilde - 4.0 / 3.0).abs() < 1e-14);
        assert!((pa.left_slope - 1.154_700_538_379_251_5).abs() < 1e-14);
        assert!((pa.right_slope - 0.75).abs() < 1e-14);
        assert_eq!(pa.n_tilde, 2);
        assert!((pa.w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(identity_error(&model) < 1e-9);
    }

    // Sherman–Morrison: for M = σ²((1−ρ)I + ρ11ᵀ), each row of B sums to
    // 1/(σ²(1+(N−1)ρ)) and B(i,i) = (1 − ρ/(1+(N−1)ρ)) / (σ²(1−ρ)).
    #[test]
    fn equicorrelation_matches_sherman_morrison() {
        for &n in &[2usize, 5, 20] {
            for &rho in &[0.0, 0.3, 0.7, 0.9] {
                for &sigma in &[0.3, 1.0, 2.5] {
                    let model = SumModel::equicorrelated(&vec![0.0; n], &vec![sigma; n], rho).unwrap();
                    let pa = model.precision_analysis().unwrap();
                    let nf = n as f64;
                    let denom = 1.0 + (nf - 1.0) * rho;
                    let sum = nf / (sigma * sigma * denom);
                    let diag = (1.0 - rho / denom) / (sigma * sigma * (1.0 - rho));
                    assert!(rel(pa.sum_b_tilde, sum) < 1e-9, "n={n} rho={rho}");
                    assert!(rel(pa.max_diag_b_tilde, diag) < 1e-9);
                    assert!(identity_error(&model) < 1e-9);
                    assert_eq!(pa.n_tilde, n);
                    for &wi in &pa.w {
                        assert!((wi - 1.0 / nf).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn independent_components() {
        for n in 1..=6 {
            let sigma: Vec<f64> = (0..n).map(|i| 0.4 + 0.3 * i as f64).collect();
            let model = SumModel::equicorrelated(&vec![0.1; n], &sigma, 0.0).unwrap();
            assert!(model.is_independent());
            let pa = model.precision_analysis().unwrap();
            let expected: f64 = sigma.iter().map(|s| 1.0 / (s * s)).sum();
            assert!(rel(pa.sum_b_tilde, expected) < 1e-14);
            assert!(rel(pa.left_slope, expected.sqrt()) < 1e-14);
        }
    }

    #[test]
    fn zero_row_sum_is_removed() {
        // B has a zero first row sum; M = B⁻¹.
        let b = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 3.0, 0.0, -1.0, 0.0, 3.0]);
        let m = b.clone().try_inverse().unwrap();
        let model = SumModel::new(vec![0.0; 3], m.clone()).unwrap();
        let pa = model.precision_analysis().unwrap();
        assert_eq!(pa.reduced_index_set, vec![1, 2]);
        assert_eq!(pa.n_tilde, 2);
        let m_tilde = m.select_rows(&[1, 2]).select_columns(&[1, 2]);
        let b_tilde = m_tilde.try_inverse().unwrap();
        assert!(rel(pa.sum_b_tilde, b_tilde.sum()) < 1e-12);
        assert_eq!(pa.w_tilde[0], 0.0);
        assert!((pa.w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // (e⁰ − w̃)ᵀ B w̃ with w̃ = (0, ½, ½) is −5/2 here.
        assert!(pa.assumption_ok);
    }

    #[test]
    fn prob_scale_lognormal_is_line() {
        for &sigma in &[1.0, 2.0] {
            // Upper end kept short: Φ close to 1 loses digits that the
            // inverse then amplifies.
            let pts: Vec<(f64, f64)> = (-60..=15)
                .map(|i| {
                    let x = i as f64 * 0.1;
                    (x, norm_cdf(x / sigma))
                })
                .chain([(0.0, 0.0), (1.0, 1.0)])
                .collect();
            let out = prob_scale_transform(&pts);
            assert_eq!(out.dropped, 2);
            let fit = least_squares_line(&out.points).unwrap();
            assert!((fit.slope - 1.0 / sigma).abs() < 1e-10);
            assert!(fit.intercept.abs() < 1e-10);
            assert!(fit.max_abs_residual <= 1e-10);
        }
    }

    #[test]
    fn shifted_model_scales_mean() {
        let model = SumModel::equicorrelated(&[0.0, 0.5], &[1.0, 0.7], 0.2).unwrap();
        let a = model.sum_moments();
        let b = model.shifted(2.0f64.ln()).sum_moments();
        assert!(rel(b.m, 2.0 * a.m) < 1e-14);
        assert!(rel(b.d2, 4.0 * a.d2) < 1e-13);
    }
}
