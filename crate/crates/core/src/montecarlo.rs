//! Monte Carlo ground truth for the lognormal sum.
//!
//! Sampling is split into `n_streams` independent ChaCha8 streams derived
//! from `(seed, stream index)`. Stream `k` always produces the same block of
//! samples and the blocks are concatenated in stream order before sorting,
//! so the output depends only on `(seed, n_streams, n_samples)` and never on
//! the number of worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::special_fn::norm_quantile;
use crate::sln_model::SumModel;
use crate::{Error, Result};

pub const DEFAULT_STREAMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSpec {
    pub n_samples: usize,
    pub seed: u64,
    pub n_streams: usize,
}

impl SampleSpec {
    pub fn new(n_samples: usize, seed: u64) -> Result<Self> {
        Self::with_streams(n_samples, seed, DEFAULT_STREAMS)
    }

    pub fn with_streams(n_samples: usize, seed: u64, n_streams: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                reason: "must be >= 1".into(),
            });
        }
        if n_streams == 0 {
            return Err(Error::InvalidParameter {
                name: "n_streams",
                reason: "must be >= 1".into(),
            });
        }
        Ok(SampleSpec {
            n_samples,
            seed,
            n_streams,
        })
    }

    /// Generator for stream `k`.
    pub fn stream_rng(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }

    fn stream_len(&self, k: usize) -> usize {
        let base = self.n_samples / self.n_streams;
        base + usize::from(k < self.n_samples % self.n_streams)
    }
}

/// Uniform draw on the open interval (0, 1): the top 52 bits plus a half
/// step, so both ends stay representable and away from 0 and 1.
#[inline]
pub fn uniform_open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Standard normal deviate by inversion; consumes exactly one `u64`.
#[inline]
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    norm_quantile(uniform_open01(rng))
}

/// Runs `draw` once per sample across all streams and returns the results
/// in canonical (stream, index) order.
pub fn sample_streams<T, F>(spec: &SampleSpec, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let blocks: Vec<Vec<T>> = (0..spec.n_streams)
        .into_par_iter()
        .map(|k| {
            let mut rng = spec.stream_rng(k);
            (0..spec.stream_len(k)).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(spec.n_samples);
    for block in blocks {
        out.extend(block);
    }
    out
}

/// Draws `X = μ + L Z` for a [`SumModel`], with `L` its Cholesky factor.
#[derive(Debug, Clone)]
pub struct CorrelatedNormalSampler {
    mu: Vec<f64>,
    factor: Factor,
}

#[derive(Debug, Clone)]
enum Factor {
    Diagonal(Vec<f64>),
    /// Row `i` holds `L(i, 0..=i)`.
    Lower(Vec<Vec<f64>>),
}

impl CorrelatedNormalSampler {
    pub fn new(model: &SumModel) -> Self {
        let n = model.len();
        let l = model.cholesky_lower();
        let factor = if model.is_independent() {
            Factor::Diagonal((0..n).map(|i| l[(i, i)]).collect())
        } else {
            Factor::Lower((0..n).map(|i| (0..=i).map(|j| l[(i, j)]).collect()).collect())
        };
        CorrelatedNormalSampler {
            mu: model.mu().iter().copied().collect(),
            factor,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Fills `x` with one draw; `z` is scratch space of the same length.
    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, z: &mut [f64], x: &mut [f64]) {
        match &self.factor {
            Factor::Diagonal(d) => {
                for i in 0..self.mu.len() {
                    x[i] = self.mu[i] + d[i] * standard_normal(rng);
                }
            }
            Factor::Lower(rows) => {
                for zi in z.iter_mut() {
                    *zi = standard_normal(rng);
                }
                for (i, row) in rows.iter().enumerate() {
                    let dot: f64 = row.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
                    x[i] = self.mu[i] + dot;
                }
            }
        }
    }

    /// One realization of `Σ e^{Xᵢ}`.
    pub fn sample_sum<R: RngCore + ?Sized>(&self, rng: &mut R, z: &mut [f64], x: &mut [f64]) -> f64 {
        self.sample_into(rng, z, x);
        x.iter().map(|v| v.exp()).sum()
    }
}

/// Samples the sum `n_samples` times and returns its empirical cdf.
pub fn sample_sln(model: &SumModel, spec: &SampleSpec) -> EmpiricalCdf {
    let sampler = CorrelatedNormalSampler::new(model);
    let n = sampler.dim();
    let blocks: Vec<Vec<f64>> = (0..spec.n_streams)
        .into_par_iter()
        .map(|k| {
            let mut rng = spec.stream_rng(k);
            let (mut z, mut x) = (vec![0.0; n], vec![0.0; n]);
            (0..spec.stream_len(k))
                .map(|_| sampler.sample_sum(&mut rng, &mut z, &mut x))
                .collect()
        })
        .collect();
    EmpiricalCdf::from_samples(blocks.concat())
}

/// Sorted sample with step-function cdf and interpolated quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted_values: Vec<f64>,
}

impl EmpiricalCdf {
    /// Sorts `samples`; panics if it is empty or contains NaN.
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty(), "empirical cdf needs at least one sample");
        assert!(samples.iter().all(|v| !v.is_nan()), "NaN sample");
        samples.par_sort_unstable_by(f64::total_cmp);
        EmpiricalCdf {
            sorted_values: samples,
        }
    }

    pub fn len(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_values.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    pub fn min(&self) -> f64 {
        self.sorted_values[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted_values[self.len() - 1]
    }

    /// Fraction of samples `<= x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        self.sorted_values.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Linear interpolation between order statistics at (one-based) rank
    /// `p·n`, defined for `1/n <= p <= 1 − 1/n`. A single-sample cdf
    /// returns its value for every `p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let n = self.len();
        if n == 1 && (0.0..=1.0).contains(&p) {
            return Ok(self.sorted_values[0]);
        }
        let nf = n as f64;
        let (lo, hi) = (1.0 / nf, 1.0 - 1.0 / nf);
        // Allow for p·n landing a rounding error outside an integer rank.
        let slack = 4.0 * f64::EPSILON;
        if !(p >= lo - slack && p <= hi + slack) {
            return Err(Error::Range { p, lo, hi });
        }
        let rank = (p * nf).clamp(1.0, nf - 1.0);
        let k = rank.floor();
        let frac = rank - k;
        let below = self.sorted_values[k as usize - 1];
        if frac == 0.0 {
            return Ok(below);
        }
        let above = self.sorted_values[k as usize];
        Ok(below + frac * (above - below))
    }

    /// `(ln x₍ₖ₎, k/n)` for every order statistic whose cdf value lies in
    /// `[p_lo, p_hi]`.
    pub fn log_cdf_points(&self, p_lo: f64, p_hi: f64) -> Vec<(f64, f64)> {
        let nf = self.len() as f64;
        let first = ((p_lo * nf).ceil() as usize).max(1);
        let last = ((p_hi * nf).floor() as usize).min(self.len());
        (first..=last)
            .map(|k| (self.sorted_values[k - 1].ln(), k as f64 / nf))
            .collect()
    }

    /// Two-sided Kolmogorov–Smirnov distance to a continuous cdf.
    pub fn ks_distance<F: Fn(f64) -> f64 + Sync>(&self, cdf: F) -> f64 {
        let nf = self.len() as f64;
        self.sorted_values
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / nf).abs().max(((i + 1) as f64 / nf - f).abs())
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Inverts a continuous cdf by bisection on `ln x` within `[lo, hi]`.
pub fn analytic_quantile<F: Fn(f64) -> f64>(cdf: F, p: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Metric(format!("invalid bracket [{lo}, {hi}]")));
    }
    if cdf(lo) > p || cdf(hi) < p {
        return Err(Error::Metric(format!(
            "analytic cdf does not bracket p = {p} on [{lo}, {hi}]"
        )));
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if cdf(mid.exp()) < p {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Signed horizontal gap in dB, `10·log10(q_analytic(p)) − 10·log10(q_empirical(p))`,
/// at each level.
pub fn horizontal_deviation_db<F: Fn(f64) -> f64>(
    analytic_cdf: F,
    ecdf: &EmpiricalCdf,
    levels: &[f64],
) -> Result<Vec<f64>> {
    let (lo, hi) = (ecdf.min() / 10.0, ecdf.max() * 10.0);
    levels
        .iter()
        .map(|&p| {
            let q_emp = ecdf.quantile(p)?;
            let q_an = analytic_quantile(&analytic_cdf, p, lo, hi)?;
            Ok(10.0 * (q_an / q_emp).log10())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::LognormalComponent;
    use crate::sln_model::{least_squares_line, prob_scale_transform};
    use crate::XI;

    #[test]
    fn uniform_stays_open() {
        struct Fixed(u64);
        impl RngCore for Fixed {
            fn next_u32(&mut self) -> u32 {
                self.0 as u32
            }
            fn next_u64(&mut self) -> u64 {
                self.0
            }
            fn fill_bytes(&mut self, _: &mut [u8]) {}
        }
        let lo = uniform_open01(&mut Fixed(0));
        let hi = uniform_open01(&mut Fixed(u64::MAX));
        assert!(lo > 0.0 && hi < 1.0);
        assert!(standard_normal(&mut Fixed(0)).is_finite());
        assert!(standard_normal(&mut Fixed(u64::MAX)).is_finite());
    }

    #[test]
    fn spec_validation() {
        assert!(SampleSpec::new(0, 1).is_err());
        assert!(SampleSpec::with_streams(10, 1, 0).is_err());
        let s = SampleSpec::with_streams(10, 1, 3).unwrap();
        assert_eq!((0..3).map(|k| s.stream_len(k)).sum::<usize>(), 10);
    }

    #[test]
    fn ecdf_steps() {
        let e = EmpiricalCdf::from_samples(vec![3.0, 1.0, 2.0]);
        assert_eq!(e.cdf_at(0.5), 0.0);
        assert_eq!(e.cdf_at(10.0), 1.0);
        assert_eq!(e.cdf_at(2.0), 2.0 / 3.0);
        assert_eq!(e.cdf_at(1.999), 1.0 / 3.0);
    }

    #[test]
    fn quantile_rules() {
        let e = EmpiricalCdf::from_samples(vec![3.0, 1.0, 2.0]);
        assert_eq!(e.quantile(1.0 / 3.0).unwrap(), 1.0);
        assert_eq!(e.quantile(2.0 / 3.0).unwrap(), 2.0);
        assert_eq!(e.quantile(0.5).unwrap(), 1.5);
        assert!(matches!(e.quantile(0.1), Err(Error::Range { .. })));
        assert!(e.quantile(0.9).is_err());

        let single = EmpiricalCdf::from_samples(vec![4.0]);
        assert_eq!(single.quantile(0.5).unwrap(), 4.0);
    }

    #[test]
    fn degenerate_horizontal_deviation() {
        let e = EmpiricalCdf::from_samples(vec![2.0]);
        let step = |x: f64| if x >= 2.0 { 1.0 } else { 0.0 };
        let d = horizontal_deviation_db(step, &e, &[0.5]).unwrap();
        assert!(d[0].abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = SumModel::equicorrelated(&[0.0, 0.1, -0.2], &[1.0, 0.5, 0.8], 0.4).unwrap();
        let spec = SampleSpec::with_streams(10_000, 42, 7).unwrap();
        let a = sample_sln(&model, &spec);
        let b = sample_sln(&model, &spec);
        assert_eq!(a.sorted_values(), b.sorted_values());
        let other = sample_sln(&model, &SampleSpec::with_streams(10_000, 43, 7).unwrap());
        assert_ne!(a.sorted_values(), other.sorted_values());
    }

    #[test]
    fn thread_count_does_not_change_samples() {
        let model = SumModel::equicorrelated(&[0.0; 4], &[0.7; 4], 0.3).unwrap();
        let spec = SampleSpec::with_streams(20_000, 9, 16).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_sln(&model, &spec))
        };
        assert_eq!(run(1).sorted_values(), run(3).sorted_values());
    }

    #[test]
    fn single_lognormal_passes_ks() {
        let model = SumModel::equicorrelated(&[0.0], &[1.0], 0.0).unwrap();
        let n = 1_000_000;
        let e = sample_sln(&model, &SampleSpec::new(n, 1).unwrap());
        let c = LognormalComponent::new(0.0, 1.0).unwrap();
        let d = e.ks_distance(|x| c.cdf(x));
        assert!(d <= 1.95 / (n as f64).sqrt(), "KS {d}");
    }

    #[test]
    fn strongly_correlated_mean() {
        let model = SumModel::equicorrelated(&[0.0; 2], &[0.1; 2], 0.99).unwrap();
        let n = 1_000_000;
        let e = sample_sln(&model, &SampleSpec::new(n, 5).unwrap());
        let v = e.sorted_values();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let m = model.sum_moments();
        assert!((mean - m.m).abs() < 4.0 * (var / n as f64).sqrt());
        assert!((var / m.d2 - 1.0).abs() < 0.02);
    }

    #[test]
    fn empirical_quantile_of_lognormal() {
        let model = SumModel::equicorrelated(&[0.0], &[1.0], 0.0).unwrap();
        let e = sample_sln(&model, &SampleSpec::new(1_000_000, 2).unwrap());
        let q = e.quantile(0.8413).unwrap();
        assert!((q / 1f64.exp() - 1.0).abs() < 0.01);
    }

    #[test]
    fn prob_scale_of_sampled_lognormal() {
        let sigma = 1.0;
        let model = SumModel::equicorrelated(&[0.0], &[sigma], 0.0).unwrap();
        let e = sample_sln(&model, &SampleSpec::new(1_000_000, 4).unwrap());
        let pts = prob_scale_transform(&e.log_cdf_points(0.01, 0.99));
        let fit = least_squares_line(&pts.points).unwrap();
        assert!((fit.slope * sigma - 1.0).abs() < 0.02, "slope {}", fit.slope);
        assert!(fit.r2 >= 0.999);
    }

    #[test]
    fn shifted_analytic_deviates_by_one_db() {
        let model = SumModel::equicorrelated(&[0.0], &[1.0], 0.0).unwrap();
        let e = sample_sln(&model, &SampleSpec::new(1_000_000, 8).unwrap());
        let exact = LognormalComponent::new(0.0, 1.0).unwrap();
        let shifted = LognormalComponent::new(XI, 1.0).unwrap();
        let levels = [0.01, 0.5, 0.99];
        let base = horizontal_deviation_db(|x| exact.cdf(x), &e, &levels).unwrap();
        let d = horizontal_deviation_db(|x| shifted.cdf(x), &e, &levels).unwrap();
        for (b, s) in base.iter().zip(&d) {
            assert!((s - b - 1.0).abs() < 1e-9);
            assert!(b.abs() < 0.05);
        }
    }

    #[test]
    fn moment_sanity_across_models() {
        for (rho, sigma) in [(0.0, 0.7), (0.5, 1.0), (0.9, 0.4)] {
            let model = SumModel::equicorrelated(&[0.0, 0.3, -0.3, 0.1], &[sigma; 4], rho).unwrap();
            let n = 400_000;
            let e = sample_sln(&model, &SampleSpec::new(n, 17).unwrap());
            let v = e.sorted_values();
            let mean = v.iter().sum::<f64>() / n as f64;
            let m = model.sum_moments();
            assert!((mean - m.m).abs() < 5.0 * (m.d2 / n as f64).sqrt());
        }
    }
}
