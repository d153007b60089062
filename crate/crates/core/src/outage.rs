//! Outage probability of a mobile in a hexagonal network with lognormal
//! shadowing, with the interference approximated by an LSN.
//!
//! In natural-log units the serving signal is `N(−η ln r, s²)` with
//! `s = ξσ_dB` and the interference is fitted as `SN(λ, ε, ω)`. Their
//! difference is skew normal again, so `P(SIR < δ)` is one SN cdf
//! evaluation.

use crate::distributions::SkewNormalParams;
use crate::lsn_fit::{fit_lsn, FitResult};
use crate::montecarlo::{sample_streams, standard_normal, CorrelatedNormalSampler, EmpiricalCdf, SampleSpec};
use crate::sln_model::SumModel;
use crate::{db_to_nat, Error, Result, XI};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    /// Cell range `R` in km (hexagon circumradius).
    pub cell_range_km: f64,
    pub rings: usize,
    pub path_loss_eta: f64,
    /// Shadowing standard deviation per link, dB.
    pub sigma_db: f64,
    /// Pairwise correlation of interferer shadowing.
    pub shadowing_rho: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            cell_range_km: 1.0,
            rings: 18,
            path_loss_eta: 3.0,
            sigma_db: 6.0,
            shadowing_rho: 0.0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_range_km > 0.0 && self.cell_range_km.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cell_range_km",
                reason: format!("must be > 0, got {}", self.cell_range_km),
            });
        }
        if self.rings == 0 {
            return Err(Error::InvalidParameter {
                name: "rings",
                reason: "must be >= 1".into(),
            });
        }
        if !(self.path_loss_eta > 2.0 && self.path_loss_eta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "path_loss_eta",
                reason: format!("must be > 2, got {}", self.path_loss_eta),
            });
        }
        if !(self.sigma_db >= 0.0 && self.sigma_db.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_db",
                reason: format!("must be >= 0, got {}", self.sigma_db),
            });
        }
        if !(0.0..1.0).contains(&self.shadowing_rho) {
            return Err(Error::InvalidParameter {
                name: "shadowing_rho",
                reason: format!("must lie in [0, 1), got {}", self.shadowing_rho),
            });
        }
        Ok(())
    }

    /// `Rc = (√3/2)·R`, half the distance between neighbouring base stations.
    pub fn rc(&self) -> f64 {
        0.5 * 3f64.sqrt() * self.cell_range_km
    }

    /// Number of interfering base stations, `3·rings·(rings+1)`.
    pub fn interferer_count(&self) -> usize {
        3 * self.rings * (self.rings + 1)
    }
}

/// Serving base station at the origin and its interferers.
#[derive(Debug, Clone, PartialEq)]
pub struct HexNetwork {
    pub rc: f64,
    pub interferers: Vec<Point>,
    /// Ring index (1-based) of each interferer.
    pub rings: Vec<usize>,
}

/// Triangular lattice of base stations with spacing `2·Rc`, out to
/// `cfg.rings` hexagonal rings around the serving cell.
pub fn build_hex_network(cfg: &NetworkConfig) -> Result<HexNetwork> {
    cfg.validate()?;
    let rc = cfg.rc();
    let k = cfg.rings as i64;
    let u = [2.0 * rc, 0.0];
    let v = [rc, 3f64.sqrt() * rc];
    let mut interferers = Vec::with_capacity(cfg.interferer_count());
    let mut rings = Vec::with_capacity(cfg.interferer_count());
    for ring in 1..=k {
        for a in -ring..=ring {
            for b in -ring..=ring {
                if (a.abs() + b.abs() + (a + b).abs()) / 2 == ring {
                    let (af, bf) = (a as f64, b as f64);
                    interferers.push([af * u[0] + bf * v[0], af * u[1] + bf * v[1]]);
                    rings.push(ring as usize);
                }
            }
        }
    }
    Ok(HexNetwork { rc, interferers, rings })
}

/// Mobile position relative to its serving base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilePlacement {
    pub distance_km: f64,
    /// Radians from the +x axis; 0 points at the nearest interferer.
    pub bearing: f64,
}

impl MobilePlacement {
    pub fn new(distance_km: f64, bearing: f64) -> Result<Self> {
        if !(distance_km > 0.0 && distance_km.is_finite()) {
            return Err(Error::Geometry(format!("mobile distance must be > 0, got {distance_km}")));
        }
        Ok(MobilePlacement { distance_km, bearing })
    }

    /// `fraction·Rc` along the bearing toward the nearest interferer.
    pub fn at_rc_fraction(cfg: &NetworkConfig, fraction: f64) -> Result<Self> {
        Self::new(fraction * cfg.rc(), 0.0)
    }

    pub fn position(&self) -> Point {
        [self.distance_km * self.bearing.cos(), self.distance_km * self.bearing.sin()]
    }
}

fn interferer_distances(cfg: &NetworkConfig, mob: &MobilePlacement) -> Result<Vec<f64>> {
    let net = build_hex_network(cfg)?;
    let p = mob.position();
    net.interferers
        .iter()
        .map(|q| {
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            if d > 1e-12 * net.rc {
                Ok(d)
            } else {
                Err(Error::Geometry(format!("mobile coincides with interferer at ({}, {})", q[0], q[1])))
            }
        })
        .collect()
}

/// One lognormal component per interferer: `μⱼ = −η ln rⱼ`, `σⱼ = ξσ_dB`,
/// equicorrelated with `cfg.shadowing_rho`. Transmit power and `K` cancel
/// in the SIR and are omitted.
pub fn interference_model(cfg: &NetworkConfig, mob: &MobilePlacement) -> Result<SumModel> {
    let dist = interferer_distances(cfg, mob)?;
    let mu: Vec<f64> = dist.iter().map(|r| -cfg.path_loss_eta * r.ln()).collect();
    let sigma = vec![db_to_nat(cfg.sigma_db); mu.len()];
    SumModel::equicorrelated(&mu, &sigma, cfg.shadowing_rho)
}

/// SIR in dB without shadowing.
pub fn median_free_sir_db(cfg: &NetworkConfig, mob: &MobilePlacement) -> Result<f64> {
    let dist = interferer_distances(cfg, mob)?;
    let signal = mob.distance_km.powf(-cfg.path_loss_eta);
    let interference: f64 = dist.iter().map(|r| r.powf(-cfg.path_loss_eta)).sum();
    Ok(10.0 * (signal / interference).log10())
}

/// Analytic outage model for one placement; the LSN fit is done once.
#[derive(Debug, Clone)]
pub struct OutageModel {
    inner: OutageKind,
}

#[derive(Debug, Clone)]
enum OutageKind {
    /// No shadowing: the SIR is deterministic.
    Step { sir_db: f64 },
    Shadowed {
        fit: Box<FitResult>,
        difference: SkewNormalParams,
    },
}

impl OutageModel {
    pub fn new(cfg: &NetworkConfig, mob: &MobilePlacement) -> Result<Self> {
        cfg.validate()?;
        if cfg.sigma_db == 0.0 {
            return Ok(OutageModel {
                inner: OutageKind::Step {
                    sir_db: median_free_sir_db(cfg, mob)?,
                },
            });
        }
        let model = interference_model(cfg, mob)?;
        let fit = fit_lsn(&model)?;
        let signal_mean = -cfg.path_loss_eta * mob.distance_km.ln();
        let signal_std = db_to_nat(cfg.sigma_db);
        // signal − interference = W + (−X)
        let difference = fit.params.negate().add_independent_normal(signal_mean, signal_std)?;
        Ok(OutageModel {
            inner: OutageKind::Shadowed {
                fit: Box::new(fit),
                difference,
            },
        })
    }

    /// LSN fit of the interference, absent when there is no shadowing.
    pub fn fit(&self) -> Option<&FitResult> {
        match &self.inner {
            OutageKind::Shadowed { fit, .. } => Some(fit),
            OutageKind::Step { .. } => None,
        }
    }

    /// Distribution of `ln(SIR)`.
    pub fn difference(&self) -> Option<&SkewNormalParams> {
        match &self.inner {
            OutageKind::Shadowed { difference, .. } => Some(difference),
            OutageKind::Step { .. } => None,
        }
    }

    /// `P(SIR < δ)` with `δ` in dB.
    pub fn probability(&self, delta_db: f64) -> f64 {
        match &self.inner {
            OutageKind::Step { sir_db } => {
                if *sir_db < delta_db {
                    1.0
                } else {
                    0.0
                }
            }
            OutageKind::Shadowed { difference, .. } => difference.sn_cdf(XI * delta_db),
        }
    }
}

pub fn outage_probability(cfg: &NetworkConfig, mob: &MobilePlacement, delta_db: f64) -> Result<f64> {
    Ok(OutageModel::new(cfg, mob)?.probability(delta_db))
}

/// Simulated SIR in dB, one sample per draw of every link's shadowing.
pub fn simulate_sir_db(cfg: &NetworkConfig, mob: &MobilePlacement, spec: &SampleSpec) -> Result<EmpiricalCdf> {
    cfg.validate()?;
    if cfg.sigma_db == 0.0 {
        let sir = median_free_sir_db(cfg, mob)?;
        return Ok(EmpiricalCdf::from_samples(vec![sir; spec.n_samples]));
    }
    let model = interference_model(cfg, mob)?;
    let sampler = CorrelatedNormalSampler::new(&model);
    let n = sampler.dim();
    let signal_mean = -cfg.path_loss_eta * mob.distance_km.ln();
    let signal_std = db_to_nat(cfg.sigma_db);
    let samples = sample_streams(spec, |rng| {
        thread_local! {
            static SCRATCH: std::cell::RefCell<(Vec<f64>, Vec<f64>)> = const { std::cell::RefCell::new((Vec::new(), Vec::new())) };
        }
        let signal = signal_mean + signal_std * standard_normal(rng);
        let interference = SCRATCH.with(|cell| {
            let (z, x) = &mut *cell.borrow_mut();
            z.resize(n, 0.0);
            x.resize(n, 0.0);
            sampler.sample_sum(rng, z, x)
        });
        (signal - interference.ln()) / XI
    });
    Ok(EmpiricalCdf::from_samples(samples))
}

/// Monte Carlo `P(SIR < δ)`.
pub fn outage_probability_mc(
    cfg: &NetworkConfig,
    mob: &MobilePlacement,
    delta_db: f64,
    spec: &SampleSpec,
) -> Result<f64> {
    let sir = simulate_sir_db(cfg, mob, spec)?;
    Ok(fraction_below(&sir, delta_db))
}

/// Fraction of samples strictly below `x`.
pub fn fraction_below(ecdf: &EmpiricalCdf, x: f64) -> f64 {
    ecdf.sorted_values().partition_point(|&v| v < x) as f64 / ecdf.len() as f64
}

/// Outage probability against threshold, analytic and optionally simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageCurve {
    pub thresholds_db: Vec<f64>,
    pub analytic_p: Vec<f64>,
    pub mc_p: Option<Vec<f64>>,
}

/// Evaluates the analytic curve on `thresholds_db` and, when `mc` is given,
/// the simulated one from a single set of SIR draws.
pub fn outage_curve(
    cfg: &NetworkConfig,
    mob: &MobilePlacement,
    thresholds_db: &[f64],
    mc: Option<&SampleSpec>,
) -> Result<OutageCurve> {
    let model = OutageModel::new(cfg, mob)?;
    let analytic_p = thresholds_db.iter().map(|&d| model.probability(d)).collect();
    let mc_p = match mc {
        Some(spec) => {
            let sir = simulate_sir_db(cfg, mob, spec)?;
            Some(thresholds_db.iter().map(|&d| fraction_below(&sir, d)).collect())
        }
        None => None,
    };
    Ok(OutageCurve {
        thresholds_db: thresholds_db.to_vec(),
        analytic_p,
        mc_p,
    })
}

/// Default threshold grid, −20 dB to 20 dB in 0.5 dB steps.
pub fn default_thresholds_db() -> Vec<f64> {
    (0..=80).map(|i| -20.0 + 0.5 * i as f64).collect()
}
