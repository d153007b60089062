//! Network files for the `outage` command.
//!
//! ```toml
//! cell_range_km = 1.0
//! rings = 18
//! path_loss_eta = 3.0     # required
//! sigma_db = 3.0
//! shadowing_rho = 0.0
//! thresholds_db = { start = -20.0, stop = 20.0, step = 0.5 }   # or an array
//!
//! [[placement]]
//! distance_rc = 1.0       # or distance_km
//! bearing_deg = 0.0
//!
//! [mc]
//! samples = 1000000
//! seed = 1
//! ```

use std::path::Path;

use lsn_core::outage::{default_thresholds_db, MobilePlacement, NetworkConfig};
use lsn_core::SampleSpec;
use serde::Deserialize;

use crate::scenario::{sample_spec, McOverrides, McSection};
use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    start: f64,
    stop: f64,
    step: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawThresholds {
    Range(RawRange),
    List(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlacement {
    distance_rc: Option<f64>,
    distance_km: Option<f64>,
    #[serde(default)]
    bearing_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    #[serde(default = "default_range")]
    cell_range_km: f64,
    #[serde(default = "default_rings")]
    rings: usize,
    path_loss_eta: f64,
    sigma_db: f64,
    #[serde(default)]
    shadowing_rho: f64,
    thresholds_db: Option<RawThresholds>,
    #[serde(default)]
    placement: Vec<RawPlacement>,
    #[serde(default)]
    mc: McSection,
}

fn default_range() -> f64 {
    1.0
}

fn default_rings() -> usize {
    18
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub config: NetworkConfig,
    pub placements: Vec<MobilePlacement>,
    pub thresholds_db: Vec<f64>,
    pub mc: SampleSpec,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("field `{field}`: {reason}"))
}

fn thresholds(raw: Option<RawThresholds>) -> Result<Vec<f64>, CliError> {
    let v = match raw {
        None => return Ok(default_thresholds_db()),
        Some(RawThresholds::List(v)) => v,
        Some(RawThresholds::Range(r)) => {
            if !(r.step > 0.0 && r.start.is_finite() && r.stop >= r.start) {
                return Err(invalid("thresholds_db", "needs finite start <= stop and step > 0"));
            }
            let count = ((r.stop - r.start) / r.step + 1e-9).floor() as usize;
            (0..=count).map(|i| r.start + r.step * i as f64).collect()
        }
    };
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(invalid("thresholds_db", "must be a non-empty list of finite values"));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("thresholds_db", "must be strictly increasing"));
    }
    Ok(v)
}

impl NetworkScenario {
    pub fn parse(text: &str, over: &McOverrides) -> Result<Self, CliError> {
        let raw: RawNetwork = toml::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
        let config = NetworkConfig {
            cell_range_km: raw.cell_range_km,
            rings: raw.rings,
            path_loss_eta: raw.path_loss_eta,
            sigma_db: raw.sigma_db,
            shadowing_rho: raw.shadowing_rho,
        };
        config.validate().map_err(|e| match e {
            lsn_core::Error::InvalidParameter { name, reason } => invalid(name, reason),
            other => CliError::Input(other.to_string()),
        })?;
        let mut placements = Vec::new();
        let raw_placements = if raw.placement.is_empty() {
            vec![RawPlacement {
                distance_rc: Some(1.0),
                distance_km: None,
                bearing_deg: 0.0,
            }]
        } else {
            raw.placement
        };
        for (i, p) in raw_placements.into_iter().enumerate() {
            let field = format!("placement[{i}]");
            let distance = match (p.distance_rc, p.distance_km) {
                (Some(f), None) => f * config.rc(),
                (None, Some(d)) => d,
                _ => return Err(invalid(&field, "give exactly one of `distance_rc`, `distance_km`")),
            };
            let mob = MobilePlacement::new(distance, p.bearing_deg.to_radians()).map_err(|e| invalid(&field, e))?;
            placements.push(mob);
        }
        Ok(NetworkScenario {
            config,
            placements,
            thresholds_db: thresholds(raw.thresholds_db)?,
            mc: sample_spec(&raw.mc, over)?,
        })
    }

    pub fn load(path: &Path, over: &McOverrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, over).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
