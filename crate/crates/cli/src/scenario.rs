//! Scenario files: the lognormal sum to fit, plus Monte Carlo settings.
//!
//! ```toml
//! means_db = 0.0          # scalar (with `count`) or one value per component
//! sigmas_db = 6.0
//! count = 20
//! rho = 0.0               # or `correlation = [[1.0, 0.5], [0.5, 1.0]]`
//! levels = [0.01, 0.5, 0.99]
//!
//! [mc]
//! samples = 1000000
//! seed = 1
//! streams = 64
//! ```

use std::path::Path;

use lsn_core::montecarlo::DEFAULT_STREAMS;
use lsn_core::{db_to_nat, SampleSpec, SumModel};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_LEVELS: [f64; 6] = [0.01, 0.1, 0.5, 0.9, 0.99, 0.999];

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct McSection {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub streams: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    means_db: OneOrMany,
    sigmas_db: OneOrMany,
    count: Option<usize>,
    rho: Option<f64>,
    correlation: Option<Vec<Vec<f64>>>,
    levels: Option<Vec<f64>>,
    #[serde(default)]
    mc: McSection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Correlation {
    Equal(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub means_db: Vec<f64>,
    pub sigmas_db: Vec<f64>,
    pub correlation: Correlation,
    pub mc: SampleSpec,
    pub levels: Vec<f64>,
}

/// Overrides from the command line; `None` keeps the file's value.
#[derive(Debug, Clone, Default)]
pub struct McOverrides {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub levels: Option<Vec<f64>>,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("field `{field}`: {reason}"))
}

fn expand(field: &str, value: OneOrMany, count: Option<usize>) -> Result<Vec<f64>, CliError> {
    let v = match (value, count) {
        (OneOrMany::One(x), Some(n)) => vec![x; n],
        (OneOrMany::One(x), None) => vec![x],
        (OneOrMany::Many(v), Some(n)) if v.len() != n => {
            return Err(invalid(field, format!("has {} entries but count = {n}", v.len())));
        }
        (OneOrMany::Many(v), _) => v,
    };
    if v.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(invalid(field, format!("non-finite value {x}")));
    }
    Ok(v)
}

pub(crate) fn sample_spec(mc: &McSection, over: &McOverrides) -> Result<SampleSpec, CliError> {
    let samples = over.samples.or(mc.samples).unwrap_or(DEFAULT_SAMPLES);
    let seed = over.seed.or(mc.seed).unwrap_or(DEFAULT_SEED);
    let streams = mc.streams.unwrap_or(DEFAULT_STREAMS);
    if samples == 0 {
        return Err(invalid("mc.samples", "must be >= 1"));
    }
    if streams == 0 {
        return Err(invalid("mc.streams", "must be >= 1"));
    }
    SampleSpec::with_streams(samples, seed, streams).map_err(|e| invalid("mc", e))
}

pub fn validate_levels(levels: &[f64]) -> Result<(), CliError> {
    match levels.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        Some(p) => Err(invalid("levels", format!("{p} is not strictly between 0 and 1"))),
        None => Ok(()),
    }
}

impl Scenario {
    pub fn parse(text: &str, over: &McOverrides) -> Result<Self, CliError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
        let means_db = expand("means_db", raw.means_db, raw.count)?;
        let n = means_db.len();
        let sigmas_db = expand("sigmas_db", raw.sigmas_db, raw.count.or(Some(n)))?;
        if let Some(s) = sigmas_db.iter().find(|&&s| s <= 0.0) {
            return Err(invalid("sigmas_db", format!("{s} is not > 0")));
        }
        let correlation = match (raw.rho, raw.correlation) {
            (Some(_), Some(_)) => return Err(invalid("rho", "give either `rho` or `correlation`, not both")),
            (Some(rho), None) => {
                let lower = if n > 1 { -1.0 / (n as f64 - 1.0) } else { -1.0 };
                if !(rho > lower && rho < 1.0) {
                    return Err(invalid("rho", format!("{rho} outside ({lower}, 1)")));
                }
                Correlation::Equal(rho)
            }
            (None, Some(m)) => {
                if m.len() != n || m.iter().any(|row| row.len() != n) {
                    return Err(invalid("correlation", format!("must be a {n}x{n} matrix")));
                }
                Correlation::Matrix(m)
            }
            (None, None) => Correlation::Equal(0.0),
        };
        let levels = over
            .levels
            .clone()
            .or(raw.levels)
            .unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
        validate_levels(&levels)?;
        let mc = sample_spec(&raw.mc, over)?;
        let scenario = Scenario {
            means_db,
            sigmas_db,
            correlation,
            mc,
            levels,
        };
        scenario.model()?;
        Ok(scenario)
    }

    pub fn load(path: &Path, over: &McOverrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, over).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn len(&self) -> usize {
        self.means_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means_db.is_empty()
    }

    pub fn model(&self) -> Result<SumModel, CliError> {
        let mu: Vec<f64> = self.means_db.iter().map(|&v| db_to_nat(v)).collect();
        let sigma: Vec<f64> = self.sigmas_db.iter().map(|&v| db_to_nat(v)).collect();
        let model = match &self.correlation {
            Correlation::Equal(rho) => SumModel::equicorrelated(&mu, &sigma, *rho),
            Correlation::Matrix(rows) => {
                let n = rows.len();
                let c = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                SumModel::from_correlation(&mu, &sigma, &c)
            }
        };
        model.map_err(|e| {
            let field = match &self.correlation {
                Correlation::Equal(_) => "rho",
                Correlation::Matrix(_) => "correlation",
            };
            invalid(field, e)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario, CliError> {
        Scenario::parse(text, &McOverrides::default())
    }

    #[test]
    fn scalar_with_count() {
        let s = parse("means_db = 0.0\nsigmas_db = 6.0\ncount = 20\n").unwrap();
        assert_eq!(s.len(), 20);
        assert_eq!(s.sigmas_db, vec![6.0; 20]);
        assert_eq!(s.correlation, Correlation::Equal(0.0));
        assert_eq!(s.mc.n_samples, DEFAULT_SAMPLES);
        assert_eq!(s.levels, DEFAULT_LEVELS.to_vec());
    }

    #[test]
    fn arrays_and_matrix() {
        let s = parse(
            "means_db = [-3.0, 2.0]\nsigmas_db = [6.0, 9.0]\ncorrelation = [[1.0, 0.4], [0.4, 1.0]]\n\
             [mc]\nsamples = 10\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(s.means_db, vec![-3.0, 2.0]);
        assert_eq!(s.mc.seed, 7);
        assert_eq!(s.mc.n_samples, 10);
        let m = s.model().unwrap();
        assert!((m.cov()[(0, 1)] - 0.4 * db_to_nat(6.0) * db_to_nat(9.0)).abs() < 1e-15);
    }

    #[test]
    fn overrides_win() {
        let over = McOverrides {
            samples: Some(5),
            seed: Some(9),
            levels: Some(vec![0.5]),
        };
        let s = Scenario::parse("means_db = 1.0\nsigmas_db = 2.0\n[mc]\nseed = 3\n", &over).unwrap();
        assert_eq!((s.mc.n_samples, s.mc.seed, s.levels.clone()), (5, 9, vec![0.5]));
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("means_db = 0.0\nsigmas_db = 6.0\ncount = 2\nrho = 1.2\n", "rho"),
            ("means_db = [0.0, 1.0]\nsigmas_db = [6.0]\n", "sigmas_db"),
            ("means_db = 0.0\nsigmas_db = -1.0\n", "sigmas_db"),
            ("means_db = 0.0\nsigmas_db = 1.0\nlevels = [0.5, 1.0]\n", "levels"),
            (
                "means_db = [0.0, 0.0]\nsigmas_db = 1.0\ncorrelation = [[1.0, 0.99], [0.5, 1.0]]\n",
                "correlation",
            ),
            (
                "means_db = [0.0, 0.0, 0.0]\nsigmas_db = 1.0\ncorrelation = [[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]]\n",
                "correlation",
            ),
            ("means_db = 0.0\nsigmas_db = 1.0\n[mc]\nsamples = 0\n", "mc.samples"),
        ];
        for (text, field) in cases {
            match parse(text) {
                Err(CliError::Input(msg)) => assert!(msg.contains(field), "{msg}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_errors_report_location() {
        match parse("means_db = 0.0\nsigmas_db = \n") {
            Err(CliError::Input(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        match parse("means_db = 0.0\nsigma_db = 1.0\n") {
            Err(CliError::Input(msg)) => assert!(msg.contains("sigma_db"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
