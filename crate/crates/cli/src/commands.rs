use std::fmt::Write as _;

use lsn_core::montecarlo::{horizontal_deviation_db, sample_sln};
use lsn_core::outage::{outage_curve, OutageCurve};
use lsn_core::special_fn::std_normal_quantile;
use lsn_core::{fit_fenton_wilkinson, fit_lsn, nat_to_db, EmpiricalCdf};
use serde::{Deserialize, Serialize};

use crate::network::NetworkScenario;
use crate::scenario::Scenario;
use crate::CliError;

/// Number of evenly spaced probability levels in the `compare` grid.
pub const COMPARE_GRID_LEVELS: usize = 400;

pub const COMPARE_HEADER: &str = "x_db,cdf_mc,cdf_lsn,cdf_fw,pscale_mc,pscale_lsn,pscale_fw";
pub const OUTAGE_HEADER: &str = "delta_db,p_analytic,p_mc";

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub n_components: usize,
    pub lambda: f64,
    pub epsilon_nat: f64,
    pub epsilon_db: f64,
    pub omega_nat: f64,
    pub omega_db: f64,
    pub lambda0: f64,
    pub residual: f64,
    pub iterations: usize,
    pub left_slope: f64,
    pub right_slope: f64,
    pub sum_b_tilde: f64,
    pub n_tilde: usize,
    pub assumption_ok: bool,
    pub mean: f64,
    pub cv2: f64,
    pub fw_mu_db: f64,
    pub fw_sigma_db: f64,
}

pub fn fit(scenario: &Scenario) -> Result<FitRecord, CliError> {
    let model = scenario.model()?;
    let fit = fit_lsn(&model)?;
    let fw = fit_fenton_wilkinson(&model)?;
    let mom = model.sum_moments();
    let p = fit.params;
    Ok(FitRecord {
        n_components: model.len(),
        lambda: p.lambda(),
        epsilon_nat: p.epsilon(),
        epsilon_db: p.epsilon_db(),
        omega_nat: p.omega(),
        omega_db: p.omega_db(),
        lambda0: fit.lambda0,
        residual: fit.residual,
        iterations: fit.iterations,
        left_slope: fit.diagnostics.left_slope,
        right_slope: fit.diagnostics.right_slope,
        sum_b_tilde: fit.diagnostics.sum_b_tilde,
        n_tilde: fit.diagnostics.n_tilde,
        assumption_ok: fit.diagnostics.assumption_ok,
        mean: mom.m,
        cv2: mom.cv2(),
        fw_mu_db: fw.mu_db(),
        fw_sigma_db: fw.sigma_db(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub samples: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub lsn_deviation_db: Vec<f64>,
    pub fw_deviation_db: Vec<f64>,
    pub max_abs_lsn_db: f64,
    pub max_abs_fw_db: f64,
}

fn pscale(p: f64) -> String {
    if p > 0.0 && p < 1.0 {
        fmt_f64(std_normal_quantile(p).expect("p in (0, 1)"))
    } else {
        String::new()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Writes the comparison table and returns it with the deviation report.
pub fn compare(scenario: &Scenario) -> Result<(String, CompareReport), CliError> {
    let model = scenario.model()?;
    let lsn = fit_lsn(&model)?.params;
    let fw = fit_fenton_wilkinson(&model)?;
    let ecdf = sample_sln(&model, &scenario.mc);

    let mut probs: Vec<f64> = (1..=COMPARE_GRID_LEVELS)
        .map(|k| k as f64 / (COMPARE_GRID_LEVELS + 1) as f64)
        .chain(scenario.levels.iter().copied())
        .collect();
    probs.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = probs.iter().map(|&p| ecdf.quantile(p)).collect::<Result<_, _>>()?;
    grid.dedup();

    let mut csv = String::with_capacity(grid.len() * 160);
    csv.push_str(COMPARE_HEADER);
    csv.push('\n');
    for &x in &grid {
        let (pm, pl, pf) = (ecdf.cdf_at(x), lsn.lsn_cdf(x), fw.cdf(x));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt_f64(nat_to_db(x.ln())),
            fmt_f64(pm),
            fmt_f64(pl),
            fmt_f64(pf),
            pscale(pm),
            pscale(pl),
            pscale(pf)
        );
    }

    let lsn_dev = horizontal_deviation_db(|x| lsn.lsn_cdf(x), &ecdf, &scenario.levels)?;
    let fw_dev = horizontal_deviation_db(|x| fw.cdf(x), &ecdf, &scenario.levels)?;
    let report = CompareReport {
        samples: scenario.mc.n_samples,
        seed: scenario.mc.seed,
        levels: scenario.levels.clone(),
        max_abs_lsn_db: max_abs(&lsn_dev),
        max_abs_fw_db: max_abs(&fw_dev),
        lsn_deviation_db: lsn_dev,
        fw_deviation_db: fw_dev,
    };
    Ok((csv, report))
}

/// Empirical cdf of the simulated sum as `x_db,cdf`. With `points > 0`
/// only that many evenly spaced order statistics are written.
pub fn simulate(scenario: &Scenario, points: usize) -> Result<String, CliError> {
    let model = scenario.model()?;
    let ecdf: EmpiricalCdf = sample_sln(&model, &scenario.mc);
    let n = ecdf.len();
    let values = ecdf.sorted_values();
    let ranks: Vec<usize> = if points == 0 || points >= n {
        (1..=n).collect()
    } else {
        (1..=points).map(|k| (k * n).div_ceil(points)).collect()
    };
    let mut csv = String::with_capacity(ranks.len() * 48);
    csv.push_str("x_db,cdf\n");
    for k in ranks {
        let _ = writeln!(
            csv,
            "{},{}",
            fmt_f64(nat_to_db(values[k - 1].ln())),
            fmt_f64(k as f64 / n as f64)
        );
    }
    Ok(csv)
}

pub fn outage_table(curve: &OutageCurve) -> String {
    let mut csv = String::with_capacity(curve.thresholds_db.len() * 64);
    csv.push_str(OUTAGE_HEADER);
    csv.push('\n');
    for (i, (&d, &p)) in curve.thresholds_db.iter().zip(&curve.analytic_p).enumerate() {
        let mc = curve.mc_p.as_ref().map(|v| fmt_f64(v[i])).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{}", fmt_f64(d), fmt_f64(p), mc);
    }
    csv
}

/// One table per placement, in file order.
pub fn outage(network: &NetworkScenario, with_mc: bool) -> Result<Vec<String>, CliError> {
    network
        .placements
        .iter()
        .map(|mob| {
            let mc = with_mc.then_some(&network.mc);
            let curve = outage_curve(&network.config, mob, &network.thresholds_db, mc)?;
            Ok(outage_table(&curve))
        })
        .collect()
}
