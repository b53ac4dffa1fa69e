//! Runs a configured sweep over `P_B / P` and renders it as CSV.

use rayon::prelude::*;

use crate::config::{Scenario, SweepConfig};
use crate::error::{Error, Result};
use crate::montecarlo::{average_metrics, Metric};
use crate::saddle::solve_config;

pub const CSV_HEADER: &str = "ratio,scenario,psi,value,stderr";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ratio: f64,
    pub scenario: Scenario,
    pub psi: f64,
    /// Rate in bits per channel use, or energy in dB.
    pub value: f64,
    /// `None` for deterministic curves.
    pub stderr: Option<f64>,
}

pub fn metric_for(scenario: Scenario) -> Option<Metric> {
    match scenario {
        Scenario::WorstCase => None,
        Scenario::Average => Some(Metric::RateStruct1),
        Scenario::Swipt => Some(Metric::EnergySwipt),
        Scenario::Structure2 => Some(Metric::RateStruct2),
        Scenario::AverageEnergy => Some(Metric::EnergyStruct1),
        Scenario::Structure2Energy => Some(Metric::EnergyStruct2),
        Scenario::Structure2SwiptEnergy => Some(Metric::EnergySwiptStruct2),
    }
}

/// All rows of one `(psi, ratio)` point. Monte-Carlo scenarios share their
/// channel draws.
fn run_point(cfg: &SweepConfig, psi: f64, ratio: f64) -> Result<Vec<SweepRow>> {
    let point = cfg.point(psi, ratio);
    let wrap = |scenario: Scenario| {
        move |e: Error| Error::Point {
            scenario: scenario.tag().to_string(),
            psi,
            ratio,
            source: Box::new(e),
        }
    };
    let mut rows = Vec::with_capacity(cfg.scenarios.len());
    let mc: Vec<(Scenario, Metric)> = cfg
        .scenarios
        .iter()
        .filter_map(|&s| metric_for(s).map(|m| (s, m)))
        .collect();
    if cfg.scenarios.contains(&Scenario::WorstCase) {
        let sol = solve_config(&point).map_err(wrap(Scenario::WorstCase))?;
        rows.push(SweepRow {
            ratio,
            scenario: Scenario::WorstCase,
            psi,
            value: sol.rate,
            stderr: None,
        });
    }
    if !mc.is_empty() {
        let metrics: Vec<Metric> = mc.iter().map(|&(_, m)| m).collect();
        let results = average_metrics(&point, &metrics, point.pb).map_err(wrap(mc[0].0))?;
        for ((scenario, _), r) in mc.into_iter().zip(results) {
            rows.push(SweepRow {
                ratio,
                scenario,
                psi,
                value: r.mean,
                stderr: Some(r.stderr),
            });
        }
    }
    Ok(rows)
}

/// Evaluates every `(scenario, psi, ratio)` and returns rows sorted by
/// scenario tag, then psi, then ratio.
pub fn sweep_rows(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, f64)> = cfg
        .psi
        .iter()
        .flat_map(|&psi| cfg.ratio_grid.iter().map(move |&r| (psi, r)))
        .collect();
    let per_point: Vec<Result<Vec<SweepRow>>> = points
        .par_iter()
        .map(|&(psi, ratio)| run_point(cfg, psi, ratio))
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        a.scenario
            .tag()
            .cmp(b.scenario.tag())
            .then(a.psi.total_cmp(&b.psi))
            .then(a.ratio.total_cmp(&b.ratio))
    });
    Ok(rows)
}

/// `%g`-style rendering with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let stderr = r.stderr.map(|s| format_sig(s, 9)).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_sig(r.ratio, 9),
            r.scenario.tag(),
            format_sig(r.psi, 9),
            format_sig(r.value, 9),
            stderr
        ));
    }
    out
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<String> {
    Ok(render_csv(&sweep_rows(cfg)?))
}
