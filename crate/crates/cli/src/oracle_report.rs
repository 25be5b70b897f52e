//! Exact small-instance output for the `oracle` subcommand.

use std::path::Path;

use revevo::oracle::{
    check_detailed_balance, full_transition_matrix, lump_to_counts, power_iteration, stationarity_residual,
    stationary_counts, stationary_ordered, stationary_ordered_niche, write_distribution_csv,
};
use revevo::KernelConfig;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::run::chain_setup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub kernel: String,
    pub count_states: usize,
    /// ordered-state checks, absent when the instance is too large
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordered_states: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_balance_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationarity_residual: Option<f64>,
    /// ℓ∞ gap between the lumped power-iteration law and the count law
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_iteration_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Computes the exact laws for each `n` and writes `stationary_n{n}.csv`
/// into `dir` when given.
pub fn oracle_reports(cfg: &ExperimentConfig, dir: Option<&Path>) -> CliResult<Vec<OracleReport>> {
    let mut out = Vec::new();
    for &n in &cfg.n {
        let setup = chain_setup(cfg, n)?;
        let b = setup.kernel.breeding();
        let niche = matches!(setup.kernel.config(), KernelConfig::Niche { .. });
        let mut report = OracleReport {
            n,
            kernel: setup.kernel.config().name().to_string(),
            count_states: 0,
            ordered_states: None,
            max_balance_violation: None,
            stationarity_residual: None,
            power_iteration_gap: None,
            skipped: None,
        };
        let counts = if niche { None } else { Some(stationary_counts(n as u32, b, &setup.weights)?) };
        if let (Some(c), Some(dir)) = (&counts, dir) {
            std::fs::create_dir_all(dir)?;
            let labels: Vec<String> = c
                .support()
                .iter()
                .map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
                .collect();
            let f = std::fs::File::create(dir.join(format!("stationary_n{n}.csv")))?;
            write_distribution_csv(std::io::BufWriter::new(f), &labels, c.probs())?;
        }
        report.count_states = counts.as_ref().map_or(0, |c| c.support().len());
        match full_transition_matrix(&setup.kernel, n) {
            Ok((states, t)) => {
                let pi = match setup.kernel.config() {
                    KernelConfig::Niche { tables, .. } => stationary_ordered_niche(b, tables)?,
                    _ => stationary_ordered(n, b, &setup.weights)?,
                };
                report.ordered_states = Some(states.len());
                report.max_balance_violation = Some(check_detailed_balance(&pi, &t)?.max_violation);
                report.stationarity_residual = Some(stationarity_residual(&pi, &t)?);
                let p = power_iteration(&t, 1e-14, 10_000_000)?;
                report.power_iteration_gap = Some(match &counts {
                    Some(c) => {
                        let lumped = lump_to_counts(&states, &p)?;
                        c.support().iter().zip(c.probs()).map(|(s, q)| (lumped.prob(s) - q).abs()).fold(0.0, f64::max)
                    }
                    None => p.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
                });
            }
            Err(e) => report.skipped = Some(e.to_string()),
        }
        out.push(report);
    }
    Ok(out)
}
