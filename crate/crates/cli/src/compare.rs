//! Distances between an empirical histogram and a limit prediction.

use revevo::limits::MarginalPrediction;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::histogram::FrequencyHistogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Wasserstein-1 to a point mass or a finite mixture of point masses
    W1,
    /// Total variation against the prediction integrated over the same bins
    Tv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: Metric,
    pub distance: f64,
    /// predicted point, when the limit is a point mass
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub mean: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// `W1` between two finite measures on the line, each normalized.
pub fn w1_discrete(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = a.iter().map(|&(x, w)| (x, w)).chain(b.iter().map(|&(x, w)| (x, -w))).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut cdf, mut acc) = (0.0, 0.0);
    for win in pts.windows(2) {
        cdf += win[0].1;
        acc += cdf.abs() * (win[1].0 - win[0].0);
    }
    acc
}

/// Point predictions pass when `|mean − c| ≤ threshold`; mixtures and
/// densities pass when the distance is at most `threshold`. `mean` is the
/// sample mean when known, else the histogram mean is used.
pub fn compare_to_prediction(
    hist: &FrequencyHistogram,
    pred: &MarginalPrediction,
    mean: Option<f64>,
    threshold: f64,
) -> CliResult<ComparisonReport> {
    let mean = mean.unwrap_or_else(|| hist.mean());
    let atoms: Vec<(f64, f64)> = (0..hist.bins()).map(|i| (hist.center(i), hist.masses[i])).collect();
    Ok(match pred {
        MarginalPrediction::Point(c) => {
            let distance = w1_discrete(&atoms, &[(*c, 1.0)]);
            ComparisonReport { metric: Metric::W1, distance, target: Some(*c), mean, threshold, pass: (mean - c).abs() <= threshold }
        }
        MarginalPrediction::Mixture(parts) => {
            let distance = w1_discrete(&atoms, parts.iter().map(|(w, x)| (*x, *w)).collect::<Vec<_>>().as_slice());
            ComparisonReport { metric: Metric::W1, distance, target: None, mean, threshold, pass: distance <= threshold }
        }
        MarginalPrediction::Masses(m) => {
            if m.len() != hist.bins() {
                return Err(CliError::Config(format!("prediction has {} bins, histogram {}", m.len(), hist.bins())));
            }
            let distance = 0.5 * m.iter().zip(&hist.masses).map(|(a, b)| (a - b).abs()).sum::<f64>();
            ComparisonReport { metric: Metric::Tv, distance, target: None, mean, threshold, pass: distance <= threshold }
        }
    })
}
