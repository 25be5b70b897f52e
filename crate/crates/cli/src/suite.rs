//! Runs every configured population size, pools replicates, compares to
//! the limit and writes the artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use revevo::limits::{predict_limit, LimitPrediction};
use serde::{Deserialize, Serialize};

use crate::compare::{compare_to_prediction, ComparisonReport};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::histogram::{BinCounts, FrequencyHistogram};
use crate::run::{frequency, run_chain};
use crate::stats::{batch_means_se, BATCHES};

/// What one chain leaves behind.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub n: usize,
    pub replicate: usize,
    pub bins: BinCounts,
    pub samples: u64,
    pub sum: f64,
    pub sum_sq: f64,
    /// batch-means standard error of this chain's mean
    pub se: Option<f64>,
    /// `(step, n_1, …, n_K)` rows at the recorded locus
    pub trajectory: Vec<(u64, Vec<u32>)>,
}

pub fn run_one(cfg: &ExperimentConfig, n: usize, replicate: usize) -> CliResult<ChainOutput> {
    let mut bins = BinCounts::new(cfg.bins);
    let mut series = Vec::with_capacity(((cfg.steps - cfg.burn_in) / cfg.thinning) as usize);
    let mut trajectory = Vec::new();
    run_chain(cfg, n, replicate, |step, pop| {
        let f = frequency(pop, cfg.record_locus, cfg.record_allele);
        bins.add(f);
        series.push(f);
        if cfg.trajectory {
            trajectory.push((step, pop.locus_counts(cfg.record_locus).to_vec()));
        }
    })?;
    Ok(ChainOutput {
        n,
        replicate,
        samples: series.len() as u64,
        sum: series.iter().sum(),
        sum_sq: series.iter().map(|x| x * x).sum(),
        se: batch_means_se(&series, BATCHES),
        bins,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub replicates: usize,
    pub samples: u64,
    pub mean: f64,
    pub sd: f64,
    /// batch-means standard error, pooled over replicates
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    /// spread of replicate means over √replicates; robust when chains
    /// decorrelate slower than a batch
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_replicates: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_echo: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<LimitPrediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction_error: Option<String>,
    pub per_run: Vec<RunRecord>,
    pub seed: u64,
    pub version: String,
}

impl Summary {
    /// False when any comparison failed; runs without a prediction count as passing.
    pub fn all_pass(&self) -> bool {
        self.per_run.iter().all(|r| r.pass != Some(false))
    }
}

pub struct SuiteResult {
    pub summary: Summary,
    pub histograms: Vec<FrequencyHistogram>,
    pub chains: Vec<ChainOutput>,
}

fn pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Runs `replicates` chains for each `n` in parallel. Output is ordered by
/// the `n` list, then replicate, whatever the worker count.
pub fn run_suite(cfg: &ExperimentConfig) -> CliResult<SuiteResult> {
    cfg.validate()?;
    let space = cfg.space()?;
    let (prediction, prediction_error) = match predict_limit(&cfg.limit_problem()?) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let marginal = match &prediction {
        Some(p) => Some(p.marginal(space, cfg.record_locus, cfg.record_allele, cfg.bins)?),
        None => None,
    };
    let jobs: Vec<(usize, usize)> = cfg.n.iter().flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r))).collect();
    let chains: Vec<ChainOutput> = pool(cfg.threads)?
        .install(|| jobs.par_iter().map(|&(n, r)| run_one(cfg, n, r)).collect::<CliResult<Vec<_>>>())?;

    let mut per_run = Vec::new();
    let mut histograms = Vec::new();
    for (i, &n) in cfg.n.iter().enumerate() {
        let group = &chains[i * cfg.replicates..(i + 1) * cfg.replicates];
        let mut bins = BinCounts::new(cfg.bins);
        let (mut samples, mut sum, mut sum_sq, mut var) = (0u64, 0.0, 0.0, Some(0.0));
        for c in group {
            bins.merge(&c.bins);
            samples += c.samples;
            sum += c.sum;
            sum_sq += c.sum_sq;
            var = var.zip(c.se).map(|(v, se)| v + (se * c.samples as f64).powi(2));
        }
        let hist = FrequencyHistogram::from_counts(&bins, n, cfg.record_locus, cfg.record_allele)?;
        let mean = sum / samples as f64;
        let sd = if samples > 1 { ((sum_sq - sum * mean) / (samples - 1) as f64).max(0.0).sqrt() } else { 0.0 };
        let comparison = marginal
            .as_ref()
            .map(|m| compare_to_prediction(&hist, m, Some(mean), cfg.threshold))
            .transpose()?;
        per_run.push(RunRecord {
            n,
            replicates: cfg.replicates,
            samples,
            mean,
            sd,
            se: var.map(|v| v.sqrt() / samples as f64),
            se_replicates: (group.len() > 1).then(|| {
                let means: Vec<f64> = group.iter().map(|c| c.sum / c.samples as f64).collect();
                crate::stats::sd(&means) / (means.len() as f64).sqrt()
            }),
            distance: comparison.as_ref().map(|c| c.distance),
            pass: comparison.as_ref().map(|c| c.pass),
            comparison,
        });
        histograms.push(hist);
    }
    let summary = Summary {
        config_echo: cfg.clone(),
        prediction,
        prediction_error,
        per_run,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(SuiteResult { summary, histograms, chains })
}

pub fn histogram_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("histogram_n{n}.csv"))
}

/// Writes one histogram CSV per `n`, trajectories when recorded, and
/// `summary.json`. Returns the paths written.
pub fn write_outputs(result: &SuiteResult, dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for h in &result.histograms {
        let p = histogram_path(dir, h.n);
        let mut f = BufWriter::new(File::create(&p)?);
        h.write_csv(&mut f)?;
        f.flush()?;
        written.push(p);
    }
    for c in result.chains.iter().filter(|c| !c.trajectory.is_empty()) {
        let p = dir.join(format!("trajectory_n{}_r{}.csv", c.n, c.replicate));
        let mut f = BufWriter::new(File::create(&p)?);
        let k = c.trajectory[0].1.len();
        let head: Vec<String> = (1..=k).map(|j| format!("n_{j}")).collect();
        writeln!(f, "step,{}", head.join(","))?;
        for (step, counts) in &c.trajectory {
            let row: Vec<String> = counts.iter().map(|x| x.to_string()).collect();
            writeln!(f, "{step},{}", row.join(","))?;
        }
        f.flush()?;
        written.push(p);
    }
    let p = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&result.summary).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(&p, json + "\n")?;
    written.push(p);
    Ok(written)
}
