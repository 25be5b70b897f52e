//! Flat experiment configuration, read from TOML and patched by flags.

use std::path::{Path, PathBuf};

use revevo::limits::{LimitProblem, PriorScaling};
use revevo::{AlleleSpace, CountLaw, KernelConfig, LuckConfig, TournamentRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Which selection kernel a run uses. Parameters live in sibling fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    SingleTournament,
    #[default]
    InverseFitness,
    BreedMany,
    Niche,
}

/// Per-locus pseudo-counts: one list shared by every locus, or one per locus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseAlpha {
    Shared(Vec<f64>),
    PerLocus(Vec<Vec<f64>>),
}

impl BaseAlpha {
    pub fn per_locus(&self, loci: usize) -> Vec<Vec<f64>> {
        match self {
            Self::Shared(a) => vec![a.clone(); loci],
            Self::PerLocus(a) => a.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// K
    pub alleles: usize,
    /// L
    #[serde(default = "one")]
    pub loci: usize,
    pub base_alpha: BaseAlpha,
    /// Log-fitness over genomes, first locus most significant.
    pub phi: Vec<f64>,
    pub lambda: f64,
    #[serde(default)]
    pub prior_scaling: PriorScaling,
    pub n: Vec<usize>,
    #[serde(default)]
    pub kernel: KernelKind,
    #[serde(default)]
    pub rule: TournamentRule,
    /// Offspring per breed-many step.
    #[serde(default = "one_u32")]
    pub m: u32,
    /// Tickets per breed-many step.
    #[serde(default = "one_u32")]
    pub t: u32,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    #[serde(default = "default_thinning")]
    pub thinning: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Independent chains per population size, pooled into one histogram.
    #[serde(default = "one")]
    pub replicates: usize,
    /// Locus and allele whose frequency is recorded (0-based).
    #[serde(default)]
    pub record_locus: usize,
    #[serde(default)]
    pub record_allele: usize,
    /// Log-luck atoms and their probabilities; both or neither.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub luck_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub luck_probs: Option<Vec<f64>>,
    /// One weight table per position, for the niche kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub niche_weights: Option<Vec<Vec<f64>>>,
    /// Pass threshold for the comparison distance.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub trajectory: bool,
    /// Worker threads; 0 lets rayon decide.
    #[serde(default)]
    pub threads: usize,
}

fn one() -> usize {
    1
}
fn one_u32() -> u32 {
    1
}
fn default_steps() -> u64 {
    10_000_000
}
fn default_burn_in() -> u64 {
    1_000_000
}
fn default_thinning() -> u64 {
    100
}
fn default_bins() -> usize {
    200
}
fn default_threshold() -> f64 {
    0.05
}

/// Every key accepted by the config file, in file order.
pub const FIELDS: &[&str] = &[
    "alleles",
    "loci",
    "base_alpha",
    "phi",
    "lambda",
    "prior_scaling",
    "n",
    "kernel",
    "rule",
    "m",
    "t",
    "steps",
    "burn_in",
    "thinning",
    "seed",
    "bins",
    "replicates",
    "record_locus",
    "record_allele",
    "luck_values",
    "luck_probs",
    "niche_weights",
    "threshold",
    "output_dir",
    "trajectory",
    "threads",
];

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    /// Loads a file (or starts empty) and applies `key = value` overrides,
    /// where each value is a TOML literal; bare words are taken as strings.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[(String, String)]) -> CliResult<Self> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let s = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                s.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            if !FIELDS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown field {k}")));
            }
            let parsed: toml::Value = match format!("x = {v}").parse::<toml::Table>() {
                Ok(mut t) => t.remove("x").expect("just inserted"),
                Err(_) => toml::Value::String(v.clone()),
            };
            table.insert(k.clone(), parsed);
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn space(&self) -> CliResult<AlleleSpace> {
        AlleleSpace::new(self.alleles, self.loci).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn alphas(&self) -> Vec<Vec<f64>> {
        self.base_alpha.per_locus(self.loci)
    }

    pub fn luck(&self) -> CliResult<Option<LuckConfig>> {
        match (&self.luck_values, &self.luck_probs) {
            (None, None) => Ok(None),
            (Some(v), Some(p)) => {
                LuckConfig::new(v.clone(), p.clone()).map(Some).map_err(|e| CliError::Config(e.to_string()))
            }
            _ => Err(CliError::Config("luck_values and luck_probs go together".into())),
        }
    }

    pub fn kernel_config(&self) -> CliResult<KernelConfig> {
        Ok(match self.kernel {
            KernelKind::SingleTournament => KernelConfig::SingleTournament { rule: self.rule },
            KernelKind::InverseFitness => KernelConfig::InverseFitness,
            KernelKind::BreedMany => KernelConfig::BreedMany { m: CountLaw::fixed(self.m), t: CountLaw::fixed(self.t) },
            KernelKind::Niche => {
                let tables = self
                    .niche_weights
                    .clone()
                    .ok_or_else(|| CliError::Config("niche kernel needs niche_weights".into()))?;
                KernelConfig::Niche { rule: self.rule, tables }
            }
        })
    }

    pub fn limit_problem(&self) -> CliResult<LimitProblem> {
        Ok(LimitProblem {
            space: self.space()?,
            alphas: self.alphas(),
            phi: self.phi.clone(),
            lambda: self.lambda,
            scaling: self.prior_scaling,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let space = self.space()?;
        let alphas = self.alphas();
        if alphas.len() != self.loci {
            return bad(format!("base_alpha has {} loci, expected {}", alphas.len(), self.loci));
        }
        for a in &alphas {
            if a.len() != self.alleles || a.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad(format!("each base_alpha needs {} positive entries", self.alleles));
            }
        }
        if self.phi.len() != space.genome_count() {
            return bad(format!("phi needs {} entries, got {}", space.genome_count(), self.phi.len()));
        }
        if self.phi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("phi entries must be finite and >= 0".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be finite and >= 0".into());
        }
        if self.prior_scaling == PriorScaling::Scaled && self.lambda > 1.0 {
            return bad("scaled prior needs lambda <= 1".into());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("n must list sizes >= 1".into());
        }
        if self.burn_in >= self.steps {
            return bad(format!("burn_in {} must be below steps {}", self.burn_in, self.steps));
        }
        if self.thinning == 0 {
            return bad("thinning must be >= 1".into());
        }
        if self.bins < 2 {
            return bad("bins must be >= 2".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if self.record_locus >= self.loci || self.record_allele >= self.alleles {
            return bad("record_locus/record_allele out of range".into());
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return bad("threshold must be >= 0".into());
        }
        let luck = self.luck()?;
        if luck.is_some() && !matches!(self.kernel, KernelKind::SingleTournament | KernelKind::InverseFitness) {
            return bad("luck applies to single_tournament and inverse_fitness only".into());
        }
        if self.kernel == KernelKind::Niche {
            let t = self.niche_weights.as_ref().ok_or_else(|| CliError::Config("niche kernel needs niche_weights".into()))?;
            if self.n.iter().any(|&n| n != t.len()) {
                return bad("niche_weights needs one table per member for every n".into());
            }
        }
        Ok(())
    }
}
