//! Exact small-instance computations: the stationary law on ordered
//! populations and on the count lattice, lumping and exchangeable marginals.

mod csv;
mod matrix;

pub use self::csv::{write_distribution_csv, write_matrix_csv};
pub use matrix::{
    check_detailed_balance, full_transition_matrix, power_iteration, stationarity_residual, BalanceReport,
    TransitionMatrix,
};

use crate::breeding::ProductBreeding;
use crate::error::{invalid, Error, Result};
use crate::genotype::AlleleSpace;

/// Largest ordered state space `|X|^n` the oracle will enumerate.
pub const ORDERED_STATE_LIMIT: u128 = 20_000;
/// Largest count lattice `|N_n|` the oracle will enumerate.
pub const COUNT_STATE_LIMIT: u128 = 2_000_000;

/// Log-sum-exp normalization of log-weights into probabilities.
pub fn normalize_log(logw: &[f64]) -> Vec<f64> {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

fn ln_factorial(k: u32) -> f64 {
    crate::breeding::ln_rising(1.0, k)
}

/// `C(n + d - 1, d - 1)`, the number of count vectors of `n` over `d` categories.
pub fn lattice_size(n: usize, d: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..d as u128 {
        c = c * (n as u128 + i) / i;
        if c > u64::MAX as u128 {
            return u128::MAX;
        }
    }
    c
}

/// All count vectors of `n` over `d` categories, first coordinate descending.
pub fn compositions(n: u32, d: usize) -> Vec<Vec<u32>> {
    fn rec(left: u32, d: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if d == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v);
            rec(left - v, d - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, d, &mut Vec::with_capacity(d), &mut out);
    out
}

/// Per-locus allele counts (locus-major) of a vector of whole-genome counts.
pub fn locus_counts(space: AlleleSpace, genome_counts: &[u32]) -> Vec<u32> {
    let k = space.alleles();
    let mut c = vec![0; k * space.loci()];
    for (g, &m) in genome_counts.iter().enumerate() {
        for l in 0..space.loci() {
            c[l * k + space.allele(g, l)] += m;
        }
    }
    c
}

/// Exact probability measure on the count lattice; for `L > 1` the counts
/// are over whole genomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    n: u32,
    support: Vec<Vec<u32>>,
    probs: Vec<f64>,
}

impl CountDistribution {
    pub fn new(n: u32, support: Vec<Vec<u32>>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), got: probs.len() });
        }
        if support.iter().any(|c| c.iter().sum::<u32>() != n) {
            return Err(invalid("support vectors must sum to n"));
        }
        let s: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("probabilities must be nonnegative and sum to 1, got {s}")));
        }
        Ok(Self { n, support, probs })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn support(&self) -> &[Vec<u32>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of a count vector (zero off the support).
    pub fn prob(&self, counts: &[u32]) -> f64 {
        self.support.iter().position(|c| c == counts).map_or(0.0, |i| self.probs[i])
    }

    /// Exchangeable marginal `P(X_1..X_m = genomes)`: each population is
    /// sub-sampled without replacement, `Π (n_g)_{m_g} / (n)_m`.
    pub fn marginal_probability(&self, genomes: &[usize]) -> Result<f64> {
        let m = genomes.len();
        if m > self.n as usize {
            return Err(invalid(format!("prefix length {m} exceeds population size {}", self.n)));
        }
        let d = self.support.first().map_or(0, |c| c.len());
        if let Some(g) = genomes.iter().find(|&&g| g >= d) {
            return Err(invalid(format!("genome {g} outside the support dimension {d}")));
        }
        let denom: f64 = (0..m).map(|j| (self.n as usize - j) as f64).product();
        let mut total = 0.0;
        for (c, p) in self.support.iter().zip(&self.probs) {
            let mut left = c.clone();
            let mut num = 1.0;
            for &g in genomes {
                num *= left[g] as f64;
                left[g] = left[g].saturating_sub(1);
            }
            total += p * num;
        }
        Ok(total / denom)
    }

    /// Distribution of the count of category `k`.
    pub fn category_marginal(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n as usize + 1];
        for (c, p) in self.support.iter().zip(&self.probs) {
            out[c[k] as usize] += p;
        }
        out
    }
}

/// Unnormalized log-weight of one ordered population with these genome
/// counts: `ln P_ξ(x) + Σ n_g ln w(g)`.
fn ordered_log_weight(breeding: &ProductBreeding, log_w: &[f64], genome_counts: &[u32]) -> f64 {
    let lc = locus_counts(breeding.space(), genome_counts);
    breeding.joint_log_prob(&lc) + genome_counts.iter().zip(log_w).map(|(&c, lw)| c as f64 * lw).sum::<f64>()
}

/// Stationary law of the count vector: multinomial coefficient times the
/// ordered weight, normalized in log space.
pub fn stationary_counts(n: u32, breeding: &ProductBreeding, w: &[f64]) -> Result<CountDistribution> {
    let space = breeding.space();
    let d = space.genome_count();
    check_weights(w, d)?;
    let needed = lattice_size(n as usize, d);
    if needed > COUNT_STATE_LIMIT {
        return Err(Error::BudgetExceeded { needed, limit: COUNT_STATE_LIMIT });
    }
    let log_w: Vec<f64> = w.iter().map(|x| x.ln()).collect();
    let support = compositions(n, d);
    let logp: Vec<f64> = support
        .iter()
        .map(|c| {
            let multinom = ln_factorial(n) - c.iter().map(|&x| ln_factorial(x)).sum::<f64>();
            multinom + ordered_log_weight(breeding, &log_w, c)
        })
        .collect();
    CountDistribution::new(n, support, normalize_log(&logp))
}

fn check_weights(w: &[f64], d: usize) -> Result<()> {
    if w.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: w.len() });
    }
    if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(invalid("weights must be positive and finite"));
    }
    Ok(())
}

/// Enumeration of ordered populations `X^n`; member 0 is the most
/// significant digit of the state index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderedStates {
    space: AlleleSpace,
    n: usize,
    size: usize,
}

impl OrderedStates {
    pub fn new(space: AlleleSpace, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("population size must be at least 1"));
        }
        let g = space.genome_count() as u128;
        let mut needed: u128 = 1;
        for _ in 0..n {
            needed = needed.saturating_mul(g);
        }
        if needed > ORDERED_STATE_LIMIT {
            return Err(Error::BudgetExceeded { needed, limit: ORDERED_STATE_LIMIT });
        }
        Ok(Self { space, n, size: needed as usize })
    }

    pub fn space(&self) -> AlleleSpace {
        self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn decode(&self, mut state: usize) -> Vec<usize> {
        let g = self.space.genome_count();
        let mut out = vec![0; self.n];
        for slot in out.iter_mut().rev() {
            *slot = state % g;
            state /= g;
        }
        out
    }

    pub fn encode(&self, genomes: &[usize]) -> usize {
        let g = self.space.genome_count();
        genomes.iter().fold(0, |acc, &x| acc * g + x)
    }

    pub fn genome_counts(&self, genomes: &[usize]) -> Vec<u32> {
        let mut c = vec![0; self.space.genome_count()];
        for &x in genomes {
            c[x] += 1;
        }
        c
    }

    /// Label such as `1 2 2` (or `(1,2) (2,1)` for several loci).
    pub fn label(&self, state: usize) -> String {
        self.decode(state).iter().map(|&g| self.space.label(g)).collect::<Vec<_>>().join(" ")
    }
}

/// Stationary law on ordered populations, `∝ P_ξ(x) Π w(x_i)`.
pub fn stationary_ordered(n: usize, breeding: &ProductBreeding, w: &[f64]) -> Result<Vec<f64>> {
    let states = OrderedStates::new(breeding.space(), n)?;
    check_weights(w, breeding.space().genome_count())?;
    let log_w: Vec<f64> = w.iter().map(|x| x.ln()).collect();
    let logp: Vec<f64> = (0..states.len())
        .map(|s| ordered_log_weight(breeding, &log_w, &states.genome_counts(&states.decode(s))))
        .collect();
    Ok(normalize_log(&logp))
}

/// Stationary law of the niche kernel, `∝ P_ξ(x) Π_j w_j(x_j)`.
pub fn stationary_ordered_niche(breeding: &ProductBreeding, tables: &[Vec<f64>]) -> Result<Vec<f64>> {
    let states = OrderedStates::new(breeding.space(), tables.len())?;
    for t in tables {
        check_weights(t, breeding.space().genome_count())?;
    }
    let zero = vec![0.0; breeding.space().genome_count()];
    let logp: Vec<f64> = (0..states.len())
        .map(|s| {
            let x = states.decode(s);
            let fit: f64 = x.iter().zip(tables).map(|(&g, t)| t[g].ln()).sum();
            ordered_log_weight(breeding, &zero, &states.genome_counts(&x)) + fit
        })
        .collect();
    Ok(normalize_log(&logp))
}

/// Sums ordered-state probabilities over permutation orbits.
pub fn lump_to_counts(states: &OrderedStates, dist: &[f64]) -> Result<CountDistribution> {
    if dist.len() != states.len() {
        return Err(Error::DimensionMismatch { expected: states.len(), got: dist.len() });
    }
    let n = states.n() as u32;
    let support = compositions(n, states.space().genome_count());
    let mut probs = vec![0.0; support.len()];
    let pos: std::collections::HashMap<&[u32], usize> =
        support.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
    for (s, p) in dist.iter().enumerate() {
        let c = states.genome_counts(&states.decode(s));
        probs[pos[c.as_slice()]] += p;
    }
    CountDistribution::new(n, support, probs)
}

/// Marginal of the first `m` members under an ordered-state distribution.
pub fn ordered_marginal(states: &OrderedStates, dist: &[f64], prefix: &[usize]) -> Result<f64> {
    if prefix.len() > states.n() {
        return Err(invalid("prefix longer than the population"));
    }
    Ok((0..states.len())
        .filter(|&s| states.decode(s).starts_with(prefix))
        .map(|s| dist[s])
        .sum())
}
