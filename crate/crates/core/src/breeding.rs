//! Exchangeable breeding: the Dirichlet-categorical (Polya urn) process and
//! its product over loci.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::genotype::{AlleleSpace, Population};

/// Random stream type used by every stochastic operation.
pub type ChainRng = ChaCha8Rng;

/// Independent stream `stream` derived from a 64-bit seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Counts of each allele at one locus.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlleleCountVector {
    counts: Vec<u32>,
    n: u32,
}

impl AlleleCountVector {
    pub fn new(counts: Vec<u32>) -> Self {
        let n = counts.iter().sum();
        Self { counts, n }
    }

    pub fn zeros(k: usize) -> Self {
        Self { counts: vec![0; k], n: 0 }
    }

    /// Counts of a sequence of 0-based allele indices.
    pub fn from_alleles(k: usize, alleles: &[usize]) -> Self {
        let mut c = vec![0; k];
        for &a in alleles {
            c[a] += 1;
        }
        Self::new(c)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn increment(&mut self, k: usize) {
        self.counts[k] += 1;
        self.n += 1;
    }
}

/// One conditional draw: the allele and whether it came from the prior mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Draw {
    pub allele: usize,
    pub mutation: bool,
}

/// Polya urn with prior pseudo-counts `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletCategorical {
    alpha: Vec<f64>,
    alpha_total: f64,
}

impl DirichletCategorical {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(invalid("need at least two categories"));
        }
        if let Some(a) = alpha.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
            return Err(invalid(format!("prior pseudo-counts must be positive and finite, got {a}")));
        }
        let alpha_total = alpha.iter().sum();
        Ok(Self { alpha, alpha_total })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Concentration |α|.
    pub fn alpha_total(&self) -> f64 {
        self.alpha_total
    }

    pub fn categories(&self) -> usize {
        self.alpha.len()
    }

    /// Probability that the next draw comes from the prior mass, `|α| / (|α| + n)`.
    pub fn mutation_rate(&self, n: u32) -> f64 {
        self.alpha_total / (self.alpha_total + n as f64)
    }

    /// `P(next = k | counts) = (n_k + α_k) / (n + |α|)`.
    pub fn conditional_prob(&self, counts: &[u32], k: usize) -> f64 {
        let n: u32 = counts.iter().sum();
        (counts[k] as f64 + self.alpha[k]) / (n as f64 + self.alpha_total)
    }

    /// Draws the next allele given the urn contents.
    ///
    /// A single uniform on `[0, n + |α|)` is laid over consecutive segments of
    /// length `n_k` (copies) and `α_k` (prior balls); landing in a prior
    /// segment is a mutation, so `P(mutation | k) = α_k / (n_k + α_k)`.
    pub fn conditional_sample<R: Rng + ?Sized>(&self, counts: &[u32], rng: &mut R) -> Draw {
        let n: u32 = counts.iter().sum();
        self.sample_with_total(counts, n, rng)
    }

    #[inline]
    pub(crate) fn sample_with_total<R: Rng + ?Sized>(&self, counts: &[u32], n: u32, rng: &mut R) -> Draw {
        debug_assert_eq!(counts.len(), self.alpha.len());
        let mut u = rng.random::<f64>() * (n as f64 + self.alpha_total);
        for (k, (&c, &a)) in counts.iter().zip(&self.alpha).enumerate() {
            let c = c as f64;
            if u < c {
                return Draw { allele: k, mutation: false };
            }
            u -= c;
            if u < a {
                return Draw { allele: k, mutation: true };
            }
            u -= a;
        }
        // Rounding can leave u at the very top of the range.
        let k = self.alpha.len() - 1;
        Draw { allele: k, mutation: true }
    }

    /// Log-probability of one ordered sequence with the given counts,
    /// `Σ_k ln (α_k)^{(n_k)} − ln (|α|)^{(n)}` with rising factorials.
    pub fn joint_log_prob(&self, counts: &[u32]) -> f64 {
        let n: u32 = counts.iter().sum();
        let num: f64 = counts.iter().zip(&self.alpha).map(|(&c, &a)| ln_rising(a, c)).sum();
        num - ln_rising(self.alpha_total, n)
    }
}

/// `ln(a (a+1) ... (a+n-1))`.
pub fn ln_rising(a: f64, n: u32) -> f64 {
    if n <= 64 {
        (0..n).map(|j| (a + j as f64).ln()).sum()
    } else {
        ln_gamma(a + n as f64) - ln_gamma(a)
    }
}

/// A bred genome and its per-locus mutation flags (bit `l` set iff locus `l` mutated).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Offspring {
    pub genome: usize,
    pub mutations: u64,
}

impl Offspring {
    pub fn mutated(&self, locus: usize) -> bool {
        self.mutations >> locus & 1 == 1
    }

    pub fn mutation_count(&self) -> u32 {
        self.mutations.count_ones()
    }
}

/// Independent Polya urns, one per locus.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBreeding {
    space: AlleleSpace,
    loci: Vec<DirichletCategorical>,
}

impl ProductBreeding {
    pub fn new(space: AlleleSpace, loci: Vec<DirichletCategorical>) -> Result<Self> {
        if loci.len() != space.loci() {
            return Err(Error::DimensionMismatch { expected: space.loci(), got: loci.len() });
        }
        if let Some(bad) = loci.iter().find(|p| p.categories() != space.alleles()) {
            return Err(Error::DimensionMismatch { expected: space.alleles(), got: bad.categories() });
        }
        Ok(Self { space, loci })
    }

    /// Builds the product process from per-locus pseudo-count vectors.
    pub fn from_alphas(space: AlleleSpace, alphas: &[Vec<f64>]) -> Result<Self> {
        let loci = alphas.iter().cloned().map(DirichletCategorical::new).collect::<Result<_>>()?;
        Self::new(space, loci)
    }

    pub fn space(&self) -> AlleleSpace {
        self.space
    }

    pub fn loci(&self) -> &[DirichletCategorical] {
        &self.loci
    }

    /// Breeds one genome conditioned on `pop`, independently per locus.
    pub fn breed_genome<R: Rng + ?Sized>(&self, pop: &Population, rng: &mut R) -> Offspring {
        self.breed_from_counts(pop.counts(), pop.len() as u32, rng)
    }

    /// Breeds from locus-major counts of a population of size `n`.
    #[inline]
    pub fn breed_from_counts<R: Rng + ?Sized>(&self, counts: &[u32], n: u32, rng: &mut R) -> Offspring {
        let k = self.space.alleles();
        let mut genome = 0;
        let mut mutations = 0u64;
        for (l, urn) in self.loci.iter().enumerate() {
            let d = urn.sample_with_total(&counts[l * k..(l + 1) * k], n, rng);
            genome = genome * k + d.allele;
            if d.mutation {
                mutations |= 1 << l;
            }
        }
        Offspring { genome, mutations }
    }

    /// `P_ξ(genome | population)` from locus-major counts of a population of size `n`.
    pub fn conditional_prob(&self, counts: &[u32], n: u32, genome: usize) -> f64 {
        let k = self.space.alleles();
        self.loci
            .iter()
            .enumerate()
            .map(|(l, urn)| {
                let a = self.space.allele(genome, l);
                (counts[l * k + a] as f64 + urn.alpha[a]) / (n as f64 + urn.alpha_total)
            })
            .product()
    }

    /// Log-probability of one ordered population with these locus-major counts.
    pub fn joint_log_prob(&self, counts: &[u32]) -> f64 {
        let k = self.space.alleles();
        self.loci
            .iter()
            .enumerate()
            .map(|(l, urn)| urn.joint_log_prob(&counts[l * k..(l + 1) * k]))
            .sum()
    }

    /// Samples a population of size `n` sequentially from the urn,
    /// `x_i ~ P_ξ(· | x_1..x_{i-1})`.
    pub fn sample_population<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Population {
        let mut pop = Population::new(self.space, Vec::with_capacity(n)).expect("empty population");
        let mut genomes = Vec::with_capacity(n);
        for i in 0..n {
            let child = self.breed_from_counts(pop.counts(), i as u32, rng);
            pop.add_counts(child.genome);
            genomes.push(child.genome);
        }
        Population::new(self.space, genomes).expect("bred genomes lie in the space")
    }
}

/// Urn prior used at population size `n` under scaling exponent `λ`: `n^{1-λ} α`.
pub fn effective_alpha(base_alpha: &[f64], n: usize, lambda: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("prior scaling needs lambda in [0, 1], got {lambda}")));
    }
    if n == 0 {
        return Err(invalid("population size must be at least 1"));
    }
    if let Some(a) = base_alpha.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(invalid(format!("prior pseudo-counts must be positive, got {a}")));
    }
    let scale = (n as f64).powf(1.0 - lambda);
    Ok(base_alpha.iter().map(|a| a * scale).collect())
}
