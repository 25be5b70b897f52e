//! Allele spaces, simplex points, fitness tables and populations.
//!
//! Genomes are L-tuples of allele indices. Internally they are stored as a
//! single dense code in `0..K^L`, with the first locus most significant, so a
//! K=L=2 fitness table is laid out row-major as `(1,1), (1,2), (2,1), (2,2)`.
//! Allele indices are 0-based in the API; 1-based labels are produced only
//! for I/O.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Entries of a [`SimplexPoint`] sum to one within this tolerance.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Inputs this close to the simplex are renormalized instead of rejected.
pub const SIMPLEX_RENORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlleleSpace {
    alleles: usize,
    loci: usize,
    genomes: usize,
}

impl AlleleSpace {
    pub fn new(alleles: usize, loci: usize) -> Result<Self> {
        if alleles < 2 {
            return Err(invalid(format!("need at least 2 alleles per locus, got {alleles}")));
        }
        if loci < 1 {
            return Err(invalid("need at least one locus"));
        }
        let genomes = u32::try_from(loci)
            .ok()
            .and_then(|l| alleles.checked_pow(l))
            .filter(|&g| g <= u32::MAX as usize)
            .ok_or_else(|| invalid(format!("genome space {alleles}^{loci} is too large")))?;
        Ok(Self { alleles, loci, genomes })
    }

    /// Number of alleles per locus (K).
    pub fn alleles(&self) -> usize {
        self.alleles
    }

    /// Number of loci per genome (L).
    pub fn loci(&self) -> usize {
        self.loci
    }

    /// Size of the genome space, K^L.
    pub fn genome_count(&self) -> usize {
        self.genomes
    }

    pub fn encode(&self, alleles: &[usize]) -> Result<usize> {
        if alleles.len() != self.loci {
            return Err(Error::DimensionMismatch { expected: self.loci, got: alleles.len() });
        }
        alleles.iter().try_fold(0usize, |code, &a| {
            if a >= self.alleles {
                Err(invalid(format!("allele index {a} out of range for K={}", self.alleles)))
            } else {
                Ok(code * self.alleles + a)
            }
        })
    }

    pub fn decode(&self, genome: usize) -> Vec<usize> {
        (0..self.loci).map(|l| self.allele(genome, l)).collect()
    }

    /// Allele carried by `genome` at `locus`.
    #[inline]
    pub fn allele(&self, genome: usize, locus: usize) -> usize {
        let shift = self.loci - 1 - locus;
        (genome / self.alleles.pow(shift as u32)) % self.alleles
    }

    /// 1-based label such as `(1,2)`; single-locus genomes print as `1`.
    pub fn label(&self, genome: usize) -> String {
        let parts: Vec<String> = self.decode(genome).iter().map(|a| (a + 1).to_string()).collect();
        if self.loci == 1 {
            parts[0].clone()
        } else {
            format!("({})", parts.join(","))
        }
    }
}

/// A probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Validates `q`, renormalizing inputs within [`SIMPLEX_RENORM_TOL`] of the simplex.
    pub fn new(mut q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(invalid("empty probability vector"));
        }
        for x in q.iter_mut() {
            if !x.is_finite() || *x < -SIMPLEX_RENORM_TOL {
                return Err(invalid(format!("probability entry {x} is not a valid probability")));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_RENORM_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        if (total - 1.0).abs() > SIMPLEX_TOL {
            q.iter_mut().for_each(|x| *x /= total);
        }
        Ok(Self(q))
    }

    /// Point mass on category `k` of `dim`.
    pub fn vertex(dim: usize, k: usize) -> Self {
        let mut q = vec![0.0; dim];
        q[k] = 1.0;
        Self(q)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Log-fitness table φ over the genome space with its scaling exponent.
///
/// Weights are derived on demand as `w_n(g) = exp(-φ(g) / n^λ)`; they are never
/// stored alongside φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessSpec {
    space: AlleleSpace,
    phi: Vec<f64>,
    lambda: f64,
    reference_n: usize,
}

impl FitnessSpec {
    pub fn new(space: AlleleSpace, phi: Vec<f64>, lambda: f64, reference_n: usize) -> Result<Self> {
        if phi.len() != space.genome_count() {
            return Err(Error::DimensionMismatch { expected: space.genome_count(), got: phi.len() });
        }
        // Validates φ, λ and n, and the positivity of every derived weight.
        scaled_weights(&phi, reference_n, lambda)?;
        Ok(Self { space, phi, lambda, reference_n })
    }

    pub fn space(&self) -> AlleleSpace {
        self.space
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn reference_n(&self) -> usize {
        self.reference_n
    }

    /// The same fitness evaluated at another population size.
    pub fn at_population(&self, n: usize) -> Result<Self> {
        Self::new(self.space, self.phi.clone(), self.lambda, n)
    }

    pub fn weights(&self) -> Vec<f64> {
        scaled_weights(&self.phi, self.reference_n, self.lambda)
            .expect("validated on construction")
    }
}

/// Scaled weights `w_n(k) = exp(-φ(k) / n^λ)`.
pub fn scaled_weights(phi: &[f64], n: usize, lambda: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("population size must be at least 1"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("scaling exponent must be finite and >= 0, got {lambda}")));
    }
    let scale = (n as f64).powf(lambda);
    phi.iter()
        .map(|&p| {
            if !p.is_finite() || p < 0.0 {
                return Err(invalid(format!("log-fitness {p} must be finite and >= 0")));
            }
            let w = (-p / scale).exp();
            if w > 0.0 {
                Ok(w)
            } else {
                Err(invalid(format!("weight exp(-{p}/{scale}) underflows to zero")))
            }
        })
        .collect()
}

/// Fitness-tilted vector `r_q(k) = w(k) q(k) / <q, w>`.
pub fn r_map(q: &SimplexPoint, w: &[f64]) -> Result<SimplexPoint> {
    if w.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: q.len(), got: w.len() });
    }
    if let Some(bad) = w.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid(format!("weights must be strictly positive and finite, got {bad}")));
    }
    let tilted: Vec<f64> = q.as_slice().iter().zip(w).map(|(a, b)| a * b).collect();
    let norm: f64 = tilted.iter().sum();
    SimplexPoint::new(tilted.into_iter().map(|x| x / norm).collect())
}

/// An ordered population of genomes with incrementally maintained per-locus
/// allele counts and per-member log-luck.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    space: AlleleSpace,
    genomes: Vec<usize>,
    /// Locus-major: `counts[locus * K + allele]`.
    counts: Vec<u32>,
    log_luck: Vec<f64>,
}

impl Population {
    pub fn new(space: AlleleSpace, genomes: Vec<usize>) -> Result<Self> {
        let log_luck = vec![0.0; genomes.len()];
        Self::with_luck(space, genomes, log_luck)
    }

    pub fn with_luck(space: AlleleSpace, genomes: Vec<usize>, log_luck: Vec<f64>) -> Result<Self> {
        if log_luck.len() != genomes.len() {
            return Err(Error::DimensionMismatch { expected: genomes.len(), got: log_luck.len() });
        }
        if let Some(g) = genomes.iter().find(|&&g| g >= space.genome_count()) {
            return Err(invalid(format!("genome code {g} outside genome space")));
        }
        if genomes.len() > u32::MAX as usize {
            return Err(invalid("population too large"));
        }
        let mut pop = Self {
            space,
            counts: vec![0; space.loci() * space.alleles()],
            genomes,
            log_luck,
        };
        for i in 0..pop.genomes.len() {
            pop.add_counts(pop.genomes[i]);
        }
        Ok(pop)
    }

    pub fn space(&self) -> AlleleSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.genomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genomes.is_empty()
    }

    #[inline]
    pub fn genome(&self, i: usize) -> usize {
        self.genomes[i]
    }

    pub fn genomes(&self) -> &[usize] {
        &self.genomes
    }

    #[inline]
    pub fn log_luck(&self, i: usize) -> f64 {
        self.log_luck[i]
    }

    pub fn log_lucks(&self) -> &[f64] {
        &self.log_luck
    }

    /// All per-locus counts, locus-major.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn locus_counts(&self, locus: usize) -> &[u32] {
        let k = self.space.alleles();
        &self.counts[locus * k..(locus + 1) * k]
    }

    /// Counts of each whole genome over `0..K^L`.
    pub fn genome_counts(&self) -> Vec<u32> {
        let mut c = vec![0; self.space.genome_count()];
        for &g in &self.genomes {
            c[g] += 1;
        }
        c
    }

    /// Replaces member `i` in place, updating the counts.
    pub fn replace(&mut self, i: usize, genome: usize, log_luck: f64) {
        debug_assert!(genome < self.space.genome_count());
        let old = self.genomes[i];
        self.remove_counts(old);
        self.add_counts(genome);
        self.genomes[i] = genome;
        self.log_luck[i] = log_luck;
    }

    #[inline]
    pub(crate) fn add_counts(&mut self, genome: usize) {
        let k = self.space.alleles();
        for l in 0..self.space.loci() {
            self.counts[l * k + self.space.allele(genome, l)] += 1;
        }
    }

    #[inline]
    pub(crate) fn remove_counts(&mut self, genome: usize) {
        let k = self.space.alleles();
        for l in 0..self.space.loci() {
            self.counts[l * k + self.space.allele(genome, l)] -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn encode_is_row_major_first_locus_major() {
        let s = AlleleSpace::new(2, 2).unwrap();
        assert_eq!(s.encode(&[0, 0]).unwrap(), 0);
        assert_eq!(s.encode(&[0, 1]).unwrap(), 1);
        assert_eq!(s.encode(&[1, 0]).unwrap(), 2);
        assert_eq!(s.decode(3), vec![1, 1]);
        assert_eq!(s.label(1), "(1,2)");
        let s3 = AlleleSpace::new(3, 3).unwrap();
        for g in 0..27 {
            assert_eq!(s3.encode(&s3.decode(g)).unwrap(), g);
        }
    }

    #[test]
    fn allele_space_rejects_degenerate() {
        assert!(AlleleSpace::new(1, 3).is_err());
        assert!(AlleleSpace::new(2, 0).is_err());
        assert!(AlleleSpace::new(2, 64).is_err());
    }

    #[test]
    fn simplex_renormalizes_close_inputs_only() {
        let q = SimplexPoint::new(vec![0.5 + 4e-10, 0.5]).unwrap();
        assert!((q.as_slice().iter().sum::<f64>() - 1.0).abs() < SIMPLEX_TOL);
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![1.1, -0.1]).is_err());
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn scaled_weights_examples() {
        let ln6 = 6f64.ln();
        let w = scaled_weights(&[0.0, ln6], 12345, 0.0).unwrap();
        assert_abs_diff_eq!(w[0], 1.0);
        assert_abs_diff_eq!(w[1], 1.0 / 6.0, epsilon = 1e-15);

        assert_eq!(scaled_weights(&[0.0; 4], 77, 0.7).unwrap(), vec![1.0; 4]);

        let w = scaled_weights(&[0.0, ln6], 16, 0.5).unwrap();
        assert_abs_diff_eq!(w[1], (-ln6 / 4.0).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 6f64.powf(-0.25), epsilon = 1e-15);
    }

    #[test]
    fn scaled_weights_rejects_bad_input() {
        assert!(scaled_weights(&[0.0], 0, 0.0).is_err());
        assert!(scaled_weights(&[0.0], 3, -0.1).is_err());
        assert!(scaled_weights(&[f64::INFINITY], 3, 0.0).is_err());
        assert!(scaled_weights(&[-1.0], 3, 0.0).is_err());
        assert!(scaled_weights(&[1e6], 1, 0.0).is_err());
    }

    #[test]
    fn r_map_examples() {
        let q = SimplexPoint::new(vec![0.6, 0.4]).unwrap();
        let r = r_map(&q, &[1.0, 1.0 / 6.0]).unwrap();
        assert_abs_diff_eq!(r[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 0.1, epsilon = 1e-15);

        let r = r_map(&q, &[2.5, 2.5]).unwrap();
        assert_abs_diff_eq!(r[0], 0.6, epsilon = 1e-15);

        // 0.25*2 / (0.25*2 + 0.75*1) = 0.4
        let q = SimplexPoint::new(vec![0.25, 0.75]).unwrap();
        let r = r_map(&q, &[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 0.6, epsilon = 1e-15);

        assert!(r_map(&q, &[0.0, 1.0]).is_err());
        assert!(r_map(&q, &[1.0]).is_err());
    }

    #[test]
    fn fitness_spec_derives_weights() {
        let s = AlleleSpace::new(2, 1).unwrap();
        let f = FitnessSpec::new(s, vec![0.0, 1.0], 0.0, 10).unwrap();
        let g = f.at_population(1000).unwrap();
        assert_eq!(f.weights(), g.weights());
        let f = FitnessSpec::new(s, vec![0.0, 1.0], 1.0, 10).unwrap();
        assert_abs_diff_eq!(f.weights()[1], (-0.1f64).exp());
        assert!(FitnessSpec::new(s, vec![0.0], 1.0, 10).is_err());
    }

    #[test]
    fn population_counts_track_replacements() {
        let s = AlleleSpace::new(3, 2).unwrap();
        let mut p = Population::new(s, vec![0, 4, 8, 5]).unwrap();
        assert_eq!(p.locus_counts(0), &[1, 2, 1]);
        assert_eq!(p.locus_counts(1), &[1, 1, 2]);
        p.replace(2, 0, 0.3);
        assert_eq!(p.locus_counts(0), &[2, 2, 0]);
        assert_eq!(p.locus_counts(1), &[2, 1, 1]);
        assert_eq!(p.log_luck(2), 0.3);
        assert_eq!(p.genome_counts().iter().sum::<u32>(), 4);
        assert!(Population::new(s, vec![9]).is_err());
    }
}
