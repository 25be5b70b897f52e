//! Generation-step kernels: single tournament, inverse-fitness ejection,
//! breed-many with survival tickets, the niche variant and the luck wrapper.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::breeding::ProductBreeding;
use crate::error::{invalid, Error, Result};
use crate::genotype::Population;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TournamentRule {
    /// Challenger wins with probability `w_c / (w_c + w_i)`.
    #[default]
    Ratio,
    /// Challenger wins with probability `min(1, w_c / w_i)`.
    MetropolisMin,
}

impl TournamentRule {
    #[inline]
    pub fn win_prob(self, challenger: f64, incumbent: f64) -> f64 {
        match self {
            Self::Ratio => challenger / (challenger + incumbent),
            Self::MetropolisMin => (challenger / incumbent).min(1.0),
        }
    }
}

/// Finite law on nonnegative integers; fixed in advance, so it cannot depend
/// on the population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountLaw {
    pub values: Vec<u32>,
    pub probs: Vec<f64>,
}

impl CountLaw {
    pub fn fixed(v: u32) -> Self {
        Self { values: vec![v], probs: vec![1.0] }
    }

    pub fn new(values: Vec<u32>, probs: Vec<f64>) -> Result<Self> {
        let law = Self { values, probs };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        validate_atoms(self.values.len(), &self.probs)
    }

    /// A one-atom law consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        self.values[pick(&self.probs, rng)]
    }
}

#[inline]
fn pick<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn validate_atoms(n: usize, probs: &[f64]) -> Result<()> {
    if n == 0 || n != probs.len() {
        return Err(invalid("law needs matching, nonempty values and probabilities"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(invalid("probabilities must be finite and nonnegative"));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// Discrete law of log-luck `ψ`. A member's effective weight is `w·exp(−ψ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LuckConfig {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl LuckConfig {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let luck = Self { values, probs };
        luck.validate()?;
        Ok(luck)
    }

    /// `ψ ∈ {−ln 2, ln 2}` with equal probability.
    pub fn symmetric_ln2() -> Self {
        let l = std::f64::consts::LN_2;
        Self { values: vec![-l, l], probs: vec![0.5, 0.5] }
    }

    pub fn validate(&self) -> Result<()> {
        validate_atoms(self.values.len(), &self.probs)?;
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("log-luck values must be finite"));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        self.values[pick(&self.probs, rng)]
    }
}

/// Kernel choice as it appears in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelConfig {
    SingleTournament {
        #[serde(default)]
        rule: TournamentRule,
    },
    InverseFitness,
    BreedMany {
        #[serde(default = "one")]
        m: CountLaw,
        #[serde(default = "one")]
        t: CountLaw,
    },
    /// Single tournament where position `j` is judged by its own weight table.
    Niche {
        #[serde(default)]
        rule: TournamentRule,
        tables: Vec<Vec<f64>>,
    },
}

fn one() -> CountLaw {
    CountLaw::fixed(1)
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self::SingleTournament { rule: TournamentRule::Ratio }
    }
}

impl KernelConfig {
    pub fn breed_many_default() -> Self {
        Self::BreedMany { m: one(), t: one() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SingleTournament { .. } => "single_tournament",
            Self::InverseFitness => "inverse_fitness",
            Self::BreedMany { .. } => "breed_many",
            Self::Niche { .. } => "niche",
        }
    }
}

/// A fully parameterized kernel: breeding process, genome weights, selection
/// mode and optional luck.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    breeding: ProductBreeding,
    weights: Vec<f64>,
    config: KernelConfig,
    luck: Option<LuckConfig>,
}

impl Kernel {
    pub fn new(breeding: ProductBreeding, weights: Vec<f64>, config: KernelConfig) -> Result<Self> {
        check_weights(&weights, breeding.space().genome_count())?;
        match &config {
            KernelConfig::BreedMany { m, t } => {
                m.validate()?;
                t.validate()?;
            }
            KernelConfig::Niche { tables, .. } => {
                if tables.is_empty() {
                    return Err(invalid("niche kernel needs at least one table"));
                }
                for t in tables {
                    check_weights(t, breeding.space().genome_count())?;
                }
            }
            _ => {}
        }
        Ok(Self { breeding, weights, config, luck: None })
    }

    pub fn breeding(&self) -> &ProductBreeding {
        &self.breeding
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn luck(&self) -> Option<&LuckConfig> {
        self.luck.as_ref()
    }

    /// Checks that `pop` can be stepped by this kernel.
    pub fn check_population(&self, pop: &Population) -> Result<()> {
        if pop.is_empty() {
            return Err(invalid("population must be nonempty"));
        }
        if pop.space() != self.breeding.space() {
            return Err(invalid("population and breeding process use different spaces"));
        }
        if let KernelConfig::Niche { tables, .. } = &self.config {
            if tables.len() != pop.len() {
                return Err(Error::DimensionMismatch { expected: pop.len(), got: tables.len() });
            }
        }
        Ok(())
    }
}

fn check_weights(w: &[f64], genomes: usize) -> Result<()> {
    if w.len() != genomes {
        return Err(Error::DimensionMismatch { expected: genomes, got: w.len() });
    }
    if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(invalid(format!("weights must be positive and finite, got {x}")));
    }
    Ok(())
}

/// Adds per-member luck to a single-tournament or inverse-fitness kernel.
pub fn wrap_with_luck(mut kernel: Kernel, luck: LuckConfig) -> Result<Kernel> {
    luck.validate()?;
    match kernel.config {
        KernelConfig::SingleTournament { .. } | KernelConfig::InverseFitness => {
            kernel.luck = Some(luck);
            Ok(kernel)
        }
        _ => Err(Error::Unsupported(format!("luck wrapper over {}", kernel.config.name()))),
    }
}

/// Groups members by (genome, log-luck) so inverse-fitness ejection costs
/// O(classes) instead of O(n).
#[derive(Debug, Clone)]
struct ClassIndex {
    lookup: HashMap<(usize, u64), usize>,
    inv_weight: Vec<f64>,
    members: Vec<Vec<usize>>,
    /// class of each member and its slot within `members[class]`
    class_of: Vec<usize>,
    slot: Vec<usize>,
}

impl ClassIndex {
    fn build(pop: &Population, weights: &[f64]) -> Self {
        let mut idx = Self {
            lookup: HashMap::new(),
            inv_weight: Vec::new(),
            members: Vec::new(),
            class_of: vec![0; pop.len()],
            slot: vec![0; pop.len()],
        };
        for i in 0..pop.len() {
            let c = idx.class(pop.genome(i), pop.log_luck(i), weights);
            idx.class_of[i] = c;
            idx.slot[i] = idx.members[c].len();
            idx.members[c].push(i);
        }
        idx
    }

    fn class(&mut self, genome: usize, psi: f64, weights: &[f64]) -> usize {
        let key = (genome, psi.to_bits());
        if let Some(&c) = self.lookup.get(&key) {
            return c;
        }
        let c = self.inv_weight.len();
        self.lookup.insert(key, c);
        self.inv_weight.push(psi.exp() / weights[genome]);
        self.members.push(Vec::new());
        c
    }

    fn move_member(&mut self, i: usize, to: usize) {
        let from = self.class_of[i];
        let s = self.slot[i];
        self.members[from].swap_remove(s);
        if let Some(&moved) = self.members[from].get(s) {
            self.slot[moved] = s;
        }
        self.class_of[i] = to;
        self.slot[i] = self.members[to].len();
        self.members[to].push(i);
    }
}

/// Mutable state of one chain: a population stepped by a kernel.
#[derive(Debug, Clone)]
pub struct Chain {
    kernel: Kernel,
    pop: Population,
    index: Option<ClassIndex>,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    counts: Vec<u32>,
    genomes: Vec<usize>,
    slots: Vec<usize>,
    waiting: Vec<usize>,
}

impl Chain {
    pub fn new(kernel: Kernel, pop: Population) -> Result<Self> {
        kernel.check_population(&pop)?;
        let index = matches!(kernel.config, KernelConfig::InverseFitness)
            .then(|| ClassIndex::build(&pop, &kernel.weights));
        Ok(Self { kernel, pop, index, scratch: Scratch::default() })
    }

    /// Starts from a population drawn sequentially from the breeding law,
    /// with luck drawn independently per member.
    pub fn from_prior<R: Rng + ?Sized>(kernel: Kernel, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(invalid("population size must be at least 1"));
        }
        let mut pop = kernel.breeding.sample_population(n, rng);
        if let Some(luck) = &kernel.luck {
            let genomes = pop.genomes().to_vec();
            let psi = (0..n).map(|_| luck.sample(rng)).collect();
            pop = Population::with_luck(pop.space(), genomes, psi)?;
        }
        Self::new(kernel, pop)
    }

    pub fn population(&self) -> &Population {
        &self.pop
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn into_population(self) -> Population {
        self.pop
    }

    /// Advances one generation. Population size never changes.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.pop.len();
        match &self.kernel.config {
            KernelConfig::SingleTournament { rule } => {
                let rule = *rule;
                self.tournament(rng, rule, None);
            }
            KernelConfig::Niche { rule, .. } => {
                let rule = *rule;
                self.tournament(rng, rule, Some(()));
            }
            KernelConfig::InverseFitness => self.inverse_fitness(rng),
            KernelConfig::BreedMany { .. } => self.breed_many(rng),
        }
        debug_assert_eq!(self.pop.len(), n);
    }

    pub fn run<R: Rng + ?Sized>(&mut self, steps: u64, rng: &mut R) {
        for _ in 0..steps {
            self.step(rng);
        }
    }

    fn tournament<R: Rng + ?Sized>(&mut self, rng: &mut R, rule: TournamentRule, niche: Option<()>) {
        let k = &self.kernel;
        let n = self.pop.len();
        let child = k.breeding.breed_from_counts(self.pop.counts(), n as u32, rng);
        let psi = k.luck.as_ref().map_or(0.0, |l| l.sample(rng));
        let i = rng.random_range(0..n);
        let table = match (niche, &k.config) {
            (Some(()), KernelConfig::Niche { tables, .. }) => &tables[i],
            _ => &k.weights,
        };
        let wc = table[child.genome] * (-psi).exp();
        let wi = table[self.pop.genome(i)] * (-self.pop.log_luck(i)).exp();
        if rng.random::<f64>() < rule.win_prob(wc, wi) {
            self.pop.replace(i, child.genome, psi);
        }
    }

    fn inverse_fitness<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let k = &self.kernel;
        let n = self.pop.len();
        let child = k.breeding.breed_from_counts(self.pop.counts(), n as u32, rng);
        let psi = k.luck.as_ref().map_or(0.0, |l| l.sample(rng));
        let idx = self.index.as_mut().expect("inverse-fitness chain keeps an index");
        let cc = idx.class(child.genome, psi, &k.weights);
        let inv_child = idx.inv_weight[cc];
        let total: f64 = inv_child
            + idx.members.iter().zip(&idx.inv_weight).map(|(m, w)| m.len() as f64 * w).sum::<f64>();
        let mut u = rng.random::<f64>() * total;
        if u < inv_child {
            return;
        }
        u -= inv_child;
        let mut chosen = None;
        let mut last = None;
        for (c, (m, w)) in idx.members.iter().zip(&idx.inv_weight).enumerate() {
            if m.is_empty() {
                continue;
            }
            last = Some(c);
            let mass = m.len() as f64 * w;
            if u < mass {
                chosen = Some(c);
                break;
            }
            u -= mass;
        }
        let Some(c) = chosen.or(last) else { return };
        let victim = idx.members[c][rng.random_range(0..idx.members[c].len())];
        idx.move_member(victim, cc);
        self.pop.replace(victim, child.genome, psi);
    }

    fn breed_many<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let KernelConfig::BreedMany { m, t } = &self.kernel.config else { unreachable!() };
        let m = m.sample(rng) as usize;
        let t = t.sample(rng) as usize;
        let n = self.pop.len();
        if m == 0 {
            return;
        }
        let s = &mut self.scratch;
        s.counts.clear();
        s.counts.extend_from_slice(self.pop.counts());
        s.genomes.clear();
        let space = self.pop.space();
        let kk = space.alleles();
        for j in 0..m {
            let child = self.kernel.breeding.breed_from_counts(&s.counts, (n + j) as u32, rng);
            for l in 0..space.loci() {
                s.counts[l * kk + space.allele(child.genome, l)] += 1;
            }
            s.genomes.push(child.genome);
        }
        // ids 0..n are the current members, n.. the offspring
        s.slots.clear();
        s.slots.extend(0..n);
        s.waiting.clear();
        s.waiting.extend(n..n + m);
        let w = &self.kernel.weights;
        let genome = |id: usize| if id < n { self.pop.genome(id) } else { s.genomes[id - n] };
        for _ in 0..t {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..m);
            let (h, c) = (s.slots[a], s.waiting[b]);
            let (wh, wc) = (w[genome(h)], w[genome(c)]);
            if rng.random::<f64>() >= wh / (wh + wc) {
                s.slots[a] = c;
                s.waiting[b] = h;
            }
        }
        // an original member that lost its ticket may win another slot back
        let next: Vec<usize> = s.slots.iter().map(|&id| genome(id)).collect();
        for (a, g) in next.into_iter().enumerate() {
            if g != self.pop.genome(a) {
                self.pop.replace(a, g, 0.0);
            }
        }
    }
}

/// One single-tournament step on `pop`.
pub fn step_single_tournament<R: Rng + ?Sized>(
    pop: &mut Population,
    breeding: &ProductBreeding,
    w: &[f64],
    rule: TournamentRule,
    rng: &mut R,
) -> Result<()> {
    let k = Kernel::new(breeding.clone(), w.to_vec(), KernelConfig::SingleTournament { rule })?;
    step_with(k, pop, rng)
}

/// One inverse-fitness step on `pop`.
pub fn step_inverse_fitness<R: Rng + ?Sized>(
    pop: &mut Population,
    breeding: &ProductBreeding,
    w: &[f64],
    rng: &mut R,
) -> Result<()> {
    let k = Kernel::new(breeding.clone(), w.to_vec(), KernelConfig::InverseFitness)?;
    step_with(k, pop, rng)
}

/// One breed-many step: `m` and `t` come from the given laws.
pub fn step_breed_many<R: Rng + ?Sized>(
    pop: &mut Population,
    breeding: &ProductBreeding,
    w: &[f64],
    m: &CountLaw,
    t: &CountLaw,
    rng: &mut R,
) -> Result<()> {
    let cfg = KernelConfig::BreedMany { m: m.clone(), t: t.clone() };
    let k = Kernel::new(breeding.clone(), w.to_vec(), cfg)?;
    step_with(k, pop, rng)
}

/// One niche step: position `j` is judged by `tables[j]`.
pub fn step_niche<R: Rng + ?Sized>(
    pop: &mut Population,
    breeding: &ProductBreeding,
    tables: &[Vec<f64>],
    rule: TournamentRule,
    rng: &mut R,
) -> Result<()> {
    let cfg = KernelConfig::Niche { rule, tables: tables.to_vec() };
    let k = Kernel::new(breeding.clone(), tables[0].clone(), cfg)?;
    step_with(k, pop, rng)
}

/// One step of an arbitrary kernel.
pub fn step_with<R: Rng + ?Sized>(kernel: Kernel, pop: &mut Population, rng: &mut R) -> Result<()> {
    let p = std::mem::replace(pop, Population::new(pop.space(), Vec::new())?);
    let mut chain = Chain::new(kernel, p)?;
    chain.step(rng);
    *pop = chain.into_population();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breeding::stream_rng;
    use crate::genotype::AlleleSpace;

    fn setup() -> (ProductBreeding, Population) {
        let space = AlleleSpace::new(2, 1).unwrap();
        let b = ProductBreeding::from_alphas(space, &[vec![1.0, 1.0]]).unwrap();
        let pop = Population::new(space, vec![0, 1, 1]).unwrap();
        (b, pop)
    }

    #[test]
    fn size_is_preserved_by_every_kernel() {
        let (b, pop) = setup();
        let w = vec![1.0, 0.5];
        let cfgs = vec![
            KernelConfig::SingleTournament { rule: TournamentRule::Ratio },
            KernelConfig::SingleTournament { rule: TournamentRule::MetropolisMin },
            KernelConfig::InverseFitness,
            KernelConfig::BreedMany {
                m: CountLaw::new(vec![0, 1, 3], vec![0.2, 0.3, 0.5]).unwrap(),
                t: CountLaw::new(vec![0, 2, 5], vec![0.1, 0.4, 0.5]).unwrap(),
            },
            KernelConfig::Niche { rule: TournamentRule::Ratio, tables: vec![w.clone(); 3] },
        ];
        let mut rng = stream_rng(5, 0);
        for cfg in cfgs {
            let mut chain = Chain::new(Kernel::new(b.clone(), w.clone(), cfg).unwrap(), pop.clone()).unwrap();
            for _ in 0..2000 {
                chain.step(&mut rng);
                assert_eq!(chain.population().len(), 3);
                assert_eq!(chain.population().counts().iter().sum::<u32>(), 3);
            }
        }
    }

    #[test]
    fn breed_many_without_tournaments_keeps_population() {
        let (b, pop) = setup();
        let mut p = pop.clone();
        let mut rng = stream_rng(1, 1);
        for _ in 0..100 {
            step_breed_many(&mut p, &b, &[1.0, 0.5], &CountLaw::fixed(3), &CountLaw::fixed(0), &mut rng).unwrap();
        }
        assert_eq!(p, pop);
    }

    #[test]
    fn luck_only_for_simple_kernels() {
        let (b, _) = setup();
        let bm = Kernel::new(b.clone(), vec![1.0, 1.0], KernelConfig::breed_many_default()).unwrap();
        assert!(wrap_with_luck(bm, LuckConfig::symmetric_ln2()).is_err());
        let st = Kernel::new(b, vec![1.0, 1.0], KernelConfig::default()).unwrap();
        assert!(wrap_with_luck(st, LuckConfig::symmetric_ln2()).is_ok());
    }

    #[test]
    fn zero_luck_reproduces_trajectory() {
        let (b, pop) = setup();
        for cfg in [KernelConfig::default(), KernelConfig::InverseFitness] {
            let plain = Kernel::new(b.clone(), vec![1.0, 0.3], cfg).unwrap();
            let lucky = wrap_with_luck(plain.clone(), LuckConfig::new(vec![0.0], vec![1.0]).unwrap()).unwrap();
            let mut c1 = Chain::new(plain, pop.clone()).unwrap();
            let mut c2 = Chain::new(lucky, pop.clone()).unwrap();
            let (mut r1, mut r2) = (stream_rng(3, 0), stream_rng(3, 0));
            for _ in 0..5000 {
                c1.step(&mut r1);
                c2.step(&mut r2);
                assert_eq!(c1.population().genomes(), c2.population().genomes());
            }
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        let (b, pop) = setup();
        assert!(Kernel::new(b.clone(), vec![1.0], KernelConfig::default()).is_err());
        assert!(Kernel::new(b.clone(), vec![1.0, 0.0], KernelConfig::default()).is_err());
        assert!(CountLaw::new(vec![1, 2], vec![0.5, 0.6]).is_err());
        let niche = KernelConfig::Niche { rule: TournamentRule::Ratio, tables: vec![vec![1.0, 1.0]; 2] };
        let k = Kernel::new(b, vec![1.0, 1.0], niche).unwrap();
        assert!(Chain::new(k, pop).is_err());
    }

    #[test]
    fn harmonic_mean_of_ejected_weight() {
        let space = AlleleSpace::new(3, 1).unwrap();
        let b = ProductBreeding::from_alphas(space, &[vec![1.0, 1.0, 1.0]]).unwrap();
        let w = [1.0, 0.5, 0.25];
        let start = Population::new(space, vec![0, 1, 2, 2]).unwrap();
        let kernel = Kernel::new(b.clone(), w.to_vec(), KernelConfig::InverseFitness).unwrap();
        let mut rng = stream_rng(11, 0);
        let reps = 200_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..reps {
            // the child is the first draw of the step, so a cloned stream reveals it
            let child = b.breed_genome(&start, &mut rng.clone()).genome;
            let mut chain = Chain::new(kernel.clone(), start.clone()).unwrap();
            chain.step(&mut rng);
            let before = start.genome_counts();
            let after = chain.population().genome_counts();
            let ejected = (0..3)
                .find(|&g| after[g] + 1 == before[g] + u32::from(g == child))
                .unwrap_or(child);
            let pool: Vec<f64> = start.genomes().iter().chain([&child]).map(|&g| w[g]).collect();
            let hm = pool.len() as f64 / pool.iter().map(|x| 1.0 / x).sum::<f64>();
            let d = w[ejected] - hm;
            sum += d;
            sum2 += d * d;
        }
        let mean = sum / reps as f64;
        let se = ((sum2 / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }
}
