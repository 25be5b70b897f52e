//! Exact one-step kernels on ordered populations.

use crate::error::{invalid, Error, Result};
use crate::kernels::{CountLaw, Kernel, KernelConfig, TournamentRule};

use super::OrderedStates;

/// Dense row-stochastic matrix over an enumerated state space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn zeros(size: usize) -> Self {
        Self { size, entries: vec![0.0; size * size] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != size) {
            return Err(Error::DimensionMismatch { expected: size, got: r.len() });
        }
        let t = Self { size, entries: rows.concat() };
        t.validate()?;
        Ok(t)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    fn add(&mut self, i: usize, j: usize, p: f64) {
        self.entries[i * self.size + j] += p;
    }

    /// Rows are nonnegative and sum to one within 1e-12.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.size {
            let r = self.row(i);
            let s: f64 = r.iter().sum();
            if r.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("row {i} is not stochastic (sum {s})")));
            }
        }
        Ok(())
    }

    /// `v T`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (o, t) in out.iter_mut().zip(self.row(i)) {
                *o += vi * t;
            }
        }
        out
    }
}

/// Exact transition matrix of `kernel` on ordered populations of size `n`.
///
/// Breed-many is supported when every value of both laws is at most 2; the
/// offspring sequences and all tournament orderings are enumerated.
pub fn full_transition_matrix(kernel: &Kernel, n: usize) -> Result<(OrderedStates, TransitionMatrix)> {
    if kernel.luck().is_some() {
        return Err(Error::Unsupported("exact matrices for luck-wrapped kernels".into()));
    }
    let breeding = kernel.breeding();
    let states = OrderedStates::new(breeding.space(), n)?;
    let g = breeding.space().genome_count();
    let w = kernel.weights();
    if let KernelConfig::Niche { tables, .. } = kernel.config() {
        if tables.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: tables.len() });
        }
    }
    if let KernelConfig::BreedMany { m, t } = kernel.config() {
        if m.values.iter().chain(&t.values).any(|&v| v > 2) {
            return Err(Error::Unsupported("exact breed-many matrix beyond m, t <= 2".into()));
        }
    }
    let mut mat = TransitionMatrix::zeros(states.len());
    for s in 0..states.len() {
        let x = states.decode(s);
        let counts = crate::oracle::locus_counts(breeding.space(), &states.genome_counts(&x));
        let child_probs: Vec<f64> = (0..g).map(|y| breeding.conditional_prob(&counts, n as u32, y)).collect();
        let mut moved = 0.0;
        let mut to = |dest: &[usize], p: f64, mat: &mut TransitionMatrix| {
            let d = states.encode(dest);
            if d != s {
                mat.add(s, d, p);
                moved += p;
            }
        };
        match kernel.config() {
            KernelConfig::SingleTournament { rule } => {
                tournament_row(&x, &child_probs, |_| w, *rule, &mut |d, p| to(d, p, &mut mat));
            }
            KernelConfig::Niche { rule, tables } => {
                tournament_row(&x, &child_probs, |i| &tables[i], *rule, &mut |d, p| to(d, p, &mut mat));
            }
            KernelConfig::InverseFitness => {
                for (y, py) in child_probs.iter().enumerate() {
                    let total: f64 = x.iter().map(|&xi| 1.0 / w[xi]).sum::<f64>() + 1.0 / w[y];
                    for j in 0..n {
                        let mut dest = x.clone();
                        dest[j] = y;
                        to(&dest, py * (1.0 / w[x[j]]) / total, &mut mat);
                    }
                }
            }
            KernelConfig::BreedMany { m, t } => {
                breed_many_row(kernel, &x, m, t, &mut |d, p| to(d, p, &mut mat));
            }
        }
        mat.add(s, s, 1.0 - moved);
    }
    Ok((states, mat))
}

fn tournament_row<'a>(
    x: &[usize],
    child_probs: &[f64],
    table: impl Fn(usize) -> &'a [f64],
    rule: TournamentRule,
    emit: &mut dyn FnMut(&[usize], f64),
) {
    let n = x.len() as f64;
    for (y, py) in child_probs.iter().enumerate() {
        for i in 0..x.len() {
            let w = table(i);
            let mut dest = x.to_vec();
            dest[i] = y;
            emit(&dest, py / n * rule.win_prob(w[y], w[x[i]]));
        }
    }
}

fn breed_many_row(kernel: &Kernel, x: &[usize], m_law: &CountLaw, t_law: &CountLaw, emit: &mut dyn FnMut(&[usize], f64)) {
    let breeding = kernel.breeding();
    let space = breeding.space();
    let g = space.genome_count();
    let n = x.len();
    for (&m, &pm) in m_law.values.iter().zip(&m_law.probs) {
        for (&t, &pt) in t_law.values.iter().zip(&t_law.probs) {
            let p = pm * pt;
            if p == 0.0 {
                continue;
            }
            if m == 0 || t == 0 {
                emit(x, p);
                continue;
            }
            let m = m as usize;
            // every offspring sequence, bred sequentially
            let mut seq = vec![0usize; m];
            for code in 0..g.pow(m as u32) {
                let mut c = code;
                for s in seq.iter_mut().rev() {
                    *s = c % g;
                    c /= g;
                }
                let mut pool = x.to_vec();
                let mut pseq = 1.0;
                for &y in &seq {
                    let gc: Vec<u32> = (0..g).map(|k| pool.iter().filter(|&&v| v == k).count() as u32).collect();
                    let lc = crate::oracle::locus_counts(space, &gc);
                    pseq *= breeding.conditional_prob(&lc, pool.len() as u32, y);
                    pool.push(y);
                }
                let slots: Vec<usize> = (0..n).collect();
                let waiting: Vec<usize> = (n..n + m).collect();
                tickets(kernel.weights(), &pool, slots, waiting, t as usize, p * pseq, emit);
            }
        }
    }
}

fn tickets(
    w: &[f64],
    pool: &[usize],
    slots: Vec<usize>,
    waiting: Vec<usize>,
    left: usize,
    p: f64,
    emit: &mut dyn FnMut(&[usize], f64),
) {
    if left == 0 {
        let dest: Vec<usize> = slots.iter().map(|&id| pool[id]).collect();
        emit(&dest, p);
        return;
    }
    let pick = p / (slots.len() * waiting.len()) as f64;
    for a in 0..slots.len() {
        for b in 0..waiting.len() {
            let (wh, wc) = (w[pool[slots[a]]], w[pool[waiting[b]]]);
            let keep = wh / (wh + wc);
            tickets(w, pool, slots.clone(), waiting.clone(), left - 1, pick * keep, emit);
            let (mut s2, mut w2) = (slots.clone(), waiting.clone());
            std::mem::swap(&mut s2[a], &mut w2[b]);
            tickets(w, pool, s2, w2, left - 1, pick * (1.0 - keep), emit);
        }
    }
}

/// Worst detailed-balance violation and the pair where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    pub max_violation: f64,
    pub argmax: (usize, usize),
}

/// `max |π(x) T(x,y) − π(y) T(y,x)|` over all ordered pairs.
pub fn check_detailed_balance(pi: &[f64], t: &TransitionMatrix) -> Result<BalanceReport> {
    if pi.len() != t.size() {
        return Err(Error::DimensionMismatch { expected: t.size(), got: pi.len() });
    }
    let mut rep = BalanceReport { max_violation: 0.0, argmax: (0, 0) };
    for i in 0..pi.len() {
        for j in i + 1..pi.len() {
            let v = (pi[i] * t.get(i, j) - pi[j] * t.get(j, i)).abs();
            if v > rep.max_violation {
                rep = BalanceReport { max_violation: v, argmax: (i, j) };
            }
        }
    }
    Ok(rep)
}

/// `max |(πT)(y) − π(y)|`.
pub fn stationarity_residual(pi: &[f64], t: &TransitionMatrix) -> Result<f64> {
    if pi.len() != t.size() {
        return Err(Error::DimensionMismatch { expected: t.size(), got: pi.len() });
    }
    Ok(t.left_mul(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Iterates `v ← vT` from the uniform vector until `‖vT − v‖₁ < tol`.
pub fn power_iteration(t: &TransitionMatrix, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let mut v = vec![1.0 / t.size() as f64; t.size()];
    let mut resid = f64::INFINITY;
    for _ in 0..max_iters {
        let next = t.left_mul(&v);
        resid = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        let s: f64 = next.iter().sum();
        v = next.into_iter().map(|x| x / s).collect();
        if resid < tol {
            return Ok(v);
        }
    }
    Err(Error::NonConvergence { iterations: max_iters, residual: resid })
}
