//! Frequency histograms on `[0, 1]`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyHistogram {
    pub masses: Vec<f64>,
    pub n: usize,
    pub locus: usize,
    pub allele: usize,
    pub sample_count: u64,
}

/// Bin of a frequency in `[0, 1]`; 1 falls into the last bin.
pub fn bin_of(f: f64, bins: usize) -> usize {
    ((f * bins as f64) as usize).min(bins - 1)
}

/// Raw bin counts, to be pooled before normalizing.
#[derive(Debug, Clone, PartialEq)]
pub struct BinCounts {
    pub counts: Vec<u64>,
}

impl BinCounts {
    pub fn new(bins: usize) -> Self {
        Self { counts: vec![0; bins] }
    }

    pub fn add(&mut self, f: f64) {
        let b = bin_of(f, self.counts.len());
        self.counts[b] += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Normalized histogram of a stream of frequencies.
pub fn build_histogram<I: IntoIterator<Item = f64>>(stream: I, bins: usize, n: usize, locus: usize, allele: usize) -> CliResult<FrequencyHistogram> {
    if bins < 2 {
        return Err(CliError::Config("bins must be >= 2".into()));
    }
    let mut c = BinCounts::new(bins);
    stream.into_iter().for_each(|f| c.add(f));
    FrequencyHistogram::from_counts(&c, n, locus, allele)
}

impl FrequencyHistogram {
    pub fn from_counts(c: &BinCounts, n: usize, locus: usize, allele: usize) -> CliResult<Self> {
        let total = c.total();
        if total == 0 {
            return Err(CliError::Internal("empty sample stream".into()));
        }
        let masses = c.counts.iter().map(|&k| k as f64 / total as f64).collect();
        Ok(Self { masses, n, locus, allele, sample_count: total })
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.bins() as f64
    }

    /// Mean frequency from bin centers.
    pub fn mean(&self) -> f64 {
        self.masses.iter().enumerate().map(|(i, m)| m * self.center(i)).sum()
    }

    /// `bin_left,bin_right,mass`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_left,bin_right,mass")?;
        let b = self.bins() as f64;
        for (i, m) in self.masses.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", i as f64 / b, (i + 1) as f64 / b, m)?;
        }
        Ok(())
    }

    /// Reads back a histogram CSV. Bins must be the uniform partition.
    pub fn read_csv<R: BufRead>(input: R) -> CliResult<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "bin_left,bin_right,mass" {
            return Err(CliError::Config(format!("unexpected histogram header {header:?}")));
        }
        let mut masses = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| CliError::Config(format!("{s:?}: {e}")));
            if cols.len() != 3 {
                return Err(CliError::Config(format!("bad histogram row {line:?}")));
            }
            masses.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
        }
        let b = masses.len();
        if b < 2 {
            return Err(CliError::Config("histogram needs at least two bins".into()));
        }
        for (i, (lo, hi, _)) in masses.iter().enumerate() {
            if (lo - i as f64 / b as f64).abs() > 1e-12 || (hi - (i + 1) as f64 / b as f64).abs() > 1e-12 {
                return Err(CliError::Config("histogram bins are not a uniform partition of [0,1]".into()));
            }
        }
        let masses: Vec<f64> = masses.into_iter().map(|m| m.2).collect();
        let s: f64 = masses.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(CliError::Config(format!("histogram masses sum to {s}")));
        }
        Ok(Self { masses, n: 0, locus: 0, allele: 0, sample_count: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_half_lands_in_bin_five() {
        let h = build_histogram(std::iter::repeat(0.5).take(10), 10, 2, 0, 0).unwrap();
        assert_eq!(h.masses[5], 1.0);
    }

    #[test]
    fn alternating_ends() {
        let h = build_histogram((0..100).map(|i| (i % 2) as f64), 10, 1, 0, 0).unwrap();
        assert_eq!((h.masses[0], h.masses[9]), (0.5, 0.5));
        assert!((h.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let h = build_histogram([0.1, 0.2, 0.25, 0.9], 4, 4, 0, 0).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let back = FrequencyHistogram::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.masses, h.masses);
        assert!(build_histogram(std::iter::empty(), 4, 1, 0, 0).is_err());
    }
}
