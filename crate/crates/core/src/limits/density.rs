//! The reweighted prior `exp(−⟨φ,q⟩) Dir(α)(dq) / Z`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature::tanh_sinh;

/// Relative accuracy requested from the quadrature for `Z`.
pub const Z_REL_TOL: f64 = 1e-8;
/// Importance-sampling runs below this effective sample size are refused.
pub const MIN_ESS: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Normalization {
    Quadrature { error: f64 },
    ImportanceSampling { samples: usize, ess: f64 },
}

/// Normalized density of the limit law, evaluated on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitDensity {
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    /// `ln Z`, with `Z = E_{Dir(α)} exp(−⟨φ,q⟩)`
    pub log_z: f64,
    pub normalization: Normalization,
}

fn ln_dirichlet_norm(alpha: &[f64]) -> f64 {
    ln_gamma(alpha.iter().sum()) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
}

fn check(alpha: &[f64], phi: &[f64]) -> Result<()> {
    if alpha.len() < 2 || alpha.len() != phi.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), got: phi.len() });
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) || phi.iter().any(|p| !p.is_finite()) {
        return Err(invalid("need positive finite α and finite φ"));
    }
    Ok(())
}

/// Two alleles: `Z` by quadrature in the first coordinate.
pub fn limit_density_lambda1(alpha: &[f64], phi: &[f64]) -> Result<LimitDensity> {
    check(alpha, phi)?;
    if alpha.len() != 2 {
        return Err(Error::Unsupported(
            "quadrature needs two alleles; use limit_density_sampled".into(),
        ));
    }
    let (a1, a2) = (alpha[0], alpha[1]);
    let lnorm = ln_dirichlet_norm(alpha);
    // shift by min φ so the integrand stays O(1)
    let shift = phi[0].min(phi[1]);
    let integrand = |_x: f64, d0: f64, d1: f64| {
        // d0 = q(1), d1 = 1 - q(1) = q(2)
        (lnorm + (a1 - 1.0) * d0.ln() + (a2 - 1.0) * d1.ln() - (phi[0] - shift) * d0 - (phi[1] - shift) * d1).exp()
    };
    let q = tanh_sinh(integrand, 0.0, 1.0, Z_REL_TOL * 1e-2)?;
    if q.error > Z_REL_TOL * q.value {
        return Err(Error::Quadrature { estimate: q.value, error: q.error });
    }
    Ok(LimitDensity {
        alpha: alpha.to_vec(),
        phi: phi.to_vec(),
        log_z: q.value.ln() - shift,
        normalization: Normalization::Quadrature { error: q.error / q.value },
    })
}

/// Any number of alleles: `Z` by importance sampling against `Dir(α)`.
/// Refuses when the effective sample size is below [`MIN_ESS`].
pub fn limit_density_sampled<R: Rng + ?Sized>(
    alpha: &[f64],
    phi: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<LimitDensity> {
    check(alpha, phi)?;
    let gammas = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| invalid(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let shift = phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut s, mut s2) = (0.0, 0.0);
    let mut g = vec![0.0; alpha.len()];
    for _ in 0..samples {
        for (x, d) in g.iter_mut().zip(&gammas) {
            *x = d.sample(rng);
        }
        let tot: f64 = g.iter().sum();
        let e: f64 = g.iter().zip(phi).map(|(x, p)| x / tot * (p - shift)).sum();
        let w = (-e).exp();
        s += w;
        s2 += w * w;
    }
    let ess = s * s / s2;
    if !(ess >= MIN_ESS) {
        return Err(Error::Unsupported(format!("importance sampling effective sample size {ess:.0} < {MIN_ESS}")));
    }
    Ok(LimitDensity {
        alpha: alpha.to_vec(),
        phi: phi.to_vec(),
        log_z: (s / samples as f64).ln() - shift,
        normalization: Normalization::ImportanceSampling { samples, ess },
    })
}

impl LimitDensity {
    /// The prior itself (`φ ≡ 0`, `Z = 1`).
    pub fn prior(alpha: &[f64]) -> Result<Self> {
        check(alpha, &vec![0.0; alpha.len()])?;
        Ok(Self {
            alpha: alpha.to_vec(),
            phi: vec![0.0; alpha.len()],
            log_z: 0.0,
            normalization: Normalization::Quadrature { error: 0.0 },
        })
    }

    /// Log-density at `q` with respect to Lebesgue measure on the first
    /// `K−1` coordinates.
    pub fn ln_pdf(&self, q: &[f64]) -> f64 {
        let e: f64 = self.phi.iter().zip(q).map(|(p, x)| p * x).sum();
        ln_dirichlet_norm(&self.alpha) + self.alpha.iter().zip(q).map(|(a, x)| (a - 1.0) * x.ln()).sum::<f64>()
            - e
            - self.log_z
    }

    pub fn pdf(&self, q: &[f64]) -> f64 {
        self.ln_pdf(q).exp()
    }

    /// Masses of `bins` equal bins of the frequency of allele `k`. The
    /// marginal of allele `k` is tractable for two alleles, or for any number
    /// when `φ` is constant (a Beta marginal).
    pub fn binned_marginal(&self, k: usize, bins: usize) -> Result<Vec<f64>> {
        if bins < 1 || k >= self.alpha.len() {
            return Err(invalid("bad bin count or allele"));
        }
        let flat = self.phi.iter().all(|p| *p == self.phi[0]);
        let (a, b, slope) = if self.alpha.len() == 2 {
            (self.alpha[k], self.alpha[1 - k], self.phi[k] - self.phi[1 - k])
        } else if flat {
            (self.alpha[k], self.alpha.iter().sum::<f64>() - self.alpha[k], 0.0)
        } else {
            return Err(Error::Unsupported("binned marginal of a tilted density with more than two alleles".into()));
        };
        // density of x = q(k): x^{a-1} (1-x)^{b-1} e^{-slope x} / norm
        let lnorm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
        let z = tanh_sinh(
            |_, d0, d1| (lnorm + (a - 1.0) * d0.ln() + (b - 1.0) * d1.ln() - slope.max(0.0) * d0 + slope.min(0.0) * d1).exp(),
            0.0,
            1.0,
            1e-12,
        )?
        .value;
        let mut masses = Vec::with_capacity(bins);
        for i in 0..bins {
            let (lo, hi) = (i as f64 / bins as f64, (i + 1) as f64 / bins as f64);
            let m = tanh_sinh(
                |x, da, db| {
                    // distances to 0 and 1 computed from whichever end is near
                    let x0 = if i == 0 { da } else { x };
                    let x1 = if i + 1 == bins { db } else { 1.0 - x };
                    (lnorm + (a - 1.0) * x0.ln() + (b - 1.0) * x1.ln() - slope.max(0.0) * x0 + slope.min(0.0) * x1).exp()
                },
                lo,
                hi,
                1e-10,
            )?;
            masses.push(m.value / z);
        }
        Ok(masses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breeding::stream_rng;

    #[test]
    fn flat_fitness_is_the_prior() {
        let d = limit_density_lambda1(&[0.3, 0.7], &[0.0, 0.0]).unwrap();
        assert!(d.log_z.abs() < 1e-9);
        assert!((d.pdf(&[0.4, 0.6]) - LimitDensity::prior(&[0.3, 0.7]).unwrap().pdf(&[0.4, 0.6])).abs() < 1e-8);
    }

    #[test]
    fn uniform_prior_closed_form() {
        // ∫_0^1 e^{-(1-x)} dx = 1 - e^{-1}
        let d = limit_density_lambda1(&[1.0, 1.0], &[0.0, 1.0]).unwrap();
        assert!((d.log_z.exp() - (1.0 - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn binned_masses_sum_to_one() {
        let d = limit_density_lambda1(&[0.3, 0.7], &[0.0, 6f64.ln()]).unwrap();
        for k in 0..2 {
            let m = d.binned_marginal(k, 200).unwrap();
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
        // bins of allele 2 mirror bins of allele 1
        let (m0, m1) = (d.binned_marginal(0, 10).unwrap(), d.binned_marginal(1, 10).unwrap());
        for i in 0..10 {
            assert!((m0[i] - m1[9 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_normalization_agrees() {
        let d = limit_density_lambda1(&[0.3, 0.7], &[0.0, 6f64.ln()]).unwrap();
        let s = limit_density_sampled(&[0.3, 0.7], &[0.0, 6f64.ln()], 200_000, &mut stream_rng(2, 0)).unwrap();
        assert!((d.log_z - s.log_z).abs() < 0.01);
    }

    #[test]
    fn refuses_low_ess() {
        let r = limit_density_sampled(&[0.05, 0.05, 0.05], &[0.0, 60.0, 60.0], 2000, &mut stream_rng(1, 0));
        assert!(matches!(r, Err(Error::Unsupported(_))));
        assert!(limit_density_lambda1(&[1.0, 1.0, 1.0], &[0.0; 3]).is_err());
    }
}
