use serde::{Deserialize, Serialize};

use super::density::{limit_density_lambda1, LimitDensity};
use super::fixed_point::{solve_qstar_lambda0, solve_qstar_lambda_mid};
use super::product::{product_limit_k2l2, HessianReport, ProductRegime};
use crate::error::{invalid, Error, Result};
use crate::genotype::{r_map, AlleleSpace, SimplexPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Lambda0,
    LambdaMid,
    Lambda1,
    LambdaGt1,
}

impl Regime {
    pub fn of(lambda: f64) -> Result<Self> {
        match lambda {
            l if !(l >= 0.0) || !l.is_finite() => Err(invalid(format!("lambda must be finite and >= 0, got {l}"))),
            l if l == 0.0 => Ok(Self::Lambda0),
            l if l < 1.0 => Ok(Self::LambdaMid),
            l if l == 1.0 => Ok(Self::Lambda1),
            _ => Ok(Self::LambdaGt1),
        }
    }
}

/// Whether the urn prior is held fixed or scaled as `n^{1−λ}α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScaling {
    Fixed,
    #[default]
    Scaled,
}

/// One atom of a mixture of product measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    /// allele frequencies per locus
    pub loci: Vec<Vec<f64>>,
}

/// Large-population limit of the stationary law.
///
/// `q_star` and `r_star` are over whole genomes. The observed allele
/// frequencies concentrate at `r_star` when it is present, else at `q_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPrediction {
    pub regime: Regime,
    pub prior_scaling: PriorScaling,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_star: Option<SimplexPoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r_star: Option<SimplexPoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub density: Option<LimitDensity>,
    /// per-locus Dirichlet parameters when the limit is the prior itself
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prior: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mixture: Option<Vec<MixtureComponent>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub product: Option<HessianReport>,
    /// set when the limit rests on the unproved mixture heuristic
    #[serde(default)]
    pub conjectural: bool,
}

/// What a limit says about one allele frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalPrediction {
    Point(f64),
    /// `(weight, location)` atoms
    Mixture(Vec<(f64, f64)>),
    /// masses of equal bins on `[0,1]`
    Masses(Vec<f64>),
}

/// Inputs to [`predict_limit`].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitProblem {
    pub space: AlleleSpace,
    /// base pseudo-counts, one vector per locus
    pub alphas: Vec<Vec<f64>>,
    /// fitness over genomes
    pub phi: Vec<f64>,
    pub lambda: f64,
    pub scaling: PriorScaling,
}

impl LimitPrediction {
    fn empty(regime: Regime, p: &LimitProblem) -> Self {
        Self {
            regime,
            prior_scaling: p.scaling,
            lambda: p.lambda,
            q_star: None,
            r_star: None,
            theta: None,
            density: None,
            prior: None,
            mixture: None,
            product: None,
            conjectural: false,
        }
    }

    /// Limit of the frequency of `allele` at `locus`.
    pub fn marginal(&self, space: AlleleSpace, locus: usize, allele: usize, bins: usize) -> Result<MarginalPrediction> {
        if locus >= space.loci() || allele >= space.alleles() {
            return Err(invalid("locus or allele out of range"));
        }
        let of_genomes = |m: &SimplexPoint| -> f64 {
            (0..space.genome_count()).filter(|&g| space.allele(g, locus) == allele).map(|g| m[g]).sum()
        };
        if let Some(r) = self.r_star.as_ref().or(self.q_star.as_ref()) {
            return Ok(MarginalPrediction::Point(of_genomes(r)));
        }
        if let Some(mix) = &self.mixture {
            return Ok(MarginalPrediction::Mixture(mix.iter().map(|c| (c.weight, c.loci[locus][allele])).collect()));
        }
        if let Some(d) = &self.density {
            if space.loci() != 1 {
                return Err(Error::Unsupported("density limits for several loci".into()));
            }
            return Ok(MarginalPrediction::Masses(d.binned_marginal(allele, bins)?));
        }
        if let Some(prior) = &self.prior {
            return Ok(MarginalPrediction::Masses(LimitDensity::prior(&prior[locus])?.binned_marginal(allele, bins)?));
        }
        Err(invalid("prediction carries no limit"))
    }
}

fn unique_minimizer(phi: &[f64]) -> Result<usize> {
    let min = phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let at: Vec<usize> = (0..phi.len()).filter(|&g| phi[g] == min).collect();
    if at.len() == 1 {
        Ok(at[0])
    } else {
        Err(Error::NonUniqueMinimizer(at))
    }
}

/// Limit law for the given regime and prior scaling.
pub fn predict_limit(p: &LimitProblem) -> Result<LimitPrediction> {
    let space = p.space;
    if p.alphas.len() != space.loci() {
        return Err(Error::DimensionMismatch { expected: space.loci(), got: p.alphas.len() });
    }
    if p.phi.len() != space.genome_count() {
        return Err(Error::DimensionMismatch { expected: space.genome_count(), got: p.phi.len() });
    }
    let regime = Regime::of(p.lambda)?;
    let mut out = LimitPrediction::empty(regime, p);
    match (p.scaling, regime) {
        (PriorScaling::Scaled, Regime::LambdaGt1) => {
            return Err(invalid("a scaled prior needs lambda in [0, 1]"));
        }
        (_, Regime::LambdaGt1) => {
            out.prior = Some(p.alphas.clone());
        }
        (_, Regime::Lambda1) => {
            if space.loci() != 1 {
                return Err(Error::Unsupported("lambda = 1 limit for several loci".into()));
            }
            out.density = Some(limit_density_lambda1(&p.alphas[0], &p.phi)?);
        }
        (PriorScaling::Fixed, _) => {
            let g = unique_minimizer(&p.phi)?;
            let q = SimplexPoint::vertex(space.genome_count(), g);
            out.theta = Some(match regime {
                Regime::Lambda0 => (-p.phi[g]).exp(),
                _ => p.phi[g],
            });
            if regime == Regime::Lambda0 {
                out.r_star = Some(q.clone());
            }
            out.q_star = Some(q);
        }
        (PriorScaling::Scaled, _) if space.loci() == 1 => {
            if regime == Regime::Lambda0 {
                let w: Vec<f64> = p.phi.iter().map(|x| (-x).exp()).collect();
                let (fp, r) = solve_qstar_lambda0(&p.alphas[0], &w)?;
                out.q_star = Some(fp.q);
                out.theta = Some(fp.theta);
                out.r_star = Some(r);
            } else {
                let fp = solve_qstar_lambda_mid(&p.alphas[0], &p.phi)?;
                out.q_star = Some(fp.q);
                out.theta = Some(fp.theta);
            }
        }
        (PriorScaling::Scaled, _) if space.loci() == 2 && space.alleles() == 2 => {
            product_prediction(p, regime, &mut out)?;
        }
        (PriorScaling::Scaled, _) => {
            return Err(Error::Unsupported(format!(
                "product-prior limits for K={}, L={}; only K=L=2 is analyzed",
                space.alleles(),
                space.loci()
            )));
        }
    }
    Ok(out)
}

fn product_prediction(p: &LimitProblem, regime: Regime, out: &mut LimitPrediction) -> Result<()> {
    let pair = |v: &Vec<f64>| [v[0], v[1]];
    let (a, b) = (pair(&p.alphas[0]), pair(&p.alphas[1]));
    let w: Vec<f64> = p.phi.iter().map(|x| (-x).exp()).collect();
    let (table, preg) = match regime {
        Regime::Lambda0 => ([w[0], w[1], w[2], w[3]], ProductRegime::Lambda0),
        _ => ([p.phi[0], p.phi[1], p.phi[2], p.phi[3]], ProductRegime::LambdaMid),
    };
    let report = product_limit_k2l2(a, b, table, preg)?;
    let genome_measure = |z: [f64; 2]| -> Result<SimplexPoint> {
        SimplexPoint::new(vec![z[0] * z[1], z[0] * (1.0 - z[1]), (1.0 - z[0]) * z[1], (1.0 - z[0]) * (1.0 - z[1])])
    };
    match report.minima.len() {
        0 => return Err(Error::NonConvergence { iterations: 0, residual: f64::NAN }),
        1 => {
            let q = genome_measure(report.minima[0])?;
            if regime == Regime::Lambda0 {
                out.theta = Some(q.dot(&w));
                out.r_star = Some(r_map(&q, &w)?);
            } else {
                out.theta = Some(q.dot(&p.phi));
            }
            out.q_star = Some(q);
        }
        _ => {
            let weights = report
                .weights
                .clone()
                .ok_or_else(|| Error::Unsupported("mixture weights withheld: singular Hessian".into()))?;
            let mut comps = Vec::new();
            for (z, wt) in report.minima.iter().zip(weights) {
                let loci = if regime == Regime::Lambda0 {
                    // observed frequencies follow the r-image of each atom
                    let r = r_map(&genome_measure(*z)?, &w)?;
                    vec![vec![r[0] + r[1], r[2] + r[3]], vec![r[0] + r[2], r[1] + r[3]]]
                } else {
                    vec![vec![z[0], 1.0 - z[0]], vec![z[1], 1.0 - z[1]]]
                };
                comps.push(MixtureComponent { weight: wt, loci });
            }
            out.mixture = Some(comps);
            out.conjectural = true;
        }
    }
    out.product = Some(report);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2(phi: [f64; 2], lambda: f64, scaling: PriorScaling) -> LimitProblem {
        LimitProblem {
            space: AlleleSpace::new(2, 1).unwrap(),
            alphas: vec![vec![0.3, 0.7]],
            phi: phi.to_vec(),
            lambda,
            scaling,
        }
    }

    #[test]
    fn fixed_prior_vertex() {
        let p = predict_limit(&k2([0.0, 6f64.ln()], 0.5, PriorScaling::Fixed)).unwrap();
        assert_eq!(p.q_star.unwrap().as_slice(), &[1.0, 0.0]);
        let e = predict_limit(&k2([1.0, 1.0], 0.5, PriorScaling::Fixed));
        assert!(matches!(e, Err(Error::NonUniqueMinimizer(_))));
    }

    #[test]
    fn scaled_lambda0_observes_r() {
        let p = predict_limit(&k2([0.0, 6f64.ln()], 0.0, PriorScaling::Scaled)).unwrap();
        let m = p.marginal(AlleleSpace::new(2, 1).unwrap(), 0, 0, 10).unwrap();
        match m {
            MarginalPrediction::Point(x) => assert!((x - 0.9).abs() < 1e-12),
            _ => panic!("expected a point"),
        }
    }

    #[test]
    fn large_lambda_is_prior() {
        let p = predict_limit(&k2([0.0, 6f64.ln()], 2.0, PriorScaling::Fixed)).unwrap();
        assert_eq!(p.prior.as_ref().unwrap()[0], vec![0.3, 0.7]);
        let MarginalPrediction::Masses(m) = p.marginal(AlleleSpace::new(2, 1).unwrap(), 0, 0, 50).unwrap() else {
            panic!()
        };
        let mean: f64 = m.iter().enumerate().map(|(i, x)| x * (i as f64 + 0.5) / 50.0).sum();
        assert!((mean - 0.3).abs() < 0.01);
        assert!(predict_limit(&k2([0.0, 1.0], 2.0, PriorScaling::Scaled)).is_err());
    }

    #[test]
    fn fields_follow_the_regime() {
        let p = predict_limit(&k2([0.0, 1.0], 0.5, PriorScaling::Scaled)).unwrap();
        assert!(p.q_star.is_some() && p.theta.is_some() && p.r_star.is_none() && p.density.is_none());
        let p = predict_limit(&k2([0.0, 1.0], 1.0, PriorScaling::Scaled)).unwrap();
        assert!(p.q_star.is_none() && p.density.is_some());
    }

    #[test]
    fn bimodal_product_is_a_mixture() {
        let p = predict_limit(&LimitProblem {
            space: AlleleSpace::new(2, 2).unwrap(),
            alphas: vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            phi: vec![4.0, 2.0, 2.0, 4.0],
            lambda: 0.5,
            scaling: PriorScaling::Scaled,
        })
        .unwrap();
        assert!(p.conjectural);
        let mix = p.mixture.unwrap();
        assert_eq!(mix.len(), 2);
        assert!((mix[0].weight - 0.5).abs() < 1e-9);
    }
}
