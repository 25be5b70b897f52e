//! Two loci with two alleles each: minima of the limit objective over
//! product measures `(z1, 1−z1) × (z2, 1−z2)`, their Hessians, and the
//! mixture weights `p_i ∝ 1/√det H(a_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which objective is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductRegime {
    /// `−ln⟨w,z⟩ − Σ α ln z`, table holds `w`
    Lambda0,
    /// `⟨φ,z⟩ − Σ α ln z`, table holds `φ`
    LambdaMid,
}

const GRID: usize = 21;
const MARGIN: f64 = 0.02;
const MAX_NEWTON: usize = 200;
const MAX_HALVINGS: usize = 30;
const DEDUP: f64 = 1e-6;
const BOUNDARY: f64 = 1e-9;

/// The objective on `(0,1)²` with analytic derivatives. Tables are
/// row-major: `t[0]=t(1,1), t[1]=t(1,2), t[2]=t(2,1), t[3]=t(2,2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductObjective {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub table: [f64; 4],
    pub regime: ProductRegime,
}

impl ProductObjective {
    pub fn new(alpha: [f64; 2], beta: [f64; 2], table: [f64; 4], regime: ProductRegime) -> Result<Self> {
        if alpha.iter().chain(&beta).any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(invalid("prior pseudo-counts must be positive"));
        }
        match regime {
            ProductRegime::Lambda0 if table.iter().any(|w| !(w.is_finite() && *w > 0.0)) => {
                return Err(invalid("weights must be positive"));
            }
            _ if table.iter().any(|v| !v.is_finite()) => return Err(invalid("table must be finite")),
            _ => {}
        }
        Ok(Self { alpha, beta, table, regime })
    }

    /// `t(1,1) − t(1,2) − t(2,1) + t(2,2)`.
    pub fn interaction(&self) -> f64 {
        let t = &self.table;
        t[0] - t[1] - t[2] + t[3]
    }

    fn mean(&self, z: [f64; 2]) -> f64 {
        let t = &self.table;
        let (z1, z2) = (z[0], z[1]);
        t[0] * z1 * z2 + t[1] * z1 * (1.0 - z2) + t[2] * (1.0 - z1) * z2 + t[3] * (1.0 - z1) * (1.0 - z2)
    }

    /// Partial derivatives of the bilinear mean: `θ^1_1 − θ^1_2` and `θ^2_1 − θ^2_2`.
    fn slopes(&self, z: [f64; 2]) -> [f64; 2] {
        let t = &self.table;
        let (z1, z2) = (z[0], z[1]);
        [
            (t[0] * z2 + t[1] * (1.0 - z2)) - (t[2] * z2 + t[3] * (1.0 - z2)),
            (t[0] * z1 + t[2] * (1.0 - z1)) - (t[1] * z1 + t[3] * (1.0 - z1)),
        ]
    }

    fn prior_term(&self, z: [f64; 2]) -> f64 {
        -self.alpha[0] * z[0].ln() - self.alpha[1] * (1.0 - z[0]).ln() - self.beta[0] * z[1].ln()
            - self.beta[1] * (1.0 - z[1]).ln()
    }

    pub fn value(&self, z: [f64; 2]) -> f64 {
        let m = self.mean(z);
        let fit = match self.regime {
            ProductRegime::Lambda0 => -m.ln(),
            ProductRegime::LambdaMid => m,
        };
        fit + self.prior_term(z)
    }

    pub fn gradient(&self, z: [f64; 2]) -> [f64; 2] {
        let d = self.slopes(z);
        let scale = match self.regime {
            ProductRegime::Lambda0 => -1.0 / self.mean(z),
            ProductRegime::LambdaMid => 1.0,
        };
        [
            scale * d[0] - self.alpha[0] / z[0] + self.alpha[1] / (1.0 - z[0]),
            scale * d[1] - self.beta[0] / z[1] + self.beta[1] / (1.0 - z[1]),
        ]
    }

    pub fn hessian(&self, z: [f64; 2]) -> [[f64; 2]; 2] {
        let p1 = self.alpha[0] / (z[0] * z[0]) + self.alpha[1] / ((1.0 - z[0]) * (1.0 - z[0]));
        let p2 = self.beta[0] / (z[1] * z[1]) + self.beta[1] / ((1.0 - z[1]) * (1.0 - z[1]));
        let star = self.interaction();
        match self.regime {
            ProductRegime::Lambda0 => {
                let m = self.mean(z);
                let d = self.slopes(z);
                let off = (d[0] * d[1] - star * m) / (m * m);
                [[p1 + d[0] * d[0] / (m * m), off], [off, p2 + d[1] * d[1] / (m * m)]]
            }
            ProductRegime::LambdaMid => [[p1, star], [star, p2]],
        }
    }

    /// The sufficient convexity condition: `(α1^⅓+α2^⅓)³(β1^⅓+β2^⅓)³`
    /// against `(w*/min w)²` or `(φ*)²`. Returns `(lhs, rhs)`.
    pub fn certificate(&self) -> (f64, f64) {
        let c = |a: [f64; 2]| (a[0].cbrt() + a[1].cbrt()).powi(3);
        let lhs = c(self.alpha) * c(self.beta);
        let rhs = match self.regime {
            ProductRegime::Lambda0 => {
                let wmin = self.table.iter().cloned().fold(f64::INFINITY, f64::min);
                (self.interaction() / wmin).powi(2)
            }
            ProductRegime::LambdaMid => self.interaction().powi(2),
        };
        (lhs, rhs)
    }
}

fn det(h: &[[f64; 2]; 2]) -> f64 {
    h[0][0] * h[1][1] - h[0][1] * h[1][0]
}

/// Damped Newton from `z`, falling back to steepest descent where the
/// Hessian is not positive definite. Returns the final point.
fn descend(g: &ProductObjective, mut z: [f64; 2]) -> [f64; 2] {
    let inside = |p: [f64; 2]| p.iter().all(|x| *x > 0.0 && *x < 1.0);
    let mut val = g.value(z);
    for _ in 0..MAX_NEWTON {
        let gr = g.gradient(z);
        if gr[0].abs().max(gr[1].abs()) < 1e-13 {
            break;
        }
        let h = g.hessian(z);
        let d = det(&h);
        let step = if h[0][0] > 0.0 && d > 0.0 {
            [-(h[1][1] * gr[0] - h[0][1] * gr[1]) / d, -(h[0][0] * gr[1] - h[1][0] * gr[0]) / d]
        } else {
            [-gr[0], -gr[1]]
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..=MAX_HALVINGS {
            let cand = [z[0] + t * step[0], z[1] + t * step[1]];
            if inside(cand) {
                let v = g.value(cand);
                if v < val {
                    z = cand;
                    val = v;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    polish(g, z)
}

/// Plain Newton steps while the gradient keeps shrinking; the value of `g`
/// stops resolving progress well before the minimizer does.
fn polish(g: &ProductObjective, mut z: [f64; 2]) -> [f64; 2] {
    let norm = |v: [f64; 2]| v[0].abs().max(v[1].abs());
    let mut gn = norm(g.gradient(z));
    for _ in 0..50 {
        let h = g.hessian(z);
        let d = det(&h);
        if !(h[0][0] > 0.0 && d > 0.0) || gn == 0.0 {
            break;
        }
        let gr = g.gradient(z);
        let cand = [
            z[0] - (h[1][1] * gr[0] - h[0][1] * gr[1]) / d,
            z[1] - (h[0][0] * gr[1] - h[1][0] * gr[0]) / d,
        ];
        if !cand.iter().all(|x| *x > 0.0 && *x < 1.0) {
            break;
        }
        let cn = norm(g.gradient(cand));
        if cn >= gn {
            break;
        }
        z = cand;
        gn = cn;
    }
    z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub regime: ProductRegime,
    pub minima: Vec<[f64; 2]>,
    pub hessians: Vec<[[f64; 2]; 2]>,
    pub dets: Vec<f64>,
    /// `p_i ∝ 1/√det H(a_i)`; withheld when any Hessian is not positive definite
    pub weights: Option<Vec<f64>>,
    pub convexity_certified: bool,
    pub certificate_lhs: f64,
    pub certificate_rhs: f64,
    /// multistart runs that ended on the boundary or at a non-minimum
    pub rejected_starts: usize,
    pub warnings: Vec<String>,
}

/// Finds every interior minimum of the objective from a 21×21 grid of
/// starts on `[0.02, 0.98]²`.
pub fn product_limit_k2l2(
    alpha: [f64; 2],
    beta: [f64; 2],
    table: [f64; 4],
    regime: ProductRegime,
) -> Result<HessianReport> {
    let g = ProductObjective::new(alpha, beta, table, regime)?;
    let (lhs, rhs) = g.certificate();
    let mut found: Vec<[f64; 2]> = Vec::new();
    let mut rejected = 0;
    let mut warnings = Vec::new();
    for i in 0..GRID {
        for j in 0..GRID {
            let s = |k: usize| MARGIN + (1.0 - 2.0 * MARGIN) * k as f64 / (GRID - 1) as f64;
            let z = descend(&g, [s(i), s(j)]);
            let gr = g.gradient(z);
            let near_edge = z.iter().any(|x| *x < BOUNDARY || *x > 1.0 - BOUNDARY);
            let stationary = gr[0].abs().max(gr[1].abs()) < 1e-8;
            let h = g.hessian(z);
            if near_edge || !stationary || det(&h) < 0.0 {
                rejected += 1;
                continue;
            }
            found.push(z);
        }
    }
    if rejected > 0 {
        warnings.push(format!("{rejected} starts ended on the boundary, at a saddle, or off a stationary point"));
    }
    found.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut minima: Vec<[f64; 2]> = Vec::new();
    for z in found {
        if !minima.iter().any(|m| (m[0] - z[0]).abs().max((m[1] - z[1]).abs()) < DEDUP) {
            minima.push(z);
        }
    }
    let hessians: Vec<_> = minima.iter().map(|&z| g.hessian(z)).collect();
    let dets: Vec<f64> = hessians.iter().map(det).collect();
    let weights = if dets.iter().all(|d| *d > 0.0) && !minima.is_empty() {
        let raw: Vec<f64> = dets.iter().map(|d| 1.0 / d.sqrt()).collect();
        let s: f64 = raw.iter().sum();
        Some(raw.into_iter().map(|x| x / s).collect())
    } else {
        warnings.push("a Hessian at a minimum is singular; mixture weights withheld".into());
        None
    };
    Ok(HessianReport {
        regime,
        minima,
        hessians,
        dets,
        weights,
        convexity_certified: lhs > rhs,
        certificate_lhs: lhs,
        certificate_rhs: rhs,
        rejected_starts: rejected,
        warnings,
    })
}
