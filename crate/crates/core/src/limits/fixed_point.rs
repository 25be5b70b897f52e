//! Scalar fixed-point problems for the concentrated limits.
//!
//! With concentration `nα` and fixed weights the limit maximizes
//! `ln⟨w,q⟩ + Σ α_k ln q(k)`, whose stationary point is
//! `q(k) = α_k / ((1+|α|) − w(k)/θ)` with `θ = ⟨w,q⟩`. With concentration
//! `n^{1−λ}α`, `0 < λ < 1`, it maximizes `−⟨φ,q⟩ + Σ α_k ln q(k)`, giving
//! `q(k) = α_k / (φ(k) + |α| − θ)` with `θ = ⟨φ,q⟩`. Both reduce to one
//! monotone equation in θ.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::genotype::{r_map, SimplexPoint};

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub q: SimplexPoint,
    pub theta: f64,
    /// `|Σ q(k) − 1|` before any renormalization
    pub sum_residual: f64,
    /// `|θ − ⟨·, q⟩|`
    pub theta_residual: f64,
    pub iterations: usize,
}

fn check_alpha(alpha: &[f64]) -> Result<f64> {
    if alpha.len() < 2 {
        return Err(invalid("need at least two alleles"));
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(invalid("prior pseudo-counts must be positive and finite"));
    }
    Ok(alpha.iter().sum())
}

/// Bisects `s(θ) = 1` on `(lo, hi)`. `increasing` gives the direction of `s`.
fn bisect(lo: f64, hi: f64, increasing: bool, s: impl Fn(f64) -> f64) -> Result<(f64, usize)> {
    let (mut lo, mut hi) = (lo, hi);
    let sign = |v: f64| if increasing { v - 1.0 } else { 1.0 - v };
    // s at the open end is ±∞; the closed end must not overshoot
    let at_closed = if increasing { s(lo) } else { s(hi) };
    if !(at_closed.is_finite() && at_closed <= 1.0 + 1e-12) {
        return Err(Error::BracketFailure { lo, hi });
    }
    for it in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok((mid, it));
        }
        let v = s(mid);
        // values past the pole count as +∞
        let d = if v.is_finite() && v > 0.0 {
            sign(v)
        } else if increasing {
            1.0
        } else {
            -1.0
        };
        if d == 0.0 {
            return Ok((mid, it));
        }
        if d < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), MAX_BISECTIONS))
}

fn finish(raw: Vec<f64>, theta: f64, dot: &[f64], iterations: usize) -> Result<FixedPoint> {
    let total: f64 = raw.iter().sum();
    let sum_residual = (total - 1.0).abs();
    let q = SimplexPoint::new(raw)?;
    let theta_residual = (theta - q.dot(dot)).abs();
    Ok(FixedPoint { q, theta, sum_residual, theta_residual, iterations })
}

/// Solves `q(k) = α_k / ((1+|α|) − w(k)/θ)`, `θ = ⟨w,q⟩`, by bisection on
/// `θ ∈ (max w / (1+|α|), max w]`. Returns the fixed point and `r = r_map(q, w)`.
pub fn solve_qstar_lambda0(alpha: &[f64], w: &[f64]) -> Result<(FixedPoint, SimplexPoint)> {
    let a = check_alpha(alpha)?;
    if w.len() != alpha.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), got: w.len() });
    }
    if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(invalid("weights must be positive and finite"));
    }
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    let s = |theta: f64| -> f64 {
        alpha.iter().zip(w).map(|(ak, wk)| ak / ((1.0 + a) - wk / theta)).sum()
    };
    // each term decreases in θ
    let (theta, it) = bisect(wmax / (1.0 + a), wmax, false, s)?;
    let raw: Vec<f64> = alpha.iter().zip(w).map(|(ak, wk)| ak / ((1.0 + a) - wk / theta)).collect();
    let fp = finish(raw, theta, w, it)?;
    let r = r_map(&fp.q, w)?;
    Ok((fp, r))
}

/// Solves `q(k) = α_k / (φ(k) + |α| − θ)`, `θ = ⟨φ,q⟩`, by bisection on
/// `θ ∈ [min φ, min φ + |α|)`. The answer does not depend on λ.
pub fn solve_qstar_lambda_mid(alpha: &[f64], phi: &[f64]) -> Result<FixedPoint> {
    let a = check_alpha(alpha)?;
    if phi.len() != alpha.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), got: phi.len() });
    }
    if phi.iter().any(|x| !x.is_finite()) {
        return Err(invalid("fitness values must be finite"));
    }
    let pmin = phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let s = |theta: f64| -> f64 { alpha.iter().zip(phi).map(|(ak, pk)| ak / (pk + a - theta)).sum() };
    let (theta, it) = bisect(pmin, pmin + a, true, s)?;
    let raw: Vec<f64> = alpha.iter().zip(phi).map(|(ak, pk)| ak / (pk + a - theta)).collect();
    finish(raw, theta, phi, it)
}

/// Maximizer of `ln⟨e^{−φ/m}, q⟩ + Σ (α_k/m) ln q(k)` and its r-image.
pub fn qstar_m(alpha: &[f64], phi: &[f64], m: f64) -> Result<(FixedPoint, SimplexPoint)> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(invalid(format!("m must be at least 1, got {m}")));
    }
    let a: Vec<f64> = alpha.iter().map(|x| x / m).collect();
    let w: Vec<f64> = phi.iter().map(|p| (-p / m).exp()).collect();
    solve_qstar_lambda0(&a, &w)
}

/// `ln⟨w,q⟩ + Σ α_k ln q(k)`.
pub fn objective_lambda0(alpha: &[f64], w: &[f64], q: &[f64]) -> f64 {
    let wq: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
    wq.ln() + alpha.iter().zip(q).map(|(a, x)| a * x.ln()).sum::<f64>()
}

/// `−⟨φ,q⟩ + Σ α_k ln q(k)`.
pub fn objective_mid(alpha: &[f64], phi: &[f64], q: &[f64]) -> f64 {
    -phi.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() + alpha.iter().zip(q).map(|(a, x)| a * x.ln()).sum::<f64>()
}

/// Gradients of the two objectives in the ambient coordinates.
pub fn gradient_lambda0(alpha: &[f64], w: &[f64], q: &[f64]) -> Vec<f64> {
    let wq: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
    w.iter().zip(alpha).zip(q).map(|((wk, ak), qk)| wk / wq + ak / qk).collect()
}

pub fn gradient_mid(alpha: &[f64], phi: &[f64], q: &[f64]) -> Vec<f64> {
    phi.iter().zip(alpha).zip(q).map(|((pk, ak), qk)| -pk + ak / qk).collect()
}

/// Projection onto the tangent space `{v : Σ v = 0}` of the simplex.
pub fn project_tangent(g: &[f64]) -> Vec<f64> {
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    g.iter().map(|x| x - mean).collect()
}
