//! Tanh-sinh (double exponential) quadrature for integrands with algebraic
//! endpoint singularities.

use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};

const T_MAX: f64 = 6.5;
const MAX_LEVEL: u32 = 12;

/// Integral estimate and the change between the last two levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Integrates `f` over `[a, b]` to relative accuracy `rel_tol`.
///
/// `f(x, da, db)` receives the abscissa together with its distances to both
/// endpoints, computed without cancellation, so singular factors such as
/// `(x - a)^{-0.7}` can be evaluated accurately near the ends.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid(format!("bad interval [{a}, {b}]")));
    }
    let half = 0.5 * (b - a);
    let mut evaluations = 0usize;
    let mut node = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let da = (b - a) / (1.0 + (-2.0 * u).exp());
        let db = (b - a) / (1.0 + (2.0 * u).exp());
        if da == 0.0 || db == 0.0 {
            return 0.0;
        }
        evaluations += 1;
        let x = if da < db { a + da } else { b - db };
        let v = f(x, da, db) * w;
        if v.is_finite() { v } else { 0.0 }
    };

    // level 0: h = 1 on the integer nodes
    let mut h = 1.0;
    let mut sum = node(0.0);
    let mut k = 1.0;
    while k <= T_MAX {
        sum += node(k) + node(-k);
        k += 1.0;
    }
    let mut estimate = h * sum;
    let mut error = f64::INFINITY;
    for _ in 1..=MAX_LEVEL {
        h *= 0.5;
        // only the new odd multiples of h
        let mut t = h;
        while t <= T_MAX {
            sum += node(t) + node(-t);
            t += 2.0 * h;
        }
        let next = h * sum;
        error = (next - estimate).abs();
        estimate = next;
        if error <= rel_tol * estimate.abs() {
            return Ok(Quadrature { value: estimate, error, evaluations });
        }
    }
    if !estimate.is_finite() {
        return Err(Error::Quadrature { estimate, error });
    }
    Err(Error::Quadrature { estimate, error })
}
