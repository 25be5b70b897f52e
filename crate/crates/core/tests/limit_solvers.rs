use rand::Rng;
use revevo::breeding::stream_rng;
use revevo::limits::fixed_point::*;
use revevo::limits::*;

fn grid_max(f: impl Fn(&[f64]) -> f64, step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    (1..n).map(|i| i as f64 * step).map(|x| f(&[x, 1.0 - x])).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn lambda0_residuals_and_grid_dominance() {
    for (alpha, w) in [([1.0, 1.0], [1.0, 0.5]), ([0.3, 0.7], [1.0, 1.0 / 6.0]), ([5.0, 0.01], [0.2, 3.0])] {
        let (fp, r) = solve_qstar_lambda0(&alpha, &w).unwrap();
        assert!(fp.sum_residual < 1e-12 && fp.theta_residual < 1e-12);
        let at = objective_lambda0(&alpha, &w, fp.q.as_slice());
        assert!(at >= grid_max(|q| objective_lambda0(&alpha, &w, q), 1e-4) - 1e-9);
        let g = project_tangent(&gradient_lambda0(&alpha, &w, fp.q.as_slice()));
        assert!(g.iter().all(|x| x.abs() < 1e-8), "{g:?}");
        // r is the fitness-weighted q
        let wq: f64 = fp.q.dot(&w);
        assert!((r[0] - fp.q[0] * w[0] / wq).abs() < 1e-14);
    }
    // α=(1,1), w=(1,1/2): q1 = 1/(3 - 1/θ)
    let (fp, _) = solve_qstar_lambda0(&[1.0, 1.0], &[1.0, 0.5]).unwrap();
    let th = fp.theta;
    assert!((fp.q[0] - 1.0 / (3.0 - 1.0 / th)).abs() < 1e-12);
}

#[test]
fn lambda_mid_residuals_and_grid_dominance() {
    for (alpha, phi) in [([1.0, 2.0], [0.0, 1.0]), ([0.3, 0.7], [0.0, 6f64.ln()]), ([0.05, 4.0], [3.0, -2.0])] {
        let fp = solve_qstar_lambda_mid(&alpha, &phi).unwrap();
        assert!(fp.sum_residual < 1e-12 && fp.theta_residual < 1e-12);
        let at = objective_mid(&alpha, &phi, fp.q.as_slice());
        assert!(at >= grid_max(|q| objective_mid(&alpha, &phi, q), 1e-4) - 1e-9);
        let g = project_tangent(&gradient_mid(&alpha, &phi, fp.q.as_slice()));
        assert!(g.iter().all(|x| x.abs() < 1e-8));
    }
    // α=(1,2), φ=(0,1): q1 = 1/(3-θ), q2 = 2/(4-θ), θ = q2, so θ² - 4θ + 2 = 0
    let fp = solve_qstar_lambda_mid(&[1.0, 2.0], &[0.0, 1.0]).unwrap();
    let th = 2.0 - 2f64.sqrt();
    assert!((fp.theta - th).abs() < 1e-12, "{}", fp.theta);
}

#[test]
fn three_allele_solutions_dominate_random_points() {
    let mut rng = stream_rng(5, 0);
    let alpha = [0.4, 1.1, 2.0];
    let w = [1.0, 0.3, 0.7];
    let phi = [0.0, 2.0, 0.5];
    let (fp0, _) = solve_qstar_lambda0(&alpha, &w).unwrap();
    let fpm = solve_qstar_lambda_mid(&alpha, &phi).unwrap();
    let v0 = objective_lambda0(&alpha, &w, fp0.q.as_slice());
    let vm = objective_mid(&alpha, &phi, fpm.q.as_slice());
    for _ in 0..100_000 {
        let mut q: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= s);
        assert!(objective_lambda0(&alpha, &w, &q) <= v0 + 1e-12);
        assert!(objective_mid(&alpha, &phi, &q) <= vm + 1e-12);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let alpha = [0.4, 1.1, 2.0];
    let w = [1.0, 0.3, 0.7];
    let q = [0.2, 0.5, 0.3];
    let h = 1e-6;
    let g0 = gradient_lambda0(&alpha, &w, &q);
    let gm = gradient_mid(&alpha, &w, &q);
    for k in 0..3 {
        let (mut up, mut dn) = (q, q);
        up[k] += h;
        dn[k] -= h;
        let fd0 = (objective_lambda0(&alpha, &w, &up) - objective_lambda0(&alpha, &w, &dn)) / (2.0 * h);
        let fdm = (objective_mid(&alpha, &w, &up) - objective_mid(&alpha, &w, &dn)) / (2.0 * h);
        assert!((fd0 - g0[k]).abs() < 1e-6 && (fdm - gm[k]).abs() < 1e-6);
    }
}

#[test]
fn ladder_approaches_the_mid_solution() {
    let alpha = [0.3, 0.7];
    let phi = [0.0, 6f64.ln()];
    let target = solve_qstar_lambda_mid(&alpha, &phi).unwrap().q[0];
    let mut prev = f64::INFINITY;
    for m in [1.0, 4.0, 16.0, 64.0, 256.0, 1024.0] {
        let (fp, _) = qstar_m(&alpha, &phi, m).unwrap();
        let gap = (fp.q[0] - target).abs();
        assert!(gap < prev, "m={m}");
        prev = gap;
    }
    assert!(prev < 1e-2);
    assert!((qstar_m(&alpha, &phi, 1.0).unwrap().0.q[0] - 0.6).abs() < 1e-12);
}

fn kummer(a: f64, b: f64, x: f64) -> f64 {
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 0..500 {
        let k = k as f64;
        term *= (a + k) / (b + k) * x / (k + 1.0);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

#[test]
fn normalizer_matches_confluent_series() {
    // Z = e^{-φ2} 1F1(α1; α1+α2; φ2 - φ1)
    for (alpha, phi) in [([0.3, 0.7], [0.0, 6f64.ln()]), ([2.0, 0.5], [1.5, -0.5]), ([0.05, 0.05], [0.0, 3.0])] {
        let d = limit_density_lambda1(&alpha, &phi).unwrap();
        let z = (-phi[1]).exp() * kummer(alpha[0], alpha[0] + alpha[1], phi[1] - phi[0]);
        assert!(((d.log_z.exp() - z) / z).abs() < 1e-8, "{} vs {z}", d.log_z.exp());
    }
}

fn hessian_fd(g: &ProductObjective, z: [f64; 2]) -> [[f64; 2]; 2] {
    let h = 1e-4;
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        let (mut up, mut dn) = (z, z);
        up[i] += h;
        dn[i] -= h;
        let (gu, gd) = (g.gradient(up), g.gradient(dn));
        for j in 0..2 {
            out[j][i] = (gu[j] - gd[j]) / (2.0 * h);
        }
    }
    out
}

#[test]
fn product_hessian_matches_finite_differences() {
    let tables = [
        ([1.0, 2.0, 2.0, 3.0], ProductRegime::LambdaMid),
        ([4.0, 2.0, 2.0, 4.0], ProductRegime::LambdaMid),
        ([1.0, 0.2, 0.5, 0.9], ProductRegime::Lambda0),
    ];
    for (t, regime) in tables {
        let g = ProductObjective::new([0.7, 1.3], [0.25, 2.0], t, regime).unwrap();
        for z in [[0.3, 0.6], [0.1, 0.9], [0.5, 0.5], [0.85, 0.2]] {
            let (a, n) = (g.hessian(z), hessian_fd(&g, z));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - n[i][j]).abs() <= 1e-4 * a[i][j].abs().max(1.0), "{a:?} {n:?}");
                }
            }
        }
    }
}

#[test]
fn certificate_implies_a_unique_minimum() {
    let mut rng = stream_rng(11, 0);
    let mut certified = 0;
    for trial in 0..200 {
        let alpha = [rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)];
        let beta = [rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)];
        let regime = if trial % 2 == 0 { ProductRegime::LambdaMid } else { ProductRegime::Lambda0 };
        let t: [f64; 4] = match regime {
            ProductRegime::LambdaMid => std::array::from_fn(|_| rng.random_range(-4.0..4.0)),
            ProductRegime::Lambda0 => std::array::from_fn(|_| rng.random_range(0.05..1.0)),
        };
        let r = product_limit_k2l2(alpha, beta, t, regime).unwrap();
        if r.convexity_certified {
            certified += 1;
            assert_eq!(r.minima.len(), 1, "{alpha:?} {beta:?} {t:?}");
            let g = ProductObjective::new(alpha, beta, t, regime).unwrap();
            for i in 1..40 {
                for j in 1..40 {
                    let h = g.hessian([i as f64 / 40.0, j as f64 / 40.0]);
                    assert!(h[0][0] > 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0);
                }
            }
        }
        assert!(!r.minima.is_empty());
    }
    assert!(certified > 20);
}

#[test]
fn bimodal_minima_are_global() {
    let r = product_limit_k2l2([0.25, 0.25], [0.25, 0.25], [4.0, 2.0, 2.0, 4.0], ProductRegime::LambdaMid).unwrap();
    let g = ProductObjective::new([0.25, 0.25], [0.25, 0.25], [4.0, 2.0, 2.0, 4.0], ProductRegime::LambdaMid).unwrap();
    let best = r.minima.iter().map(|z| g.value(*z)).fold(f64::INFINITY, f64::min);
    for i in 1..400 {
        for j in 1..400 {
            assert!(g.value([i as f64 / 400.0, j as f64 / 400.0]) >= best - 1e-12);
        }
    }
    assert!(r.dets.iter().all(|d| *d > 0.0));
}
