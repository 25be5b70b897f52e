use proptest::prelude::*;
use revevo::breeding::{stream_rng, AlleleCountVector};
use revevo::quadrature::tanh_sinh;
use revevo::*;
use statrs::function::gamma::ln_gamma;

fn permutations(v: &[usize]) -> Vec<Vec<usize>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

fn sequential_log_prob(urn: &DirichletCategorical, seq: &[usize]) -> f64 {
    let mut c = AlleleCountVector::zeros(urn.categories());
    let mut lp = 0.0;
    for &k in seq {
        lp += urn.conditional_prob(c.as_slice(), k).ln();
        c.increment(k);
    }
    lp
}

#[test]
fn sequential_product_is_order_free() {
    let urn = DirichletCategorical::new(vec![0.3, 1.7, 0.9]).unwrap();
    for seq in [vec![0, 0, 1, 2, 2], vec![1, 2, 1, 0], vec![2, 2, 2], vec![0, 1]] {
        let reference = urn.joint_log_prob(AlleleCountVector::from_alleles(3, &seq).as_slice());
        for p in permutations(&seq) {
            assert!((sequential_log_prob(&urn, &p) - reference).abs() < 1e-12);
        }
    }
}

#[test]
fn kolmogorov_consistency() {
    for alpha in [vec![0.5, 2.0], vec![0.3, 1.0, 2.5]] {
        let k = alpha.len();
        let urn = DirichletCategorical::new(alpha).unwrap();
        for n in 0..=5u32 {
            for code in 0..(k as u32).pow(n) {
                let mut c = code;
                let seq: Vec<usize> = (0..n).map(|_| { let a = (c % k as u32) as usize; c /= k as u32; a }).collect();
                let base = AlleleCountVector::from_alleles(k, &seq);
                let p = urn.joint_log_prob(base.as_slice()).exp();
                let next: f64 = (0..k)
                    .map(|j| {
                        let mut c = base.clone();
                        c.increment(j);
                        urn.joint_log_prob(c.as_slice()).exp()
                    })
                    .sum();
                assert!((next - p).abs() < 1e-12, "n={n}");
            }
        }
    }
}

#[test]
fn conditionals_sum_to_one() {
    let urn = DirichletCategorical::new(vec![0.2, 0.4, 3.0]).unwrap();
    for counts in [[0, 0, 0], [4, 1, 0], [2, 9, 3]] {
        let s: f64 = (0..3).map(|k| urn.conditional_prob(&counts, k)).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }
}

#[test]
fn de_finetti_integral() {
    // ∫ q^{n1} (1-q)^{n2} Beta(α1, α2)(dq) against the urn's joint law
    let (a1, a2) = (0.7, 1.9);
    let urn = DirichletCategorical::new(vec![a1, a2]).unwrap();
    let lnb = ln_gamma(a1) + ln_gamma(a2) - ln_gamma(a1 + a2);
    for n in 1..=4u32 {
        for n1 in 0..=n {
            let n2 = n - n1;
            let q = tanh_sinh(
                |_, d0, d1| ((a1 - 1.0 + n1 as f64) * d0.ln() + (a2 - 1.0 + n2 as f64) * d1.ln() - lnb).exp(),
                0.0,
                1.0,
                1e-13,
            )
            .unwrap();
            let exact = urn.joint_log_prob(&[n1, n2]).exp();
            assert!((q.value - exact).abs() < 1e-8, "n1={n1} n2={n2}: {} vs {exact}", q.value);
        }
    }
}

#[test]
fn mutation_rate_identity() {
    let space = AlleleSpace::new(3, 1).unwrap();
    let alpha = vec![0.4, 0.8, 1.3];
    let b = ProductBreeding::from_alphas(space, &[alpha.clone()]).unwrap();
    let pop = Population::new(space, vec![0, 0, 1, 2, 2, 2, 1]).unwrap();
    let mut rng = stream_rng(17, 0);
    let draws = 1_000_000;
    let hits = (0..draws).filter(|_| b.breed_genome(&pop, &mut rng).mutated(0)).count();
    let a: f64 = alpha.iter().sum();
    let u = a / (a + 7.0);
    let se = (u * (1.0 - u) / draws as f64).sqrt();
    assert!((hits as f64 / draws as f64 - u).abs() < 4.0 * se);
}

#[test]
fn conditional_frequency_three_zero() {
    let urn = DirichletCategorical::new(vec![1.0, 1.0]).unwrap();
    assert!((urn.conditional_prob(&[3, 0], 0) - 0.8).abs() < 1e-15);
    let mut rng = stream_rng(4, 4);
    let draws = 1_000_000;
    let ones = (0..draws).filter(|_| urn.conditional_sample(&[3, 0], &mut rng).allele == 0).count();
    let se = (0.16f64 / draws as f64).sqrt();
    assert!((ones as f64 / draws as f64 - 0.8).abs() < 3.0 * se);
}

#[test]
fn two_locus_clone_population() {
    let space = AlleleSpace::new(2, 2).unwrap();
    let b = ProductBreeding::from_alphas(space, &[vec![0.01, 0.01], vec![0.02, 0.01]]).unwrap();
    let g = space.encode(&[1, 0]).unwrap();
    let pop = Population::new(space, vec![g; 200]).unwrap();
    let mut rng = stream_rng(8, 1);
    let draws = 200_000;
    let (mut same, mut m0, mut m1) = (0usize, 0usize, 0usize);
    for _ in 0..draws {
        let c = b.breed_genome(&pop, &mut rng);
        same += usize::from(c.genome == g);
        m0 += usize::from(c.mutated(0));
        m1 += usize::from(c.mutated(1));
    }
    let floor = (200.0f64 / 200.02) * (200.0 / 200.03);
    assert!(same as f64 / draws as f64 >= floor - 4.0 * (floor * (1.0 - floor) / draws as f64).sqrt());
    for (m, a) in [(m0, 0.02), (m1, 0.03)] {
        let u: f64 = a / (a + 200.0);
        let se = (u * (1.0 - u) / draws as f64).sqrt();
        assert!((m as f64 / draws as f64 - u).abs() < 4.0 * se + 1e-12);
    }
}

#[test]
fn uniform_convergence_of_r_map() {
    // max over a 0.01 grid of |r_q - q| for weights e^{-φ/n^λ}
    let phi = [0.0, 6f64.ln()];
    for lambda in [0.25, 0.5, 1.0] {
        let mut prev = f64::INFINITY;
        for n in [10usize, 100, 1000, 10_000] {
            let w = scaled_weights(&phi, n, lambda).unwrap();
            let sup = (0..=100)
                .map(|i| {
                    let q = SimplexPoint::new(vec![i as f64 / 100.0, 1.0 - i as f64 / 100.0]).unwrap();
                    let r = r_map(&q, &w).unwrap();
                    (r[0] - q[0]).abs().max((r[1] - q[1]).abs())
                })
                .fold(0.0, f64::max);
            assert!(sup < prev, "lambda={lambda} n={n}: {sup} !< {prev}");
            prev = sup;
        }
        assert!(prev < 0.25);
    }
}

fn simplex_point(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_filter_map("nonzero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #[test]
    fn r_map_stays_on_simplex(q in simplex_point(4), w in prop::collection::vec(1e-3f64..10.0, 4), c in 1e-3f64..1e3) {
        let q = SimplexPoint::new(q).unwrap();
        let r = r_map(&q, &w).unwrap();
        prop_assert!((r.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(r.as_slice().iter().all(|x| *x >= 0.0));
        let cw: Vec<f64> = w.iter().map(|x| x * c).collect();
        let r2 = r_map(&q, &cw).unwrap();
        for (a, b) in r.as_slice().iter().zip(r2.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_law_depends_on_counts_only(seq in prop::collection::vec(0usize..3, 0..6), a in prop::collection::vec(0.05f64..5.0, 3)) {
        let urn = DirichletCategorical::new(a).unwrap();
        let mut rev = seq.clone();
        rev.reverse();
        prop_assert!((sequential_log_prob(&urn, &seq) - sequential_log_prob(&urn, &rev)).abs() < 1e-12);
    }
}
