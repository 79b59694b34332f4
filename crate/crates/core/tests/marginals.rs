mod common;

use common::*;
use hmmob::exec::Exec;
use hmmob::hmm::{all_permutations, mixing_profile, HmmParams};
use hmmob::marginals::{
    default_eps, l1_distance_quadrature, l1_marginal_distance, lower_bound_diagnostic, marginal_density, weighted_distance,
};
use hmmob::numeric::std_normal_cdf;
use proptest::prelude::*;
use rand::Rng as _;

#[test]
fn two_dimensional_marginal_matches_double_sum() {
    let mut rng = seeded(100);
    for _ in 0..100 {
        let theta = random_theta(2, 3.0, &mut rng);
        let y = [6.0 * rng.random::<f64>() - 3.0, 6.0 * rng.random::<f64>() - 3.0];
        let mu = stationary_by_powers(&theta);
        let mut naive = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                naive += mu[i] * theta.q(i, j) * normal_pdf(theta.gamma(i), 1.0, y[0]) * normal_pdf(theta.gamma(j), 1.0, y[1]);
            }
        }
        let v = marginal_density(&theta, &y).unwrap().value;
        assert!((v - naive).abs() < 1e-12, "{v} vs {naive}");
    }
}

#[test]
fn gaussian_shift_distance() {
    let a = HmmParams::single(gauss(), 0.0).unwrap();
    let b = HmmParams::single(gauss(), 1.0).unwrap();
    let exact = 2.0 * (2.0 * std_normal_cdf(0.5) - 1.0);
    assert!((exact - 0.76584).abs() < 1e-5);
    let quad = l1_distance_quadrature(&a, &b).unwrap().value;
    assert!((quad - exact).abs() < 1e-9);
    let mc = l1_marginal_distance(&a, &b, 1, 200_000, 2026, Exec::Parallel).unwrap();
    assert!(mc.std_err < 0.005);
    assert!((mc.value - quad).abs() <= 3.0 * mc.std_err);
}

#[test]
fn distance_bounded_by_two() {
    let mut rng = seeded(7);
    for i in 0..40 {
        let a = random_theta(1 + i % 3, 6.0, &mut rng);
        let b = random_theta(1 + (i / 3) % 3, 6.0, &mut rng);
        let d = l1_marginal_distance(&a, &b, 1 + i % 4, 400, i as u64, Exec::Sequential).unwrap();
        assert!(d.value >= 0.0 && d.value <= 2.0 + 3.0 * d.std_err);
    }
    let far_a = HmmParams::single(gauss(), -40.0).unwrap();
    let far_b = HmmParams::single(gauss(), 40.0).unwrap();
    let d = l1_marginal_distance(&far_a, &far_b, 2, 400, 0, Exec::Sequential).unwrap();
    assert_eq!(d.value, 2.0);
}

/// Trapezoid rule on a uniform grid; spectrally accurate for Gaussian tails.
fn grid(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let n = ((hi - lo) / h).round() as usize;
    (0..=n).map(|i| lo + i as f64 * h).collect()
}

#[test]
fn marginals_integrate_to_one() {
    let theta = HmmParams::new(
        gauss(),
        vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.25, 0.25, 0.5]],
        vec![-1.5, 0.0, 2.0],
    )
    .unwrap();
    let h = 0.05;
    let pts = grid(-14.0, 14.0, h);
    let one: f64 = pts.iter().map(|&y| marginal_density(&theta, &[y]).unwrap().value * h).sum();
    assert!((one - 1.0).abs() < 1e-4);
    let pts2 = grid(-14.0, 14.0, 0.1);
    let two: f64 = pts2
        .iter()
        .flat_map(|&a| pts2.iter().map(move |&b| (a, b)))
        .map(|(a, b)| marginal_density(&theta, &[a, b]).unwrap().value * 0.01)
        .sum();
    assert!((two - 1.0).abs() < 1e-4, "{two}");
}

#[test]
fn relabeling_changes_nothing() {
    let mut rng = seeded(3);
    let theta = random_theta(3, 2.0, &mut rng);
    let other = random_theta(3, 2.0, &mut rng);
    let y = [0.3, -1.2, 2.2];
    let f = marginal_density(&theta, &y).unwrap().value;
    let d = l1_marginal_distance(&theta, &other, 2, 2000, 9, Exec::Sequential).unwrap().value;
    let w = weighted_distance(&theta, &other, 2, 2000, 9, Exec::Sequential).unwrap().value;
    for perm in all_permutations(3) {
        let p = theta.permute(&perm).unwrap();
        assert!((marginal_density(&p, &y).unwrap().value - f).abs() <= 1e-12);
        let dp = l1_marginal_distance(&p, &other, 2, 2000, 9, Exec::Parallel).unwrap().value;
        assert!((dp - d).abs() <= 1e-12);
        let wp = weighted_distance(&p, &other, 2, 2000, 9, Exec::Sequential).unwrap().value;
        assert!((wp - w).abs() <= 1e-12);
        let d_self = l1_marginal_distance(&p, &theta, 2, 2000, 9, Exec::Sequential).unwrap();
        assert_eq!(d_self.value, 0.0);
    }
}

#[test]
fn weighted_distance_is_a_product() {
    let theta = HmmParams::two_state(gauss(), 0.3, 0.4, -1.0, 1.5).unwrap();
    let theta0 = HmmParams::two_state(gauss(), 0.3, 0.4, -1.0, 1.0).unwrap();
    let w = weighted_distance(&theta, &theta0, 2, 5000, 4, Exec::Parallel).unwrap();
    let d = l1_marginal_distance(&theta, &theta0, 2, 5000, 4, Exec::Sequential).unwrap().value;
    let tau = 0.7 / 1.3;
    assert!((mixing_profile(&theta).tau - tau).abs() < 1e-15);
    assert!((w.value - d * tau).abs() < 1e-12);
    assert_eq!(weighted_distance(&theta0, &theta0, 2, 5000, 4, Exec::Parallel).unwrap().value, 0.0);
}

#[test]
fn distances_and_diagnostic_grow_along_a_split() {
    let theta0 = HmmParams::single(gauss(), 0.0).unwrap();
    let base = theta0.duplicate_last_state(2).unwrap();
    let mut prev_d = (0.0, 0.0);
    let mut prev_lb = 0.0;
    for step in 0..=20 {
        let t = step as f64 * 0.1;
        let theta = base.with_gammas(vec![0.0, t]).unwrap();
        let d = l1_marginal_distance(&theta, &theta0, 2, 20_000, 11, Exec::Parallel).unwrap();
        let lb = lower_bound_diagnostic(&theta, &theta0, 2, default_eps(&theta0)).unwrap().total();
        if step == 0 {
            assert!(d.value <= 1e-12);
            assert!(lb <= 1e-15);
        } else {
            assert!(d.value >= prev_d.0 - 3.0 * (d.std_err + prev_d.1), "t = {t}");
            assert!(lb >= prev_lb, "t = {t}: {lb} < {prev_lb}");
        }
        prev_d = (d.value, d.std_err);
        prev_lb = lb;
    }
}

#[test]
fn diagnostic_is_dominated_by_distance_near_truth() {
    let theta0 = HmmParams::two_state(gauss(), 0.3, 0.4, -2.0, 2.0).unwrap();
    let eps = default_eps(&theta0);
    let mut rng = seeded(8);
    let mut min_ratio = f64::INFINITY;
    for i in 0..200 {
        let scale = 0.02 + 0.3 * rng.random::<f64>();
        let p = (0.3 + scale * (rng.random::<f64>() - 0.5)).clamp(0.01, 0.99);
        let q = (0.4 + scale * (rng.random::<f64>() - 0.5)).clamp(0.01, 0.99);
        let g1 = -2.0 + scale * (2.0 * rng.random::<f64>() - 1.0);
        let g2 = 2.0 + scale * (2.0 * rng.random::<f64>() - 1.0);
        let theta = HmmParams::two_state(gauss(), p, q, g1, g2).unwrap();
        let lb = lower_bound_diagnostic(&theta, &theta0, 2, eps).unwrap().total();
        let d = l1_marginal_distance(&theta, &theta0, 2, 4000, i, Exec::Parallel).unwrap().value;
        if lb > 0.0 {
            min_ratio = min_ratio.min(d / lb);
        }
    }
    assert!(min_ratio >= 1e-3, "fitted constant {min_ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimator_is_symmetric(ga in -3.0f64..3.0, gb in -3.0f64..3.0, p in 0.05f64..0.95, q in 0.05f64..0.95, seed in any::<u64>()) {
        let a = HmmParams::two_state(gauss(), p, q, ga, 0.0).unwrap();
        let b = HmmParams::two_state(gauss(), q, p, gb, 1.0).unwrap();
        let ab = l1_marginal_distance(&a, &b, 2, 300, seed, Exec::Sequential).unwrap();
        let ba = l1_marginal_distance(&b, &a, 2, 300, seed, Exec::Sequential).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn density_nonnegative_and_relabel_invariant(g in prop::collection::vec(-4.0f64..4.0, 3), y in prop::collection::vec(-6.0f64..6.0, 1..=4)) {
        let theta = HmmParams::new(gauss(), vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.1, 0.8], vec![0.3, 0.3, 0.4]], g).unwrap();
        let f = marginal_density(&theta, &y).unwrap().value;
        prop_assert!(f >= 0.0);
        let p = theta.permute(&[2, 0, 1]).unwrap();
        prop_assert!((marginal_density(&p, &y).unwrap().value - f).abs() <= 1e-12);
    }
}
