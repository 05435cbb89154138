use bandclt::combinatorics::{catalan, dyck_count, gamma, gamma_by_quadrature, gamma_f64};
use bandclt::ensemble::{circ_distance, sample_matrix, EntryDistribution, MatrixSpec, RngStream};
use bandclt::harness::empirical_inner_products;
use bandclt::semicircle::semicircle_cdf;
use bandclt::stats::moment_summary;
use bandclt::{kernel_integral, kernel_series, quadrature::KernelOptions, TestFunction, EDGE};
use num_bigint::BigUint;
use proptest::prelude::*;

/// Counts ±1 paths of length `l + m` from 0 to 0 that stay nonnegative and
/// sit at height `k` after `l` steps, by exhaustive enumeration.
fn brute_dyck(l: usize, m: usize, k: usize) -> u64 {
    let len = l + m;
    let mut count = 0;
    for mask in 0u32..(1 << len) {
        let mut h = 0i32;
        let mut ok = true;
        let mut at_l = if l == 0 { Some(0) } else { None };
        for step in 0..len {
            h += if mask >> step & 1 == 1 { 1 } else { -1 };
            if h < 0 {
                ok = false;
                break;
            }
            if step + 1 == l {
                at_l = Some(h);
            }
        }
        if ok && h == 0 && at_l == Some(k as i32) {
            count += 1;
        }
    }
    count
}

#[test]
fn dyck_counts_match_enumeration() {
    for l in 0..=12 {
        for m in 0..=(12 - l) {
            if (l + m) % 2 == 1 {
                assert!(dyck_count(l, m, 0).is_err());
                continue;
            }
            for k in 0..=l.max(m) + 1 {
                assert_eq!(dyck_count(l, m, k).unwrap(), BigUint::from(brute_dyck(l, m, k)), "l={l} m={m} k={k}");
            }
        }
    }
}

#[test]
fn dyck_counts_sum_to_catalan() {
    for l in 0..=20 {
        for m in (0..=20).filter(|m| (l + m) % 2 == 0) {
            let total: BigUint = (0..=l.min(m)).map(|k| dyck_count(l, m, k).unwrap()).sum();
            assert_eq!(total, catalan((l + m) / 2), "l={l} m={m}");
        }
    }
}

#[test]
fn gamma_two_routes() {
    for k in 1..=40 {
        let exact = gamma(k).unwrap().to_f64();
        let quad = gamma_by_quadrature(k, 32).unwrap();
        assert!((exact - quad).abs() <= 1e-8, "k={k}: {exact} vs {quad}");
    }
}

#[test]
fn identity_inner_product_finite_b() {
    // Σ_{i,j∈I_1} M_ij²/b: 2b diagonal terms of mean σ²/b and 3b² − 3b ordered
    // in-band off-diagonal pairs of mean 1/b, so E = 3 − 3/b + 2σ²/b.
    let (n, b) = (60, 5);
    let spec = MatrixSpec::new(n, b, EntryDistribution::gaussian(), 17).unwrap();
    let id = TestFunction::Identity;
    let e = empirical_inner_products(&[(id.clone(), id)], &spec, 1500, 1).unwrap()[0];
    let exact = 3.0 - 3.0 / b as f64 + 2.0 / b as f64;
    assert!(e.z_score(exact) < 4.0, "{e:?} vs {exact}");
}

#[test]
fn rademacher_off_diagonal_mass_is_deterministic() {
    // Tr M² = Σ_jk m_jk²: for ±1 off-diagonal entries the off-diagonal sum is
    // deterministic, so only the diagonal contributes variance.
    let dist = EntryDistribution::new("rademacher".parse().unwrap(), 0.0).unwrap();
    let spec = MatrixSpec::new(40, 6, dist, 3).unwrap();
    let vals: Vec<f64> = (0..20)
        .map(|i| sample_matrix(&spec, &mut RngStream::new(3, i)).unwrap().frobenius_sq())
        .collect();
    assert!(vals.iter().all(|v| (v - vals[0]).abs() < 1e-9));
    assert!((vals[0] - 2.0 * 40.0).abs() < 1e-9);
}

#[test]
fn kernel_routes_agree_off_grid() {
    for &(x, y) in &[(0.3, -2.1), (1.7, 0.2), (-2.6, -1.0)] {
        let s = kernel_series(x, y, 400).unwrap().value;
        let i = kernel_integral(x, y, &KernelOptions::default()).unwrap().value;
        assert!((s - i).abs() < 1e-6, "({x},{y}): {s} vs {i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circ_distance_is_a_metric(n in 2usize..200, a in 1usize..200, b in 1usize..200, c in 1usize..200) {
        let (a, b, c) = (1 + a % n, 1 + b % n, 1 + c % n);
        let d = |x, y| circ_distance(x, y, n).unwrap();
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert!(d(a, b) <= n / 2);
        prop_assert!(d(a, c) <= d(a, b) + d(b, c));
        prop_assert_eq!(d(a, a), 0);
    }

    #[test]
    fn gamma_strictly_decreasing(k in 1usize..120) {
        prop_assert!(gamma_f64(k + 1) < gamma_f64(k));
        prop_assert!(gamma_f64(k) > 0.0);
    }

    #[test]
    fn cdf_symmetry(x in -4.0f64..4.0) {
        prop_assert!((semicircle_cdf(x) + semicircle_cdf(-x) - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&semicircle_cdf(x)));
    }

    #[test]
    fn kurtosis_affine_invariant(seed in 0u64..1000, a in 0.1f64..100.0, shift in -1e3f64..1e3) {
        let xs: Vec<f64> = (0..64).map(|i| ((seed + 1) as f64 * (i as f64 + 0.5)).sin()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a * x + shift).collect();
        let (p, q) = (moment_summary(&xs).unwrap(), moment_summary(&ys).unwrap());
        prop_assert!((p.kurtosis_ratio - q.kurtosis_ratio).abs() < 1e-9);
        prop_assert!((p.skewness - q.skewness).abs() < 1e-9);
    }

    #[test]
    fn kernel_symmetric_under_swap(x in -2.7f64..2.7, y in -2.7f64..2.7) {
        prop_assume!((x - y).abs() > 1e-3);
        let o = KernelOptions::default();
        let f = kernel_integral(x, y, &o).unwrap().value;
        let g = kernel_integral(y, x, &o).unwrap().value;
        prop_assert!((f - g).abs() < 1e-9 * f.abs().max(1.0));
        prop_assert!(x.abs() < EDGE);
    }

    #[test]
    fn sampled_matrix_is_banded(seed in 0u64..50, n in 7usize..40) {
        let b = 1 + (seed as usize) % ((n - 1) / 2);
        let spec = MatrixSpec::new(n, b, EntryDistribution::gaussian(), seed).unwrap();
        let m = sample_matrix(&spec, &mut RngStream::new(seed, 0)).unwrap();
        for j in 0..n {
            for k in 0..n {
                let inside = circ_distance(j + 1, k + 1, n).unwrap() <= b;
                prop_assert!(inside || m[(j, k)] == 0.0);
                prop_assert_eq!(m[(j, k)], m[(k, j)]);
            }
        }
    }
}
