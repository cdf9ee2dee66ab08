//! Bound-side checks that reach beyond single unit tests: the star average
//! against `C/4t`, leaf-to-spine factorization on caterpillars, monotonicity
//! in a spine correlation, and scan reproducibility.

mod common;

use ift_core::bounds::scan::{scan_conjecture_b, Family, ScanConfig};
use ift_core::bounds::{theorem_c_constant, theorem_c_star_quantity};
use ift_core::covariance::expected_abs_cond_cov;
use ift_core::generate::{grid_rational, simple_caterpillar, trial_rng, uniform_signed};
use ift_core::{Caps, Exact, InfoFlowTree, VertexId};
use num::{Signed, Zero};
use rand::Rng;

use common::r;

fn rest_of(t: usize, skip: &[usize]) -> Vec<VertexId> {
    (0..t)
        .filter(|i| !skip.contains(i))
        .map(|i| VertexId((t + i) as u32))
        .collect()
}

fn spine_abs_cov(tree: &InfoFlowTree<Exact>, t: usize, a: usize, b: usize) -> Exact {
    expected_abs_cond_cov(
        tree,
        VertexId(a as u32),
        VertexId(b as u32),
        &rest_of(t, &[a, b]),
        &Caps::default(),
    )
    .unwrap()
    .expectation
}

#[test]
fn star_average_stays_below_quarter_constant_over_t() {
    let limit = theorem_c_constant() / 4.0;
    let mut worst: f64 = 0.0;
    for i in 0..10_000u64 {
        let mut rng = trial_rng(0xc0, i);
        let t = rng.random_range(2..=64usize);
        let rhos: Vec<f64> = (0..t).map(|_| uniform_signed(&mut rng)).collect();
        let q = theorem_c_star_quantity(&rhos).unwrap();
        assert!(q * t as f64 <= limit, "list {i} (t = {t}): t·q = {}", q * t as f64);
        worst = worst.max(q * t as f64);
    }
    assert!(worst > 0.0);
}

#[test]
fn unit_correlations_attain_the_trivial_star_value() {
    // all ρ = 1: every pair contributes exp(-(gap)/2)
    let q = theorem_c_star_quantity(&[1.0, 1.0]).unwrap();
    assert_eq!(q, 1.0);
    let q3 = theorem_c_star_quantity(&[1.0, 1.0, 1.0]).unwrap();
    let expected = (1.0 + 1.0 + (-0.5f64).exp()) / 3.0;
    assert!((q3 - expected).abs() < 1e-15);
}

#[test]
fn leaf_covariance_factors_through_the_spine() {
    for trial in 0..40u64 {
        let mut rng = trial_rng(0xfac, trial);
        let t = rng.random_range(2..=6usize);
        let spine: Vec<Exact> = (1..t).map(|_| grid_rational(&mut rng, 8).abs()).collect();
        let leaf: Vec<Exact> = (0..t).map(|_| grid_rational(&mut rng, 8)).collect();
        let tree = simple_caterpillar(spine, leaf.clone()).unwrap();
        for a in 0..t {
            for b in a + 1..t {
                let rest = rest_of(t, &[a, b]);
                let leaves = expected_abs_cond_cov(
                    &tree,
                    VertexId((t + a) as u32),
                    VertexId((t + b) as u32),
                    &rest,
                    &Caps::default(),
                )
                .unwrap()
                .expectation;
                let spine_side = spine_abs_cov(&tree, t, a, b);
                assert_eq!(
                    leaves,
                    leaf[a].abs() * leaf[b].abs() * spine_side,
                    "trial {trial}, pair ({a},{b})"
                );
            }
        }
    }
}

#[test]
fn raising_a_spine_correlation_to_one_never_lowers_spine_covariance() {
    for trial in 0..40u64 {
        let mut rng = trial_rng(0x5e1, trial);
        let t = rng.random_range(3..=6usize);
        let spine: Vec<Exact> = (1..t).map(|_| grid_rational(&mut rng, 8).abs()).collect();
        let leaf: Vec<Exact> = (0..t).map(|_| grid_rational(&mut rng, 8)).collect();
        let tree = simple_caterpillar(spine.clone(), leaf.clone()).unwrap();
        for a in 0..t {
            for b in a + 1..t {
                let base = spine_abs_cov(&tree, t, a, b);
                for j in a..b {
                    let mut raised = spine.clone();
                    raised[j] = r(1, 1);
                    let lifted = simple_caterpillar(raised, leaf.clone()).unwrap();
                    let after = spine_abs_cov(&lifted, t, a, b);
                    assert!(
                        after >= base,
                        "trial {trial}, pair ({a},{b}), edge {j}: {after} < {base}"
                    );
                }
            }
        }
    }
}

#[test]
fn zero_leaf_correlation_kills_the_leaf_covariance() {
    let tree = simple_caterpillar(vec![r(1, 2)], vec![Exact::zero(), r(1, 3)]).unwrap();
    let e = expected_abs_cond_cov(&tree, VertexId(2), VertexId(3), &[], &Caps::default()).unwrap();
    assert!(e.expectation.is_zero());
}

#[test]
fn scans_are_reproducible() {
    for family in Family::ALL {
        let config = ScanConfig {
            family,
            trials: 12,
            min_size: 2,
            max_size: 6,
            seed: 99,
            caps: Caps::default(),
        };
        let first = scan_conjecture_b(&config).unwrap();
        let second = scan_conjecture_b(&config).unwrap();
        assert_eq!(first, second, "{family}");
        assert_eq!(first.len(), 12);
        for (k, rec) in first.iter().enumerate() {
            assert_eq!(rec.trial, k as u64);
            assert!(rec.lhs >= 0.0 && rec.lhs <= 1.0 + 1e-12);
            assert!(!rec.is_violation());
        }
        let other = scan_conjecture_b(&ScanConfig { seed: 100, ..config }).unwrap();
        assert_ne!(first, other, "{family}: seed has no effect");
    }
}
