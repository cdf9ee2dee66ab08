//! Acceptance suite: one test per criterion, each printing a PASS or FAIL
//! line straight to stdout so the verdicts show up without `--nocapture`.

mod common;

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use ift_core::bounds::scan::{scan_conjecture_b, Family, ScanConfig, ScanSummary};
use ift_core::bounds::{parity_counterexample, star_bound, theorem_c_constant, StarSpec};
use ift_core::covariance::{
    conditional_covariance_formula, conditional_covariance_ratio_all, expected_abs_cond_cov,
    BruteForceOracle, PathDecomposition,
};
use ift_core::generate::{
    grid_rational, random_simple_caterpillar, random_tree, simple_caterpillar, star, trial_rng,
};
use ift_core::metrics::{avg_cov_cond, avg_info_cond, homogeneous_star_cond_variance, mutual_information};
use ift_core::transforms::{check_equivalence, TransformTrace};
use ift_core::{
    leaf_distribution, Assignment, Caps, Error, Exact, InfoFlowTree, JointDistribution, Sampler,
    Scalar, VertexId,
};
use num::{Signed, Zero};
use rand::Rng;
use rayon::prelude::*;

use common::{grid8, grid_tree, r, random_rewrite};

type Verdict = Result<String, String>;

/// Criteria run one at a time so each budget measures its own work.
static SERIAL: Mutex<()> = Mutex::new(());

fn criterion(id: u32, name: &str, budget: Duration, body: impl FnOnce() -> Verdict) {
    let _turn = SERIAL.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
    let start = Instant::now();
    let verdict = body();
    let secs = start.elapsed().as_secs_f64();
    let verdict = verdict.and_then(|detail| {
        if start.elapsed() > budget {
            Err(format!("{detail}; took {secs:.1}s, budget {}s", budget.as_secs()))
        } else {
            Ok(detail)
        }
    });
    let line = match &verdict {
        Ok(detail) => format!("PASS [{id:>2}] {name}: {detail} ({secs:.1}s)\n"),
        Err(why) => format!("FAIL [{id:>2}] {name}: {why} ({secs:.1}s)\n"),
    };
    // bypasses the test harness capture
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    if let Err(why) = verdict {
        panic!("criterion {id} failed: {why}");
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

const CORPUS_SEED: u64 = 0x1f7_2024;

/// 500 trees on at most 10 vertices with `k/8` correlations.
fn oracle_corpus() -> Vec<InfoFlowTree<Exact>> {
    (0..500)
        .map(|i| grid_tree(&mut trial_rng(CORPUS_SEED, i), 10))
        .collect()
}

fn vertex_pairs(tree: &InfoFlowTree<Exact>) -> Vec<(VertexId, VertexId)> {
    let vs = tree.vertices();
    (0..vs.len())
        .flat_map(|a| (a + 1..vs.len()).map(move |b| (vs[a], vs[b])))
        .collect()
}

/// Positive-probability full-leaf outcomes with their oracle covariance.
fn oracle_outcomes(
    tree: &InfoFlowTree<Exact>,
    oracle: &BruteForceOracle<Exact>,
    u: VertexId,
    v: VertexId,
) -> Result<Vec<(Assignment, Exact)>, String> {
    let leaves = tree.leaves();
    Ok(oracle
        .outcome_tables(u, v, leaves)
        .map_err(err)?
        .into_iter()
        .enumerate()
        .filter_map(|(idx, table)| {
            table
                .covariance()
                .map(|c| (Assignment::from_index(leaves, idx), c))
        })
        .collect())
}

#[test]
fn criterion_01_closed_form_matches_enumeration() {
    criterion(1, "closed form = brute force, all pairs and leaf outcomes", Duration::from_secs(120), || {
        let caps = Caps::default();
        let checked = oracle_corpus()
            .par_iter()
            .enumerate()
            .map(|(i, tree)| {
                let oracle = BruteForceOracle::new(tree, &caps).map_err(err)?;
                let mut count = 0usize;
                for (u, v) in vertex_pairs(tree) {
                    let decomp = PathDecomposition::new(tree, u, v).map_err(err)?;
                    let positive = oracle_outcomes(tree, &oracle, u, v)?;
                    for (outcome, brute) in &positive {
                        let events = decomp.split_outcome(outcome).map_err(err)?;
                        let formula = conditional_covariance_formula(&decomp, &events).map_err(err)?;
                        ensure(&formula == brute, || {
                            format!("tree {i}, pair ({u},{v}), outcome {outcome}: {formula} vs {brute}")
                        })?;
                        count += 1;
                    }
                    // impossible outcomes must be refused, never evaluated
                    let total = 1usize << tree.leaves().len();
                    if positive.len() < total {
                        let possible: Vec<&Assignment> = positive.iter().map(|(o, _)| o).collect();
                        let zero = (0..total)
                            .map(|idx| Assignment::from_index(tree.leaves(), idx))
                            .find(|o| !possible.contains(&o))
                            .expect("some outcome is impossible");
                        let events = decomp.split_outcome(&zero).map_err(err)?;
                        ensure(
                            matches!(conditional_covariance_formula(&decomp, &events), Err(Error::ZeroProbability)),
                            || format!("tree {i}: zero-probability outcome {zero} not refused"),
                        )?;
                    }
                }
                Ok(count)
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(format!(
            "500 trees, {} (pair, outcome) cases equal exactly",
            checked.iter().sum::<usize>()
        ))
    });
}

#[test]
fn criterion_02_ratio_form_is_independent_of_path_assignment() {
    criterion(2, "ratio form independent of x and equal to closed form", Duration::from_secs(120), || {
        let caps = Caps::default();
        let stats = oracle_corpus()
            .par_iter()
            .enumerate()
            .map(|(i, tree)| {
                let oracle = BruteForceOracle::new(tree, &caps).map_err(err)?;
                let (mut checked, mut skipped) = (0usize, 0usize);
                for (u, v) in vertex_pairs(tree) {
                    let decomp = PathDecomposition::new(tree, u, v).map_err(err)?;
                    let path = decomp.path().to_vec();
                    for (outcome, _) in oracle_outcomes(tree, &oracle, u, v)? {
                        let events = decomp.split_outcome(&outcome).map_err(err)?;
                        let formula = conditional_covariance_formula(&decomp, &events).map_err(err)?;
                        let values = conditional_covariance_ratio_all(&decomp, &events).map_err(err)?;
                        for (bits, value) in values.into_iter().enumerate() {
                            let x = Assignment::from_index(&path, bits);
                            match value {
                                Ok(value) => {
                                    ensure(value == formula, || {
                                        format!("tree {i}, pair ({u},{v}), outcome {outcome}, x {x}: {value} vs {formula}")
                                    })?;
                                    checked += 1;
                                }
                                // Pr[X̄ = x] = 0 needs a ±1 edge on the path
                                Err(Error::ZeroProbability) => {
                                    ensure(
                                        decomp.spine_correlations().iter().any(|c| c.abs() == r(1, 1)),
                                        || format!("tree {i}: x {x} refused without a ±1 path edge"),
                                    )?;
                                    skipped += 1;
                                }
                                Err(e) => return Err(err(e)),
                            }
                        }
                    }
                }
                Ok((checked, skipped))
            })
            .collect::<Result<Vec<_>, String>>()?;
        let checked: usize = stats.iter().map(|s| s.0).sum();
        let skipped: usize = stats.iter().map(|s| s.1).sum();
        Ok(format!(
            "{checked} (pair, outcome, x) cases equal; {skipped} x with Pr[X̄ = x] = 0 skipped"
        ))
    });
}

#[test]
fn criterion_03_rewrite_chains_preserve_leaf_law() {
    criterion(3, "random rewrite chains of length 5 are equivalences", Duration::from_secs(180), || {
        let caps = Caps {
            max_leaves: 20,
            max_vertices: 64,
        };
        let rules = (0..500u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(CORPUS_SEED ^ 3, i);
                let original = grid_tree(&mut rng, 10);
                let mut trace = TransformTrace::new();
                let mut tree = original.clone();
                for _ in 0..5 {
                    let rewrite = random_rewrite(&mut rng, &tree);
                    tree = trace
                        .apply(&tree, rewrite.clone())
                        .map_err(|e| format!("tree {i}: {} failed: {e}", rewrite.rule()))?;
                }
                ensure(check_equivalence(&original, &tree, &caps, 0.0).map_err(err)?, || {
                    format!("tree {i}: chain {:?} changed the leaf law", trace.steps.iter().map(|s| s.rewrite.rule()).collect::<Vec<_>>())
                })?;
                let replayed = trace.replay(&original).map_err(err)?;
                ensure(replayed.to_spec() == tree.to_spec(), || format!("tree {i}: replay differs"))?;
                Ok(trace.steps.iter().map(|s| s.rewrite.rule()).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, String>>()?;
        let mut counts = std::collections::BTreeMap::new();
        for rule in rules.iter().flatten() {
            *counts.entry(*rule).or_insert(0usize) += 1;
        }
        ensure(counts.len() == 6, || format!("not every rule was exercised: {counts:?}"))?;
        Ok(format!("500 chains exact; rule counts {counts:?}"))
    });
}

#[test]
fn criterion_04_parity_law_values() {
    criterion(4, "parity law: avg_cov_cond 0 then 1, info 0 then ln 2", Duration::from_secs(30), || {
        let caps = Caps::default();
        for big_t in 1..=6 {
            let d: JointDistribution<Exact> = parity_counterexample(big_t, &caps).map_err(err)?;
            for t in 0..=big_t {
                let cov = avg_cov_cond(&d, t).map_err(err)?;
                let info = avg_info_cond(&d, t).map_err(err)?;
                let (want_cov, want_info) = if t < big_t {
                    (r(0, 1), 0.0)
                } else {
                    (r(1, 1), std::f64::consts::LN_2)
                };
                ensure(cov == want_cov, || format!("T={big_t}, t={t}: avg_cov_cond {cov}"))?;
                ensure((info - want_info).abs() <= 1e-12, || {
                    format!("T={big_t}, t={t}: avg_info_cond {info}")
                })?;
            }
        }
        Ok("T = 1..6 exact; information within 1e-12".into())
    });
}

#[test]
fn criterion_05_star_variance_bound() {
    criterion(5, "star: E[Var X0 | Y] ≤ 4 exp(-α/2)", Duration::from_secs(60), || {
        let caps = Caps::default();
        let mut worst: f64 = 0.0;
        for i in 0..500u64 {
            let mut rng = trial_rng(CORPUS_SEED ^ 5, i);
            let m = rng.random_range(1..=12);
            let rhos: Vec<Exact> = (0..m).map(|_| grid_rational(&mut rng, 16)).collect();
            let spec = StarSpec::from_tree(&star(rhos).map_err(err)?).map_err(err)?;
            let lhs = spec.expected_center_variance(&caps).map_err(err)?;
            let bound = star_bound(spec.alpha.to_f64()).map_err(err)?;
            // lhs rounded up before the comparison
            let lhs_up = lhs.to_f64() + 1e-12;
            ensure(lhs_up <= bound, || format!("star {i}: {lhs_up} > {bound}"))?;
            let sign = spec.sign_disagreement(&caps).map_err(err)?;
            ensure(lhs <= r(4, 1) * sign, || format!("star {i}: variance above 4 Pr[X0 ≠ S]"))?;
            worst = worst.max(lhs.to_f64() / bound);
        }
        Ok(format!("500 stars; max lhs/bound = {worst:.4}"))
    });
}

#[test]
fn criterion_06_spine_monotonicity() {
    criterion(6, "E|Cov| nondecreasing in each path correlation", Duration::from_secs(300), || {
        let caps = Caps::default();
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let mut sequences = 0usize;
        for i in 0..100u64 {
            let mut rng = trial_rng(CORPUS_SEED ^ 6, i);
            let t = rng.random_range(2..=5);
            let base = random_simple_caterpillar(&mut rng, t).map_err(err)?;
            let spine: Vec<f64> = (0..t - 1)
                .map(|k| *base.edge_between(VertexId(k as u32), VertexId(k as u32 + 1)).unwrap().rho.value())
                .collect();
            let leaf: Vec<f64> = (0..t)
                .map(|k| *base.edge_between(VertexId(k as u32), VertexId((t + k) as u32)).unwrap().rho.value())
                .collect();
            for a in 0..t {
                for b in a + 1..t {
                    for j in a..b {
                        let mut last = f64::NEG_INFINITY;
                        for &g in &grid {
                            let mut s = spine.clone();
                            s[j] = g;
                            let tree = simple_caterpillar(s, leaf.clone()).map_err(err)?;
                            let value = expected_abs_cond_cov(
                                &tree,
                                VertexId(a as u32),
                                VertexId(b as u32),
                                tree.leaves(),
                                &caps,
                            )
                            .map_err(err)?
                            .expectation;
                            ensure(value >= last - 1e-12, || {
                                format!("caterpillar {i}, pair ({a},{b}), edge {j}: {value} < {last} at ρ = {g}")
                            })?;
                            last = value;
                        }
                        sequences += 1;
                    }
                }
            }
        }
        Ok(format!("100 caterpillars, {sequences} grid sequences nondecreasing"))
    });
}

#[test]
fn criterion_07_caterpillar_scan_within_constant() {
    criterion(7, "scan: conjecture_b_lhs ≤ C/t on simple caterpillars", Duration::from_secs(600), || {
        let config = ScanConfig {
            family: Family::SimpleCaterpillar,
            trials: 1000,
            min_size: 2,
            max_size: 8,
            seed: CORPUS_SEED,
            caps: Caps::default(),
        };
        let records = scan_conjecture_b(&config).map_err(err)?;
        let summary = ScanSummary::from_records(&config, &records);
        ensure(records.len() == 1000, || "missing records".into())?;
        ensure(summary.violations == 0, || format!("{} violations", summary.violations))?;
        ensure(records.iter().all(|r| r.margin >= 0.0 && (2..=8).contains(&r.t)), || {
            "negative margin or size out of range".into()
        })?;
        Ok(format!(
            "1000 trials, 0 violations; max lhs·t = {:.4} (trial {}) against C = {:.4}",
            summary.max_scaled_lhs,
            summary.argmax_trial.map_or("none".into(), |t| t.to_string()),
            theorem_c_constant()
        ))
    });
}

fn random_weights<R: Rng>(rng: &mut R, cells: usize, max: i64) -> Vec<Exact> {
    loop {
        let w: Vec<i64> = (0..cells).map(|_| rng.random_range(0..=max)).collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return w.into_iter().map(|x| Exact::from_ratio(x, total)).collect();
        }
    }
}

#[test]
fn criterion_08_information_identities() {
    criterion(8, "|Cov| ≤ √2·√I and Σ_{t<T} avg_info_cond ≤ 1", Duration::from_secs(120), || {
        let labels = vec![VertexId(0), VertexId(1)];
        let mut tightest = f64::INFINITY;
        for i in 0..10_000u64 {
            let mut rng = trial_rng(CORPUS_SEED ^ 8, i);
            let d = JointDistribution::new(labels.clone(), random_weights(&mut rng, 4, 20)).map_err(err)?;
            let cov = d.covariance(labels[0], labels[1]).map_err(err)?.abs().to_f64();
            let info = mutual_information(&d, labels[0], labels[1]).map_err(err)?;
            let rhs = 2f64.sqrt() * info.max(0.0).sqrt();
            ensure(cov <= rhs + 1e-12, || format!("pair law {i}: |Cov| {cov} > {rhs}"))?;
            if cov > 0.0 {
                tightest = tightest.min(rhs / cov);
            }
        }
        let mut largest: f64 = 0.0;
        for i in 0..200u64 {
            let mut rng = trial_rng(CORPUS_SEED ^ 0x80, i);
            let n = rng.random_range(2..=6usize);
            let labels: Vec<VertexId> = (0..n as u32).map(VertexId).collect();
            let d = JointDistribution::new(labels, random_weights(&mut rng, 1 << n, 6)).map_err(err)?;
            let mut sum = 0.0;
            for big_t in 1..=n.saturating_sub(2) {
                sum += avg_info_cond(&d, big_t - 1).map_err(err)?;
                ensure(sum <= 1.0, || format!("law {i}: sum up to T={big_t} is {sum}"))?;
            }
            largest = largest.max(sum);
        }
        Ok(format!(
            "10^4 pair laws (min √2√I/|Cov| = {tightest:.4}); 200 laws, max partial sum {largest:.4}"
        ))
    });
}

#[test]
fn criterion_09_sampler_frequencies() {
    criterion(9, "sample frequencies within 4σ of exact cell probabilities", Duration::from_secs(120), || {
        const DRAWS: usize = 100_000;
        let caps = Caps::default();
        let mut cells = 0usize;
        let mut worst: f64 = 0.0;
        for i in 0..20u64 {
            let mut rng = trial_rng(CORPUS_SEED ^ 9, i);
            let tree = loop {
                let n = rng.random_range(2..=8);
                let t = random_tree(&mut rng, n, grid8).map_err(err)?;
                if t.leaves().len() <= 5 {
                    break t;
                }
            };
            let exact = leaf_distribution(&tree, &caps).map_err(err)?;
            let sampler = Sampler::new(&tree).map_err(err)?;
            let mut counts = vec![0usize; exact.probs().len()];
            let mut draw_rng = trial_rng(CORPUS_SEED ^ 0x90, i);
            for _ in 0..DRAWS {
                counts[sampler.draw_leaf_index(&mut draw_rng)] += 1;
            }
            for (cell, (p, &c)) in exact.probs().iter().zip(&counts).enumerate() {
                let p = p.to_f64();
                let freq = c as f64 / DRAWS as f64;
                let allowed = 4.0 * (p * (1.0 - p) / DRAWS as f64).sqrt();
                ensure((freq - p).abs() <= allowed, || {
                    format!("tree {i}, cell {cell}: frequency {freq} vs p = {p} (allowed {allowed})")
                })?;
                if allowed > 0.0 {
                    worst = worst.max((freq - p).abs() / allowed * 4.0);
                }
                cells += 1;
            }
        }
        Ok(format!("20 trees, {cells} cells; max deviation {worst:.2}σ"))
    });
}

#[test]
fn criterion_10_homogeneous_star_shortcut() {
    criterion(10, "homogeneous star shortcut = explicit tree avg_cov_cond", Duration::from_secs(60), || {
        let caps = Caps::default();
        let mut cases = 0;
        for rho in [r(0, 1), r(1, 4), r(1, 2), r(3, 4), r(1, 1)] {
            for t in 0..=10usize {
                let shortcut = homogeneous_star_cond_variance(&rho, t).map_err(err)?;
                let tree = star(vec![rho.clone(); t + 2]).map_err(err)?;
                let dist = leaf_distribution(&tree, &caps).map_err(err)?;
                let direct = avg_cov_cond(&dist, t).map_err(err)?;
                ensure(shortcut == direct, || format!("ρ = {rho}, t = {t}: {shortcut} vs {direct}"))?;
                ensure(!shortcut.is_negative(), || "negative value".into())?;
                if rho == r(1, 1) && t > 0 {
                    ensure(shortcut.is_zero(), || "ρ = 1 must reveal the center".into())?;
                }
                cases += 1;
            }
        }
        Ok(format!("{cases} (ρ, t) cases equal exactly"))
    });
}
