//! Property checks shared by the `properties` and `acceptance` targets.
//! Each check returns `Err` with a description of the first failure.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sasa_core::graph::{neighbor_orders, AdjacencyGraph};
use sasa_core::solver::difference::pairs as pairs_of;
use sasa_core::solver::extract_groups;
use sasa_core::tuning::bic;
use sasa_core::{
    compute_weights, fit, scad_value, Dataset, LocationBlock, Partition, SolverConfig, WeightKind, WeightMatrix,
    WeightSpec,
};

pub type Check = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Check
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

/// Gaussian data with an intercept as the first global covariate when `q > 0`.
pub fn random_dataset(seed: u64, n: usize, ni: usize, q: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = || -> f64 { rng.sample(StandardNormal) };
    let blocks = (0..n)
        .map(|i| {
            let z = DMatrix::from_fn(ni, q, |_, c| if c == 0 { 1.0 } else { g() });
            let x = DMatrix::from_fn(ni, p, |_, _| g());
            let y = DVector::from_fn(ni, |_, _| g());
            LocationBlock::new(format!("{i}"), y, z, x)
        })
        .collect();
    Dataset::with_dims(blocks, q, p).expect("valid random dataset")
}

/// Two-level data: locations below `n / 2` have slope 1, the rest 2.
pub fn two_level_dataset(seed: u64, n: usize, ni: usize, q: usize, p: usize, noise: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = || -> f64 { rng.sample(StandardNormal) };
    let blocks = (0..n)
        .map(|i| {
            let level = if i < n / 2 { 1.0 } else { 2.0 };
            let z = DMatrix::from_fn(ni, q, |_, c| if c == 0 { 1.0 } else { g() });
            let x = DMatrix::from_fn(ni, p, |_, _| g());
            let y = DVector::from_fn(ni, |h, _| {
                let zh: f64 = z.row(h).iter().sum();
                zh * 0.5 + x.row(h).sum() * level + noise * g()
            });
            LocationBlock::new(format!("{i}"), y, z, x)
        })
        .collect();
    Dataset::with_dims(blocks, q, p).expect("valid dataset")
}

/// SCAD is zero at the origin, `lambda t` up to `lambda`, concave and
/// nondecreasing, continuous at both knots and flat from `gamma lambda`.
pub fn penalty_concavity_plateau() -> Check {
    for &gamma in &[2.1, 2.5, 3.0, 3.7, 6.0] {
        for &lambda in &[0.05, 0.3, 1.0, 2.5] {
            let p = |t: f64| scad_value(t, lambda, gamma).unwrap();
            let plateau = lambda * lambda * (gamma + 1.0) / 2.0;
            let h = gamma * lambda / 2000.0;
            let mut prev = p(0.0);
            if prev != 0.0 {
                return Err(format!("p(0) = {prev}"));
            }
            for k in 1..=3000 {
                let t = k as f64 * h;
                let (a, b, c) = (p(t - h), p(t), p(t + h));
                if b < prev - 1e-14 {
                    return Err(format!("decreasing at t={t} (gamma={gamma}, lambda={lambda})"));
                }
                if a + c - 2.0 * b > 1e-12 * plateau.max(1.0) {
                    return Err(format!("convex kink at t={t} (gamma={gamma}, lambda={lambda})"));
                }
                if t <= lambda && (b - lambda * t).abs() > 1e-12 {
                    return Err(format!("not linear at t={t}"));
                }
                if t >= gamma * lambda
                    && ((b - plateau).abs() > 1e-14 * plateau || (t > gamma * lambda && b != p(2.0 * t)))
                {
                    return Err(format!("plateau broken at t={t}: {b} vs {plateau}"));
                }
                prev = b;
            }
            for knot in [lambda, gamma * lambda] {
                let gap = (p(knot * (1.0 + 1e-12)) - p(knot * (1.0 - 1e-12))).abs();
                if gap > 1e-9 {
                    return Err(format!("jump {gap} at knot {knot}"));
                }
            }
        }
    }
    // chord inequality on random triples
    run(
        512,
        (0.0f64..10.0, 0.0f64..10.0, 0.0f64..1.0, 0.01f64..3.0, 2.05f64..8.0),
        |(a, b, w, lambda, gamma)| {
            let (lo, hi) = (a.min(b), a.max(b));
            let mid = lo + w * (hi - lo);
            let p = |t: f64| scad_value(t, lambda, gamma).unwrap();
            prop_assert!(p(mid) + 1e-12 >= (1.0 - w) * p(lo) + w * p(hi));
            Ok(())
        },
    )
}

fn random_graph(n: usize, edges: &[(usize, usize)]) -> AdjacencyGraph {
    let mut g = AdjacencyGraph::empty(n);
    // a path keeps every pair reachable
    for i in 1..n {
        g.add_edge(i - 1, i).unwrap();
    }
    for &(a, b) in edges {
        if a % n != b % n {
            g.add_edge(a % n, b % n).unwrap();
        }
    }
    g
}

/// Spatial weights fall strictly with neighbor order, coefficient-based
/// weights fall with the gap between initial estimates, and every weight
/// lies in `(0, 1]` and shrinks as `psi` grows.
pub fn weight_monotonicity() -> Check {
    let strategy = (
        3usize..12,
        proptest::collection::vec((0usize..12, 0usize..12), 0..20),
        0.05f64..3.0,
        proptest::collection::vec(-3.0f64..3.0, 24),
    );
    run(128, strategy, |(n, edges, psi, raw)| {
        let g = random_graph(n, &edges);
        let a = neighbor_orders(&g);
        let beta = DMatrix::from_fn(n, 2, |i, l| raw[2 * i + l]);
        let gap = |i: usize, j: usize| (beta.row(i) - beta.row(j)).norm();
        let get = |kind, psi| compute_weights(n, &WeightSpec::new(kind, psi), Some(&a), Some(&beta)).unwrap();
        let (sp, reg, regsp) = (
            get(WeightKind::Sp, psi),
            get(WeightKind::Reg, psi),
            get(WeightKind::RegSp, psi),
        );
        let (sp2, reg2) = (get(WeightKind::Sp, 2.0 * psi), get(WeightKind::Reg, 2.0 * psi));
        let all: Vec<(usize, usize)> = pairs_of(n).collect();
        for &(i, j) in &all {
            for w in [&sp, &reg, &regsp] {
                let c = w.get(i, j);
                prop_assert!(c > 0.0 && c <= 1.0);
            }
            prop_assert!(sp2.get(i, j) <= sp.get(i, j));
            prop_assert!(reg2.get(i, j) <= reg.get(i, j));
            if a.get(i, j) == 1 {
                prop_assert_eq!(sp.get(i, j), 1.0);
                prop_assert_eq!(regsp.get(i, j), 1.0);
            }
            for &(k, l) in &all {
                let (oij, okl) = (a.get(i, j), a.get(k, l));
                if oij < okl {
                    prop_assert!(sp.get(i, j) > sp.get(k, l));
                } else if oij == okl {
                    prop_assert_eq!(sp.get(i, j), sp.get(k, l));
                    if oij > 1 && gap(i, j) < gap(k, l) {
                        prop_assert!(regsp.get(i, j) >= regsp.get(k, l));
                    }
                }
                if gap(i, j) < gap(k, l) {
                    prop_assert!(reg.get(i, j) >= reg.get(k, l));
                }
            }
        }
        Ok(())
    })
}

/// Group extraction recovers any planted partition from exact pairwise
/// differences, ignores how groups are labelled, and closes chains of
/// fused pairs transitively.
pub fn extract_groups_partition_equivalence() -> Check {
    let strategy = (
        proptest::collection::vec(0usize..5, 2..16),
        1usize..4,
        proptest::collection::vec(-0.2f64..0.2, 15),
        Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
    );
    let chain = {
        // delta_01 = delta_12 = 0 but delta_02 != 0: transitivity joins all three
        let delta = [0.0, 1.0, 0.0];
        let part = extract_groups(3, 1, &delta, 1e-6);
        if part.k() != 1 {
            return Err("fused chain not closed transitively".into());
        }
        Ok::<(), String>(())
    };
    chain?;
    run(256, strategy, |(labels, p, jitter, relabel)| {
        let n = labels.len();
        let truth = Partition::from_labels(&labels).unwrap();
        let center = |g: usize, l: usize| g as f64 * 1.5 + jitter[(g * 3 + l) % 15];
        let beta: Vec<f64> = (0..n)
            .flat_map(|i| (0..p).map(move |l| (i, l)))
            .map(|(i, l)| center(labels[i], l))
            .collect();
        let delta: Vec<f64> = pairs_of(n)
            .flat_map(|(i, j)| (0..p).map(move |l| (i, j, l)))
            .map(|(i, j, l)| beta[i * p + l] - beta[j * p + l])
            .collect();
        let found = extract_groups(n, p, &delta, 1e-6);
        prop_assert!(found.same_grouping(&truth));
        let renamed: Vec<usize> = labels.iter().map(|&g| relabel[g]).collect();
        prop_assert!(found.same_grouping(&Partition::from_labels(&renamed).unwrap()));
        Ok(())
    })
}

/// Relabelling locations relabels the fit: same groups, same coefficients.
pub fn fit_permutation_equivariance() -> Check {
    let strategy = (
        4usize..8,
        any::<u64>(),
        0usize..2,
        1usize..3,
        prop_oneof![Just(0.05), Just(0.3), Just(1.0)],
        Just((0..8).collect::<Vec<usize>>()).prop_shuffle(),
    );
    run(48, strategy, |(n, seed, q, p, lambda, perm8)| {
        let ds = two_level_dataset(seed, n, 6, q, p, 0.3);
        // restrict the permutation of 0..8 to 0..n, keeping relative order
        let order: Vec<usize> = perm8.into_iter().filter(|&v| v < n).collect();
        let mut perm = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }
        let mut blocks = ds.blocks().to_vec();
        for (i, b) in ds.blocks().iter().enumerate() {
            blocks[perm[i]] = b.clone();
        }
        let moved = Dataset::with_dims(blocks, q, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
        let c: Vec<f64> = pairs_of(n).map(|_| rng.random_range(0.2..1.0)).collect();
        let w = WeightMatrix::from_pairs(n, c.clone()).unwrap();
        let cw: Vec<f64> = pairs_of(n)
            .map(|(a, b)| {
                let (oa, ob) = (order[a], order[b]);
                w.get(oa, ob)
            })
            .collect();
        let wm = WeightMatrix::from_pairs(n, cw).unwrap();
        let config = SolverConfig {
            tol: 1e-10,
            max_iter: 20_000,
            ..SolverConfig::default()
        };
        let f0 = fit(&ds, &w, lambda, config, None).unwrap();
        let f1 = fit(&moved, &wm, lambda, config, None).unwrap();
        prop_assert!(f0.partition.permuted(&perm).same_grouping(&f1.partition));
        for (i, &pi) in perm.iter().enumerate() {
            let d = (f0.coefficients.beta.row(i) - f1.coefficients.beta.row(pi)).amax();
            prop_assert!(d < 1e-6, "beta row {} differs by {}", i, d);
        }
        prop_assert!((&f0.coefficients.eta - &f1.coefficients.eta).amax() < 1e-6);
        Ok(())
    })
}

/// At fixed coefficients the criterion rises strictly with the number of
/// groups, so of two fits with equal residuals the coarser one wins.
pub fn bic_monotone_in_k() -> Check {
    run(
        128,
        (2usize..30, 2usize..8, 0usize..4, 1usize..4, any::<u64>()),
        |(n, ni, q, p, seed)| {
            let ds = random_dataset(seed, n, ni.max(q + 1), q, p);
            let eta = DVector::from_element(q, 0.1);
            let beta = DMatrix::from_fn(n, p, |i, l| ((i + l) % 3) as f64 * 0.2);
            let mut prev = f64::NEG_INFINITY;
            for k in 1..=n {
                let b = bic(&ds, &eta, &beta, k);
                prop_assert!(b.is_finite());
                prop_assert!(b > prev, "k={}: {} <= {}", k, b, prev);
                prev = b;
            }
            Ok(())
        },
    )
}

pub type Suite = (&'static str, fn() -> Check);

pub const SUITES: [Suite; 5] = [
    ("penalty concavity and plateau", penalty_concavity_plateau),
    ("weight monotonicity", weight_monotonicity),
    (
        "extract_groups partition equivalence",
        extract_groups_partition_equivalence,
    ),
    ("fit permutation equivariance", fit_permutation_equivariance),
    ("BIC monotone in K", bic_monotone_in_k),
];
