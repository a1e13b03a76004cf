use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use atomless::measure::{PieceMeasure, StatePartition};
use atomless::model::{random_deterministic, random_model, random_stationary, weighted_transform, AtomlessMdp, RandomSpec};
use atomless::occupancy::{occupancy_deterministic, performance, performance_deterministic};
use atomless::policy::{AnyPolicy, DeterministicPolicy};
use atomless::scalar_dp::{conserving_submodel, default_eta, value_iteration, SubmodelSpec};

fn model(seed: u64, cells: usize, criteria: usize) -> AtomlessMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_model(&mut rng, &RandomSpec { cells, actions: 3, criteria, ..RandomSpec::default() })
}

/// Grid-aligned deterministic policy picking the `k`-th available action per cell.
fn grid_policy(m: &AtomlessMdp, picks: &[usize]) -> DeterministicPolicy {
    let acts = (0..m.cells())
        .map(|c| {
            let av = m.available(c).to_vec();
            av[picks[c % picks.len()] % av.len()]
        })
        .collect();
    DeterministicPolicy::new(m.grid().clone(), acts).unwrap()
}

/// Occupancy per cell by Gauss-Seidel sweeps on `q = mu + P^T q`.
fn oracle_occupancy(m: &AtomlessMdp, phi: &DeterministicPolicy) -> Vec<f64> {
    let n = m.cells();
    let acts = phi.actions_on(m.grid());
    let mut q = m.initial().to_vec();
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for c in 0..n {
            let mut inflow = m.initial()[c];
            for (src, &a) in acts.iter().enumerate() {
                for &(d, w) in &m.transition(src, a).to {
                    if d == c {
                        inflow += q[src] * w;
                    }
                }
            }
            change = change.max((inflow - q[c]).abs());
            q[c] = inflow;
        }
        if change < 1e-15 {
            break;
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn occupancy_matches_oracle(seed in 0u64..1000, cells in 1usize..9, picks in prop::collection::vec(0usize..3, 8)) {
        let m = model(seed, cells, 2);
        let phi = grid_policy(&m, &picks);
        let q = oracle_occupancy(&m, &phi);
        let got = occupancy_deterministic(&m, &phi, 1e-13).unwrap().state_marginal();
        let got = got.coarsen_to(m.grid());
        for (a, b) in q.iter().zip(got.masses()) {
            prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        let acts = phi.actions_on(m.grid());
        let v = performance_deterministic(&m, &phi, 1e-13).unwrap();
        for j in 0..2 {
            let oracle: f64 = (0..m.cells()).map(|c| q[c] * m.reward(c, acts[c])[j]).sum();
            prop_assert!((oracle - v[j]).abs() <= 1e-10 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn quantile_inverts_cdf(masses in prop::collection::vec(0.0f64..1.0, 1..10), alpha in 0.0f64..=1.0) {
        prop_assume!(masses.iter().sum::<f64>() > 1e-3);
        let mu = PieceMeasure::new(StatePartition::uniform(masses.len()), masses).unwrap();
        let (lo, hi) = mu.quantile(alpha).unwrap();
        prop_assert!(lo <= hi);
        prop_assert!((mu.mass_below(lo) - alpha * mu.total()).abs() <= 1e-12);
        prop_assert!((mu.mass_below(hi) - alpha * mu.total()).abs() <= 1e-12);
    }

    #[test]
    fn toml_roundtrip(seed in 0u64..1000, cells in 1usize..9) {
        let m = model(seed, cells, 3);
        let back = AtomlessMdp::from_toml(&m.to_toml()).unwrap();
        prop_assert_eq!(back.grid(), m.grid());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = random_stationary(&mut rng, &m, 1);
        let a = performance(&m, &pi, 1e-13).unwrap();
        let b = performance(&back, &pi, 1e-13).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn policy_text_roundtrip(seed in 0u64..1000) {
        let m = model(seed, 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = random_stationary(&mut rng, &m, 2);
        let back = AnyPolicy::parse(&pi.to_text(), m.action_count()).unwrap().into_stationary(m.action_count());
        prop_assert_eq!(back, pi);
        let phi = random_deterministic(&mut rng, &m, 2);
        let back = AnyPolicy::parse(&phi.to_text(), m.action_count()).unwrap().into_deterministic().unwrap();
        prop_assert_eq!(back, phi);
    }
}

#[test]
fn weighted_transform_preserves_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let spec = RandomSpec { cells: 8, actions: 3, criteria: 2, min_absorb: 0.5, max_absorb: 0.8 };
        let m = random_model(&mut rng, &spec);
        let w: Vec<f64> = (0..m.cells()).map(|_| rng.gen_range(1.0..2.0)).collect();
        let t = weighted_transform(&m, &w).unwrap();
        for _ in 0..5 {
            let pi = random_stationary(&mut rng, &m, 1);
            let a = performance(&m, &pi, 1e-13).unwrap();
            let b = performance(&t, &pi, 1e-13).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}

#[test]
fn weighted_transform_rejects_heavy_weights() {
    let m = model(3, 4, 1);
    let mut w = vec![1.0; m.cells()];
    w[0] = 1e-3;
    assert!(weighted_transform(&m, &w).is_err());
}

#[test]
fn optimal_policy_is_conserving() {
    for seed in 0..10 {
        let m = model(seed, 6, 2);
        let full = SubmodelSpec::full(&m);
        let b = [0.6, -0.8];
        let sol = value_iteration(&m, &full, &b, 1e-12).unwrap();
        let v = performance_deterministic(&m, &sol.policy, 1e-13).unwrap();
        let h = b[0] * v[0] + b[1] * v[1];
        assert!((h - sol.h).abs() <= 1e-10, "seed {seed}: {h} vs {}", sol.h);
        let cons = conserving_submodel(&m, &full, &b, &sol.value, default_eta(&m, &b)).unwrap();
        assert!(cons.admits(&sol.policy), "seed {seed}");
    }
}
