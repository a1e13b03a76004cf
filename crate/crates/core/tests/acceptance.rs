//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use atomless::derandomize::{alpha_hat, derandomize, distance_to_performance_set, make_context, mix_pair};
use atomless::lyapunov::{brute_force_range, convex_hull_2d, find_set, range_hull, VectorMeasure};
use atomless::measure::{PieceMeasure, StatePartition};
use atomless::model::{
    discounted_to_absorbing, one_cell_discounted, random_deterministic, random_model, random_stationary,
    weighted_transform, AtomlessMdp, EscapeChain, RandomSpec,
};
use atomless::occupancy::{
    fixed_point_residual, occupancy, occupancy_deterministic, performance, performance_deterministic,
    policy_from_occupancy,
};
use atomless::policy::DeterministicPolicy;
use atomless::scalar_dp::{support, SubmodelSpec};

const EVAL_TOL: f64 = 1e-13;

fn report(id: u32, ok: bool, detail: String) {
    println!("criterion {id} {}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn spec_for<R: Rng>(rng: &mut R, criteria: usize) -> RandomSpec {
    RandomSpec {
        cells: rng.gen_range(2..=8),
        actions: rng.gen_range(2..=3),
        criteria,
        min_absorb: 0.1,
        max_absorb: 0.5,
    }
}

fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l = norm(&v);
        if l > 0.1 && l <= 1.0 {
            return v.iter().map(|x| x / l).collect();
        }
    }
}

#[test]
fn criterion_1_derandomization() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_ratio, mut slowest) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for inst in 0..25 {
        let criteria = rng.gen_range(1..=3);
        let spec = spec_for(&mut rng, criteria);
        let m = random_model(&mut rng, &spec);
        let pi = random_stationary(&mut rng, &m, 2);
        let v_pi = performance(&m, &pi, EVAL_TOL).unwrap();
        let tol = 1e-5 * (1.0 + norm(&v_pi));
        let t = Instant::now();
        match derandomize(&m, &pi, tol) {
            Ok((phi, _)) => {
                let err = dist(&performance_deterministic(&m, &phi, EVAL_TOL).unwrap(), &v_pi);
                worst_ratio = worst_ratio.max(err / tol);
                if err > tol {
                    failures.push(format!("instance {inst}: error {err:e} > {tol:e}"));
                }
            }
            Err(e) => failures.push(format!("instance {inst}: {e}")),
        }
        let secs = t.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        if secs >= 30.0 {
            failures.push(format!("instance {inst}: {secs:.1} s"));
        }
    }
    report(
        1,
        failures.is_empty(),
        format!("25 instances, worst error/tol {worst_ratio:.3e}, slowest {slowest:.2} s {failures:?}"),
    );
}

#[test]
fn criterion_2_convexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for model in 0..4 {
        let criteria = 2 + model % 2;
        let spec = spec_for(&mut rng, criteria);
        let m = random_model(&mut rng, &spec);
        for k in 0..25 {
            let p0 = random_deterministic(&mut rng, &m, 1);
            let p1 = random_deterministic(&mut rng, &m, 1);
            let lambda = rng.gen::<f64>();
            match mix_pair(&m, &p0, &p1, lambda, 1e-5) {
                Ok((phi, _)) => {
                    let v0 = performance_deterministic(&m, &p0, EVAL_TOL).unwrap();
                    let v1 = performance_deterministic(&m, &p1, EVAL_TOL).unwrap();
                    let target: Vec<f64> = v0.iter().zip(&v1).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
                    let err = dist(&performance_deterministic(&m, &phi, EVAL_TOL).unwrap(), &target);
                    worst = worst.max(err);
                    if err > 1e-5 {
                        failures.push(format!("model {model} triple {k}: {err:e}"));
                    }
                }
                Err(e) => failures.push(format!("model {model} triple {k}: {e}")),
            }
        }
    }
    report(2, failures.is_empty(), format!("100 triples on 4 models, worst error {worst:.3e} {failures:?}"));
}

#[test]
fn criterion_3_occupancy_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tol = 1e-10;
    let (mut worst_res, mut worst_tv, mut worst_excess) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for _ in 0..20 {
        let m = random_model(&mut rng, &RandomSpec { cells: 8, actions: 3, criteria: 2, ..RandomSpec::default() });
        let pi = random_stationary(&mut rng, &m, 2);
        let q = occupancy(&m, &pi, tol).unwrap();
        worst_res = worst_res.max(fixed_point_residual(&m, &pi, &q).unwrap());
        worst_excess = worst_excess.max(q.total() - m.certificate().unwrap().l());
        let sigma = policy_from_occupancy(&m, &q);
        let q2 = occupancy(&m, &sigma, tol).unwrap();
        worst_tv = worst_tv.max(q.total_variation(&q2));
    }
    let ok = worst_res <= tol && worst_excess <= 0.0 && worst_tv <= 1e-9;
    report(
        3,
        ok,
        format!("residual {worst_res:.3e} (tol {tol:e}), max q(X) - L {worst_excess:.3e}, roundtrip d_TV {worst_tv:.3e}"),
    );
}

#[test]
fn criterion_4_path_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_mass, mut worst_ratio, mut worst_end) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..5 {
        let m = random_model(&mut rng, &RandomSpec { cells: 6, actions: 3, criteria: 2, ..RandomSpec::default() });
        let p0 = random_deterministic(&mut rng, &m, 1);
        let p1 = random_deterministic(&mut rng, &m, 1);
        let ctx = make_context(&m, &p0, &p1).unwrap();
        let q = ctx.q();
        for _ in 0..10 {
            let alpha = rng.gen::<f64>();
            let delta = rng.gen::<f64>() * (1.0 - alpha) * 10f64.powi(-rng.gen_range(0..4));
            let b = ctx.threshold(alpha).unwrap();
            worst_mass = worst_mass.max((q.mass_below(b) - alpha * q.total()).abs());
            let qa = occupancy_deterministic(&m, &ctx.path_policy(alpha).unwrap(), EVAL_TOL).unwrap();
            let qb = occupancy_deterministic(&m, &ctx.path_policy(alpha + delta).unwrap(), EVAL_TOL).unwrap();
            let bound = ctx.tv_modulus(delta).unwrap();
            worst_ratio = worst_ratio.max(qa.total_variation(&qb) / bound);
        }
        let v0 = performance_deterministic(&m, &p0, EVAL_TOL).unwrap();
        let v1 = performance_deterministic(&m, &p1, EVAL_TOL).unwrap();
        let e0 = performance_deterministic(&m, &ctx.path_policy(0.0).unwrap(), EVAL_TOL).unwrap();
        let e1 = performance_deterministic(&m, &ctx.path_policy(1.0).unwrap(), EVAL_TOL).unwrap();
        worst_end = worst_end.max(dist(&v0, &e0)).max(dist(&v1, &e1));
    }
    let ok = worst_mass <= 1e-12 && worst_ratio <= 1.0 && worst_end <= 1e-12;
    report(
        4,
        ok,
        format!("mass law {worst_mass:.3e}, max d_TV/modulus {worst_ratio:.3e} over 50 pairs, endpoints {worst_end:.3e}"),
    );
}

#[test]
fn criterion_5_closed_forms() {
    let mut worst_beta = 0.0f64;
    for beta in [0.0, 0.5, 0.9] {
        let m = discounted_to_absorbing(&one_cell_discounted(beta, vec![1.0])).unwrap();
        let et = occupancy_deterministic(&m, &DeterministicPolicy::constant(0), 1e-15).unwrap().total();
        worst_beta = worst_beta.max((et - 1.0 / (1.0 - beta)).abs());
        worst_beta = worst_beta.max((m.certificate().unwrap().l() - 1.0 / (1.0 - beta)).abs());
    }
    let mut worst_ex = 0.0f64;
    for n_max in [4, 8, 10] {
        let ex = EscapeChain::new(n_max).unwrap();
        worst_ex = worst_ex.max((ex.mdp().expected_absorption_time(&ex.phi_infinity(), 1e-15) - 2.0).abs());
        for n in 0..=n_max {
            let et = ex.mdp().expected_absorption_time(&ex.phi(n), 1e-15);
            worst_ex = worst_ex.max((et - (3.0 - 2f64.powi(1 - n as i32))).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = random_model(&mut rng, &RandomSpec { cells: 8, actions: 3, criteria: 2, min_absorb: 0.5, max_absorb: 0.7 });
    let w: Vec<f64> = (0..m.cells()).map(|_| rng.gen_range(1.0..2.0)).collect();
    let t = weighted_transform(&m, &w).unwrap();
    let mut worst_w = 0.0f64;
    for _ in 0..20 {
        let phi = random_deterministic(&mut rng, &m, 2);
        let a = performance_deterministic(&m, &phi, EVAL_TOL).unwrap();
        let b = performance_deterministic(&t, &phi, EVAL_TOL).unwrap();
        worst_w = worst_w.max(dist(&a, &b));
    }
    let ok = worst_beta <= 1e-12 && worst_ex <= 1e-12 && worst_w <= 1e-9;
    report(
        5,
        ok,
        format!("discount E T error {worst_beta:.3e}, escape chain error {worst_ex:.3e}, weighted transform {worst_w:.3e}"),
    );
}

fn random_vector_measure<R: Rng>(rng: &mut R, cells: usize) -> VectorMeasure {
    let mut breaks: Vec<f64> = (1..cells).map(|_| rng.gen_range(0.02..0.98)).collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.insert(0, 0.0);
    breaks.push(1.0);
    breaks.dedup();
    let part = StatePartition::new(breaks).unwrap();
    let raw: Vec<f64> = (0..part.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut masses: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let rest: f64 = masses[1..].iter().sum();
    masses[0] = 1.0 - rest;
    let dens = (0..part.len()).map(|_| vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)]).collect();
    VectorMeasure::new(PieceMeasure::new(part, masses).unwrap(), dens).unwrap()
}

#[test]
fn criterion_6_lyapunov() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut outside = 0usize;
    let mut worst_find = 0.0f64;
    let mut failures = Vec::new();
    for cells in [4usize, 7, 10] {
        let vm = random_vector_measure(&mut rng, cells);
        let hull = range_hull(&vm, 360).unwrap();
        let brute = brute_force_range(&vm).unwrap();
        outside += brute.points.iter().filter(|p| !hull.in_outer(p, 1e-12)).count();
        if cells == 10 {
            let inner = convex_hull_2d(&hull.vertices);
            for k in 0..20 {
                let w: Vec<f64> = inner.iter().map(|_| rng.gen::<f64>().powi(3)).collect();
                let s: f64 = w.iter().sum();
                let target: Vec<f64> =
                    (0..2).map(|j| inner.iter().zip(&w).map(|(p, wi)| p[j] * wi / s).sum()).collect();
                match find_set(&vm, &target, 1e-6) {
                    Ok(b) => {
                        let err = dist(&vm.measure_of(&b), &target);
                        worst_find = worst_find.max(err);
                        if err > 1e-6 {
                            failures.push(format!("target {k}: {err:e}"));
                        }
                    }
                    Err(e) => failures.push(format!("target {k}: {e}")),
                }
            }
        }
    }
    let vm = VectorMeasure::linear_example(4096);
    let (anchor_err, exact_err) = match find_set(&vm, &[0.5, 0.5], 1e-6) {
        Ok(b) => {
            let exact: Vec<f64> = vec![b.length(), b.intervals().iter().map(|(a, c)| c * c - a * a).sum()];
            (dist(&vm.measure_of(&b), &[0.5, 0.5]), dist(&exact, &[0.5, 0.5]))
        }
        Err(e) => {
            failures.push(format!("anchor: {e}"));
            (f64::INFINITY, f64::INFINITY)
        }
    };
    let ok = outside == 0 && failures.is_empty() && anchor_err <= 1e-6 && exact_err <= 1e-6;
    report(
        6,
        ok,
        format!(
            "brute-force points outside outer polytope {outside}, worst find error {worst_find:.3e}, \
             (0.5, 0.5) anchor error {anchor_err:.3e} (exact 2x integral {exact_err:.3e}) {failures:?}"
        ),
    );
}

#[test]
fn criterion_7_g_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = 1e-9;
    let m: AtomlessMdp = random_model(&mut rng, &RandomSpec { cells: 5, actions: 3, criteria: 2, ..RandomSpec::default() });
    let p0 = random_deterministic(&mut rng, &m, 1);
    let p1 = random_deterministic(&mut rng, &m, 1);
    let ctx = make_context(&m, &p0, &p1).unwrap();
    let v0 = performance_deterministic(&m, &p0, EVAL_TOL).unwrap();
    let v1 = performance_deterministic(&m, &p1, EVAL_TOL).unwrap();
    let target: Vec<f64> = v0.iter().zip(&v1).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
    let mut worst_drop = 0.0f64;
    let mut prev = 0.0f64;
    let mut last = 0.0;
    for k in 0..=100 {
        let alpha = k as f64 / 100.0;
        let g = distance_to_performance_set(&m, &ctx.frozen(alpha).unwrap(), &target, tol).unwrap().distance;
        worst_drop = worst_drop.max(prev - g);
        prev = g;
        last = g;
    }
    let ah = alpha_hat(&ctx, &v1, tol).unwrap();
    let ok = worst_drop <= 2.0 * tol && ah == 1.0;
    report(
        7,
        ok,
        format!("largest decrease of G on the 0.01 grid {worst_drop:.3e} (G(1) = {last:.3e}), alpha_hat(v(phi1)) = {ah}"),
    );
}

#[test]
fn criterion_8_support_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_gap, mut worst_sub) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..3 {
        let n = rng.gen_range(2..=3);
        let spec = spec_for(&mut rng, n);
        let m = random_model(&mut rng, &spec);
        let full = SubmodelSpec::full(&m);
        for _ in 0..50 {
            let b = unit_vector(&mut rng, n);
            let pi = random_stationary(&mut rng, &m, 2);
            let (h, _) = support(&m, &full, &b, 1e-12).unwrap();
            let v = performance(&m, &pi, EVAL_TOL).unwrap();
            worst_gap = worst_gap.min(h - dot(&b, &v));
            let b1 = unit_vector(&mut rng, n);
            let b2 = unit_vector(&mut rng, n);
            let s: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| x + y).collect();
            let h1 = support(&m, &full, &b1, 1e-12).unwrap().0;
            let h2 = support(&m, &full, &b2, 1e-12).unwrap().0;
            let hs = support(&m, &full, &s, 1e-12).unwrap().0;
            worst_sub = worst_sub.max(hs - h1 - h2);
        }
    }
    let ok = worst_gap >= -1e-9 && worst_sub <= 1e-9;
    report(8, ok, format!("min h(b) - <b, v> {worst_gap:.3e}, max h(b1+b2) - h(b1) - h(b2) {worst_sub:.3e}"));
}
