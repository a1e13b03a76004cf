//! Seeded random models and policies for tests and the `random` builtin.

use rand::Rng;

use super::{AtomlessMdp, ModelKind, ModelParts, Transition};
use crate::measure::StatePartition;
use crate::policy::{ActionSet, DeterministicPolicy, StationaryPolicy};

#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub cells: usize,
    pub actions: usize,
    pub criteria: usize,
    /// Every row absorbs at least this much, which makes the model uniformly absorbing.
    pub min_absorb: f64,
    pub max_absorb: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec { cells: 6, actions: 3, criteria: 2, min_absorb: 0.1, max_absorb: 0.5 }
    }
}

fn random_partition<R: Rng>(rng: &mut R, cells: usize) -> StatePartition {
    loop {
        let mut b: Vec<f64> = (1..cells).map(|_| rng.gen_range(0.02..0.98)).collect();
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut breaks = vec![0.0];
        breaks.extend(b);
        breaks.push(1.0);
        if breaks.windows(2).all(|w| w[1] - w[0] > 0.01) {
            return StatePartition::new(breaks).unwrap();
        }
    }
}

pub fn random_model<R: Rng>(rng: &mut R, spec: &RandomSpec) -> AtomlessMdp {
    let m = spec.cells.max(1);
    let na = spec.actions.max(1);
    let grid = random_partition(rng, m);
    let available: Vec<ActionSet> = (0..m)
        .map(|_| loop {
            let mut s = ActionSet::empty();
            for a in 0..na {
                if rng.gen_bool(0.75) {
                    s.insert(a);
                }
            }
            if !s.is_empty() {
                break s;
            }
        })
        .collect();
    let mut kernel = Vec::with_capacity(m * na);
    let mut rewards = Vec::with_capacity(m * na);
    for _ in 0..m {
        for _ in 0..na {
            let absorb = if spec.max_absorb > spec.min_absorb {
                rng.gen_range(spec.min_absorb..spec.max_absorb)
            } else {
                spec.min_absorb
            };
            let w: Vec<f64> = (0..m).map(|_| if rng.gen_bool(0.7) { rng.gen::<f64>() } else { 0.0 }).collect();
            let s: f64 = w.iter().sum();
            let to: Vec<(usize, f64)> = if s > 0.0 {
                w.iter().enumerate().filter(|(_, x)| **x > 0.0).map(|(d, x)| (d, x / s * (1.0 - absorb))).collect()
            } else {
                vec![(rng.gen_range(0..m), 1.0 - absorb)]
            };
            let stay: f64 = to.iter().map(|(_, x)| x).sum();
            kernel.push(Transition { to, absorb: 1.0 - stay });
            rewards.push((0..spec.criteria.max(1)).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }
    }
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut initial: Vec<f64> = w.iter().map(|x| x / s).collect();
    let rest: f64 = initial[1..].iter().sum();
    initial[0] = 1.0 - rest;
    AtomlessMdp::from_parts(ModelParts {
        grid,
        action_count: na,
        available,
        kernel,
        rewards,
        initial,
        kind: ModelKind::Absorbing,
    })
    .expect("random models are valid")
}

/// Random stationary policy whose partition cuts each grid cell into up to
/// `1 + extra` pieces.
pub fn random_stationary<R: Rng>(rng: &mut R, m: &AtomlessMdp, extra: usize) -> StationaryPolicy {
    let (part, cells) = random_refinement(rng, m, extra);
    let probs = cells
        .iter()
        .map(|&c| {
            let avail = m.available(c);
            let mut row = vec![0.0; m.action_count()];
            for a in avail.iter() {
                row[a] = rng.gen_range(0.05..1.0);
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
            row
        })
        .collect();
    StationaryPolicy::new(part, probs).unwrap()
}

pub fn random_deterministic<R: Rng>(rng: &mut R, m: &AtomlessMdp, extra: usize) -> DeterministicPolicy {
    let (part, cells) = random_refinement(rng, m, extra);
    let actions = cells
        .iter()
        .map(|&c| {
            let avail = m.available(c).to_vec();
            avail[rng.gen_range(0..avail.len())]
        })
        .collect();
    DeterministicPolicy::new(part, actions).unwrap()
}

fn random_refinement<R: Rng>(rng: &mut R, m: &AtomlessMdp, extra: usize) -> (StatePartition, Vec<usize>) {
    let mut part = m.grid().clone();
    for c in 0..m.cells() {
        let (lo, hi) = m.grid().interval(c);
        for _ in 0..rng.gen_range(0..=extra) {
            part = part.with_breakpoint(rng.gen_range(lo..hi));
        }
    }
    let cells = part.parent_map(m.grid());
    (part, cells)
}
