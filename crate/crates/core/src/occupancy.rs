//! State marginals, occupancy measures and performance vectors.

use crate::error::Result;
use crate::measure::{PieceMeasure, StatePartition};
use crate::model::AtomlessMdp;
use crate::policy::{DeterministicPolicy, StationaryPolicy};

/// Expected total reward vector.
pub type PerformanceVector = Vec<f64>;

/// Default truncation accuracy (in occupancy mass) for evaluations.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Expected visit counts per (interval, action).
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyMeasure {
    partition: StatePartition,
    masses: Vec<Vec<f64>>,
    truncation: f64,
    steps: usize,
}

impl OccupancyMeasure {
    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    /// `masses()[i][a]` is the occupancy of interval `i` and action `a`.
    pub fn masses(&self) -> &[Vec<f64>] {
        &self.masses
    }

    /// Certified bound on the total mass dropped by truncating the series.
    pub fn truncation_error(&self) -> f64 {
        self.truncation
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state_marginal(&self) -> PieceMeasure {
        let m = self.masses.iter().map(|row| row.iter().sum()).collect();
        PieceMeasure::new(self.partition.clone(), m).expect("nonnegative masses")
    }

    /// Total mass, i.e. the expected absorption time.
    pub fn total(&self) -> f64 {
        self.masses.iter().flatten().sum()
    }

    /// Total variation distance on the common refinement of both partitions.
    pub fn total_variation(&self, other: &OccupancyMeasure) -> f64 {
        let common = self.partition.refine(&other.partition);
        let pa = common.parent_map(&self.partition);
        let pb = common.parent_map(&other.partition);
        let mut tv = 0.0;
        for i in 0..common.len() {
            let wa = common.width(i) / self.partition.width(pa[i]);
            let wb = common.width(i) / other.partition.width(pb[i]);
            let (ra, rb) = (&self.masses[pa[i]], &other.masses[pb[i]]);
            for a in 0..ra.len().max(rb.len()) {
                let x = ra.get(a).copied().unwrap_or(0.0) * wa;
                let y = rb.get(a).copied().unwrap_or(0.0) * wb;
                tv += (x - y).abs();
            }
        }
        tv
    }

    /// `sum r(x, a) Q(dx, da)`.
    pub fn performance(&self, m: &AtomlessMdp) -> PerformanceVector {
        let cells = self.partition.parent_map(m.grid());
        let mut v = vec![0.0; m.criteria()];
        for (i, row) in self.masses.iter().enumerate() {
            for (a, &q) in row.iter().enumerate() {
                if q != 0.0 {
                    for (vk, rk) in v.iter_mut().zip(m.reward(cells[i], a)) {
                        *vk += q * rk;
                    }
                }
            }
        }
        v
    }
}

/// Intervals of a partition refined with the grid, with their cell and
/// their share of the cell's length.
#[derive(Clone, Debug)]
pub(crate) struct Refined {
    pub partition: StatePartition,
    pub cell: Vec<usize>,
    pub weight: Vec<f64>,
}

pub(crate) fn refine_with_grid(m: &AtomlessMdp, part: &StatePartition) -> Refined {
    let partition = m.grid().refine(part);
    let cell = partition.parent_map(m.grid());
    let weight = (0..partition.len())
        .map(|i| partition.width(i) / m.grid().width(cell[i]))
        .collect();
    Refined { partition, cell, weight }
}

/// Effective action distribution of every cell: the length-weighted average
/// of the policy over the cell.
pub(crate) fn cell_mixture(m: &AtomlessMdp, r: &Refined, probs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut mix = vec![vec![0.0; m.action_count()]; m.cells()];
    for (i, row) in probs.iter().enumerate() {
        for (a, p) in row.iter().enumerate() {
            mix[r.cell[i]][a] += r.weight[i] * p;
        }
    }
    mix
}

pub(crate) fn deterministic_mixture(m: &AtomlessMdp, phi: &DeterministicPolicy) -> Vec<Vec<f64>> {
    let r = refine_with_grid(m, phi.partition());
    let mut mix = vec![vec![0.0; m.action_count()]; m.cells()];
    for (i, a) in phi.actions_on(&r.partition).into_iter().enumerate() {
        mix[r.cell[i]][a] += r.weight[i];
    }
    mix
}

fn cell_step(m: &AtomlessMdp, mix: &[Vec<f64>], q: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; q.len()];
    for (c, &mass) in q.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (a, &p) in mix[c].iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(d, k) in &m.transition(c, a).to {
                next[d] += mass * p * k;
            }
        }
    }
    next
}

/// State occupancy per cell, its truncation bound and the number of steps.
pub(crate) fn cell_occupancy(m: &AtomlessMdp, mix: &[Vec<f64>], tol: f64) -> Result<(Vec<f64>, f64, usize)> {
    let l = m.certificate()?.l();
    let mut q = m.initial().to_vec();
    let mut acc = vec![0.0; q.len()];
    let mut steps = 0;
    loop {
        for (a, x) in acc.iter_mut().zip(&q) {
            *a += x;
        }
        steps += 1;
        let next = cell_step(m, mix, &q);
        let alive: f64 = next.iter().sum();
        if alive * l <= tol || alive == 0.0 {
            return Ok((acc, alive * l, steps));
        }
        q = next;
    }
}

pub(crate) fn cell_performance(m: &AtomlessMdp, mix: &[Vec<f64>], q: &[f64]) -> PerformanceVector {
    let mut v = vec![0.0; m.criteria()];
    for (c, row) in mix.iter().enumerate() {
        for (a, &p) in row.iter().enumerate() {
            if p == 0.0 || q[c] == 0.0 {
                continue;
            }
            for (vk, rk) in v.iter_mut().zip(m.reward(c, a)) {
                *vk += q[c] * p * rk;
            }
        }
    }
    v
}

/// Largest cell count for which dense linear solves replace series summation.
pub(crate) const DENSE_LIMIT: usize = 512;

/// State occupancy per cell, solved directly from `q = mu + P^T q` when the
/// grid is small, otherwise summed to near machine precision.
pub(crate) fn cell_occupancy_exact(m: &AtomlessMdp, mix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = m.cells();
    if n <= DENSE_LIMIT {
        let mut a = nalgebra::DMatrix::<f64>::identity(n, n);
        for (c, row) in mix.iter().enumerate() {
            for (act, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for &(d, k) in &m.transition(c, act).to {
                    a[(d, c)] -= p * k;
                }
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(m.initial());
        if let Some(q) = a.lu().solve(&rhs) {
            if q.iter().all(|x| x.is_finite()) {
                return Ok(q.iter().map(|x| x.max(0.0)).collect());
            }
        }
    }
    Ok(cell_occupancy(m, mix, 1e-15)?.0)
}

pub(crate) fn exact_performance_deterministic(m: &AtomlessMdp, phi: &DeterministicPolicy) -> Result<PerformanceVector> {
    let mix = deterministic_mixture(m, phi);
    let q = cell_occupancy_exact(m, &mix)?;
    Ok(cell_performance(m, &mix, &q))
}

/// One step of the state marginal: `q_{n+1}(Y) = sum p(Y|x,a) pi(a|x) q_n(dx)`,
/// returned on the grid.
pub fn marginal_step(m: &AtomlessMdp, pi: &StationaryPolicy, q: &PieceMeasure) -> Result<PieceMeasure> {
    m.check_stationary(pi)?;
    let common = m.grid().refine(pi.partition()).refine(q.partition());
    let qf = q.refine_to(&common);
    let cells = common.parent_map(m.grid());
    let probs = pi.probs_on(&common);
    let mut next = vec![0.0; m.cells()];
    for i in 0..common.len() {
        let mass = qf.masses()[i];
        if mass == 0.0 {
            continue;
        }
        for (a, &p) in probs[i].iter().enumerate() {
            if p > 0.0 {
                for &(d, k) in &m.transition(cells[i], a).to {
                    next[d] += mass * p * k;
                }
            }
        }
    }
    PieceMeasure::new(m.grid().clone(), next)
}

/// Occupancy measure `Q^pi`, summing marginals until the certified tail is below `tol`.
pub fn occupancy(m: &AtomlessMdp, pi: &StationaryPolicy, tol: f64) -> Result<OccupancyMeasure> {
    m.check_stationary(pi)?;
    let r = refine_with_grid(m, pi.partition());
    let probs = pi.probs_on(&r.partition);
    let mix = cell_mixture(m, &r, &probs);
    let (q, truncation, steps) = cell_occupancy(m, &mix, tol)?;
    let masses = probs
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().map(|p| q[r.cell[i]] * r.weight[i] * p).collect())
        .collect();
    Ok(OccupancyMeasure { partition: r.partition, masses, truncation, steps })
}

pub fn occupancy_deterministic(m: &AtomlessMdp, phi: &DeterministicPolicy, tol: f64) -> Result<OccupancyMeasure> {
    occupancy(m, &phi.to_stationary(m.action_count()), tol)
}

/// `v^pi`; each coordinate is accurate to `tol * max|r|`.
pub fn performance(m: &AtomlessMdp, pi: &StationaryPolicy, tol: f64) -> Result<PerformanceVector> {
    m.check_stationary(pi)?;
    let r = refine_with_grid(m, pi.partition());
    let mix = cell_mixture(m, &r, &pi.probs_on(&r.partition));
    let (q, _, _) = cell_occupancy(m, &mix, tol)?;
    Ok(cell_performance(m, &mix, &q))
}

pub fn performance_deterministic(m: &AtomlessMdp, phi: &DeterministicPolicy, tol: f64) -> Result<PerformanceVector> {
    m.check_deterministic(phi)?;
    let mix = deterministic_mixture(m, phi);
    let (q, _, _) = cell_occupancy(m, &mix, tol)?;
    Ok(cell_performance(m, &mix, &q))
}

/// Stationary policy with the same occupancy measure: `sigma(a|x) = Q(dx, a) / Q(dx, A)`.
/// Intervals without mass get the lowest available action.
pub fn policy_from_occupancy(m: &AtomlessMdp, q: &OccupancyMeasure) -> StationaryPolicy {
    let r = refine_with_grid(m, q.partition());
    let parent = r.partition.parent_map(q.partition());
    let probs = (0..r.partition.len())
        .map(|i| {
            let row = &q.masses()[parent[i]];
            let total: f64 = row.iter().sum();
            let mut out = vec![0.0; m.action_count()];
            if total > 0.0 {
                for (a, x) in row.iter().enumerate() {
                    out[a] = x / total;
                }
            } else {
                out[m.available(r.cell[i]).first().unwrap()] = 1.0;
            }
            out
        })
        .collect();
    StationaryPolicy::new(r.partition, probs).expect("rows are distributions").canonical()
}

/// `|q - mu - step(q)|(X)` for the state marginal of `occ` under `pi`.
pub fn fixed_point_residual(m: &AtomlessMdp, pi: &StationaryPolicy, occ: &OccupancyMeasure) -> Result<f64> {
    let q = occ.state_marginal();
    let stepped = marginal_step(m, pi, &q)?;
    let q_grid = q.coarsen_to(m.grid());
    Ok(q_grid
        .masses()
        .iter()
        .zip(m.initial())
        .zip(stepped.masses())
        .map(|((q, mu), s)| (q - mu - s).abs())
        .sum())
}
