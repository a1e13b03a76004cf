//! Ranges of atomless vector measures on `[0, 1]` through one-step MDPs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::derandomize::{distance_to_performance_set, mix_pair};
use crate::error::{Error, Result};
use crate::measure::{PieceMeasure, StatePartition, BREAK_EPS};
use crate::model::{weighted_transform, AtomlessMdp, ModelKind, ModelParts, Transition};
use crate::occupancy::exact_performance_deterministic;
use crate::policy::{ActionSet, DeterministicPolicy};
use crate::scalar_dp::{support, SubmodelSpec};

/// Densities above this trigger the weighted normalization in [`VectorMeasure::as_onestep_mdp`].
const NORMALIZE_ABOVE: f64 = 1e3;

/// `nu(B) = integral over B of r dmu` with `r` constant on the intervals of `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorMeasure {
    base: PieceMeasure,
    densities: Vec<Vec<f64>>,
}

impl VectorMeasure {
    pub fn new(base: PieceMeasure, densities: Vec<Vec<f64>>) -> Result<Self> {
        if (base.total() - 1.0).abs() > 1e-12 {
            return Err(Error::validation("base", format!("total mass {} is not 1", base.total())));
        }
        if densities.len() != base.partition().len() {
            return Err(Error::validation(
                "densities",
                format!("{} rows for {} intervals", densities.len(), base.partition().len()),
            ));
        }
        let n = densities.first().map_or(0, |r| r.len());
        if n == 0 {
            return Err(Error::validation("densities", "at least one component required"));
        }
        for (i, row) in densities.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!("densities[{i}]"), format!("expected {n} components")));
            }
            if row.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::validation(format!("densities[{i}]"), "densities must be finite and nonnegative"));
            }
        }
        Ok(VectorMeasure { base, densities })
    }

    /// Lebesgue measure on `cells` equal cells with densities `(1, 2x)`,
    /// `x` the cell midpoint, so cell integrals of `2x` are exact.
    pub fn linear_example(cells: usize) -> Self {
        let part = StatePartition::uniform(cells.max(1));
        let densities = (0..part.len()).map(|i| vec![1.0, 2.0 * part.midpoint(i)]).collect();
        let base = PieceMeasure::new(part.clone(), (0..part.len()).map(|i| part.width(i)).collect()).unwrap();
        VectorMeasure::new(base, densities).unwrap()
    }

    pub fn base(&self) -> &PieceMeasure {
        &self.base
    }

    pub fn densities(&self) -> &[Vec<f64>] {
        &self.densities
    }

    pub fn criteria(&self) -> usize {
        self.densities[0].len()
    }

    /// `nu(B)` by direct integration.
    pub fn measure_of(&self, set: &IntervalSet) -> Vec<f64> {
        let mut out = vec![0.0; self.criteria()];
        let part = self.base.partition();
        for &(lo, hi) in &set.intervals {
            for i in 0..part.len() {
                let (a, b) = part.interval(i);
                let overlap = hi.min(b) - lo.max(a);
                if overlap > 0.0 {
                    let mass = self.base.masses()[i] * overlap / part.width(i);
                    for (o, d) in out.iter_mut().zip(&self.densities[i]) {
                        *o += mass * d;
                    }
                }
            }
        }
        out
    }

    /// One-step MDP with actions `{0, 1}`, rewards `0` and `r(x)`; the
    /// performance vector of a deterministic policy is `nu` of the set where
    /// it plays 1. Large densities are rescaled by the weight `1 + sum |r|`.
    pub fn as_onestep_mdp(&self) -> Result<AtomlessMdp> {
        let n = self.criteria();
        let cells = self.base.partition().len();
        let mut kernel = Vec::with_capacity(2 * cells);
        let mut rewards = Vec::with_capacity(2 * cells);
        for row in &self.densities {
            kernel.push(Transition::absorbing());
            kernel.push(Transition::absorbing());
            rewards.push(vec![0.0; n]);
            rewards.push(row.clone());
        }
        let m = AtomlessMdp::from_parts(ModelParts {
            grid: self.base.partition().clone(),
            action_count: 2,
            available: vec![ActionSet::all(2); cells],
            kernel,
            rewards,
            initial: self.base.masses().to_vec(),
            kind: ModelKind::Absorbing,
        })?;
        let dmax = self.densities.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
        if dmax > NORMALIZE_ABOVE {
            let w: Vec<f64> = self.densities.iter().map(|r| 1.0 + r.iter().map(|x| x.abs()).sum::<f64>()).collect();
            return weighted_transform(&m, &w);
        }
        Ok(m)
    }
}

/// Finite union of disjoint closed intervals, sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    /// Sorts, drops empty pieces and merges touching ones.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::validation(format!("set[{i}]"), format!("invalid interval [{lo}, {hi}]")));
            }
        }
        intervals.retain(|(lo, hi)| hi > lo);
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match out.last_mut() {
                Some(last) if lo <= last.1 + BREAK_EPS => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        Ok(IntervalSet { intervals: out })
    }

    /// `{x : phi(x) = action}`.
    pub fn from_policy(phi: &DeterministicPolicy, action: usize) -> Self {
        let part = phi.partition();
        let pieces = (0..part.len()).filter(|&i| phi.actions()[i] == action).map(|i| part.interval(i)).collect();
        IntervalSet::new(pieces).expect("partition intervals are valid")
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Rows `lo hi`.
    pub fn to_text(&self) -> String {
        self.intervals.iter().map(|(a, b)| format!("{a:?} {b:?}\n")).collect()
    }
}

/// Inner and outer polytopes of the range of a vector measure.
#[derive(Clone, Debug)]
pub struct RangeHull {
    pub directions: Vec<Vec<f64>>,
    /// `h(d)` per direction.
    pub support: Vec<f64>,
    /// Attained vertex per direction; their hull is the inner polytope.
    pub vertices: Vec<Vec<f64>>,
    /// Hausdorff distance between inner and outer polytopes, when computable
    /// (one or two criteria).
    pub gap: Option<f64>,
}

impl RangeHull {
    /// Whether `y` satisfies every supporting inequality up to `slack`.
    pub fn in_outer(&self, y: &[f64], slack: f64) -> bool {
        self.directions.iter().zip(&self.support).all(|(d, h)| dot(d, y) <= h + slack)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn spread_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(3))
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count.max(3) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut dirs: Vec<Vec<f64>> = (0..n)
                .flat_map(|j| {
                    [1.0, -1.0].map(|s| {
                        let mut e = vec![0.0; n];
                        e[j] = s;
                        e
                    })
                })
                .collect();
            while dirs.len() < count {
                let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = dot(&g, &g).sqrt();
                dirs.push(g.iter().map(|x| x / len).collect());
            }
            dirs
        }
    }
}

/// Andrew's monotone chain; counterclockwise hull without repeated points.
pub fn convex_hull_2d(points: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = points.iter().map(|v| [v[0], v[1]]).collect();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Euclidean distance from `y` to the convex polygon `hull` (counterclockwise).
fn distance_to_polygon(y: [f64; 2], hull: &[[f64; 2]]) -> f64 {
    let seg = |a: [f64; 2], b: [f64; 2]| {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 { (((y[0] - a[0]) * dx + (y[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        ((y[0] - a[0] - t * dx).powi(2) + (y[1] - a[1] - t * dy).powi(2)).sqrt()
    };
    match hull.len() {
        0 => f64::INFINITY,
        1 => seg(hull[0], hull[0]),
        2 => seg(hull[0], hull[1]),
        k => {
            let inside = (0..k).all(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % k]);
                (b[0] - a[0]) * (y[1] - a[1]) - (b[1] - a[1]) * (y[0] - a[0]) >= 0.0
            });
            if inside {
                0.0
            } else {
                (0..k).map(|i| seg(hull[i], hull[(i + 1) % k])).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Supporting values and attained vertices of the range in `direction_count`
/// spread directions.
pub fn range_hull(vm: &VectorMeasure, direction_count: usize) -> Result<RangeHull> {
    let n = vm.criteria();
    if direction_count < n + 1 {
        return Err(Error::Domain(format!("{direction_count} directions for {n} criteria; need at least {}", n + 1)));
    }
    let m = vm.as_onestep_mdp()?;
    let full = SubmodelSpec::full(&m);
    let directions = spread_directions(n, direction_count);
    let mut support_vals = Vec::with_capacity(directions.len());
    let mut vertices = Vec::with_capacity(directions.len());
    for d in &directions {
        let (_, phi) = support(&m, &full, d, 1e-14)?;
        let v = exact_performance_deterministic(&m, &phi)?;
        support_vals.push(dot(d, &v));
        vertices.push(v);
    }
    let gap = match n {
        1 => Some(0.0),
        2 => Some(gap_2d(&directions, &support_vals, &vertices)),
        _ => None,
    };
    Ok(RangeHull { directions, support: support_vals, vertices, gap })
}

fn gap_2d(dirs: &[Vec<f64>], h: &[f64], verts: &[Vec<f64>]) -> f64 {
    let inner = convex_hull_2d(verts);
    let k = dirs.len();
    let mut gap = 0.0f64;
    for i in 0..k {
        let j = (i + 1) % k;
        let (a, b) = (&dirs[i], &dirs[j]);
        let det = a[0] * b[1] - a[1] * b[0];
        if det <= 1e-15 {
            return f64::INFINITY;
        }
        let y = [(h[i] * b[1] - a[1] * h[j]) / det, (a[0] * h[j] - h[i] * b[0]) / det];
        gap = gap.max(distance_to_polygon(y, &inner));
    }
    gap
}

/// A set `B`, a finite union of intervals, with `|nu(B) - target| <= tol`.
pub fn find_set(vm: &VectorMeasure, target: &[f64], tol: f64) -> Result<IntervalSet> {
    if target.len() != vm.criteria() {
        return Err(Error::validation("target", format!("{} components for {} criteria", target.len(), vm.criteria())));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let m = vm.as_onestep_mdp()?;
    let full = SubmodelSpec::full(&m);
    let d = distance_to_performance_set(&m, &full, target, tol * 1e-2)?;
    if d.lower > tol {
        return Err(Error::Infeasible { separation: d.lower });
    }
    if d.distance > tol / 2.0 {
        return Err(Error::Undecidable { lower: d.lower, upper: d.distance });
    }
    let terms = d.witness;
    let stage_tol = tol / (2.0 * terms.len() as f64);
    let mut acc = terms[0].1.clone();
    let mut wsum = terms[0].0;
    for (w, psi) in &terms[1..] {
        acc = mix_pair(&m, &acc, psi, wsum / (wsum + w), stage_tol)?.0;
        wsum += w;
    }
    let set = IntervalSet::from_policy(&acc, 1);
    let got = vm.measure_of(&set);
    let err = got.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if err > tol {
        return Err(Error::CertifiedFailure { achieved: err, tol, context: "find_set integration check".into() });
    }
    Ok(set)
}

/// Values `nu(B)` of all unions `B` of base intervals.
#[derive(Clone, Debug)]
pub struct BruteForceRange {
    pub points: Vec<Vec<f64>>,
    /// Convex hull vertices for two criteria.
    pub hull: Option<Vec<[f64; 2]>>,
}

pub fn brute_force_range(vm: &VectorMeasure) -> Result<BruteForceRange> {
    let cells = vm.base.partition().len();
    if cells > 12 {
        return Err(Error::TooLarge(format!("{cells} base intervals; enumeration is limited to 12")));
    }
    let n = vm.criteria();
    let cell_vals: Vec<Vec<f64>> = (0..cells)
        .map(|i| vm.densities[i].iter().map(|d| d * vm.base.masses()[i]).collect())
        .collect();
    let points: Vec<Vec<f64>> = (0..1usize << cells)
        .map(|mask| {
            let mut v = vec![0.0; n];
            for (i, cv) in cell_vals.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    for (o, x) in v.iter_mut().zip(cv) {
                        *o += x;
                    }
                }
            }
            v
        })
        .collect();
    let hull = (n == 2).then(|| convex_hull_2d(&points));
    Ok(BruteForceRange { points, hull })
}
