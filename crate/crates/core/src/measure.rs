//! Finite measures with piecewise-uniform densities on interval partitions of
//! `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Breakpoints closer than this are treated as one.
pub const BREAK_EPS: f64 = 1e-12;

/// Interval partition `0 = t_0 < t_1 < ... < t_K = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StatePartition {
    breaks: Vec<f64>,
}

impl TryFrom<Vec<f64>> for StatePartition {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        StatePartition::new(v)
    }
}

impl From<StatePartition> for Vec<f64> {
    fn from(p: StatePartition) -> Self {
        p.breaks
    }
}

impl StatePartition {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::validation("breakpoints", "need at least two breakpoints"));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::validation("breakpoints", "must start at 0 and end at 1"));
        }
        for (i, w) in breaks.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::validation(
                    format!("breakpoints[{}]", i + 1),
                    format!("not strictly increasing ({} after {})", w[1], w[0]),
                ));
            }
        }
        Ok(StatePartition { breaks })
    }

    /// The trivial partition `{0, 1}`.
    pub fn unit() -> Self {
        StatePartition { breaks: vec![0.0, 1.0] }
    }

    /// `k` equal cells.
    pub fn uniform(k: usize) -> Self {
        let k = k.max(1);
        let mut breaks: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        breaks[k] = 1.0;
        StatePartition { breaks }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.breaks[i], self.breaks[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        self.breaks[i + 1] - self.breaks[i]
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.breaks[i] + self.breaks[i + 1])
    }

    /// Index of the interval containing `x`; intervals are closed on the left,
    /// the last one also on the right.
    pub fn locate(&self, x: f64) -> usize {
        let k = self.len();
        if x <= 0.0 {
            return 0;
        }
        if x >= 1.0 {
            return k - 1;
        }
        match self.breaks.binary_search_by(|t| t.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(k - 1),
            Err(i) => i - 1,
        }
    }

    /// Coarsest common refinement. Breakpoints of `other` lying within
    /// [`BREAK_EPS`] of a breakpoint of `self` are dropped, so `self` wins.
    pub fn refine(&self, other: &StatePartition) -> StatePartition {
        self.with_points(other.breaks[1..other.breaks.len() - 1].iter().copied())
    }

    /// Adds a single breakpoint (no-op if it is within [`BREAK_EPS`] of an
    /// existing one or outside `(0, 1)`).
    pub fn with_breakpoint(&self, b: f64) -> StatePartition {
        self.with_points(std::iter::once(b))
    }

    fn with_points(&self, pts: impl Iterator<Item = f64>) -> StatePartition {
        let mut extra: Vec<f64> = pts.filter(|&b| b > BREAK_EPS && b < 1.0 - BREAK_EPS).collect();
        if extra.is_empty() {
            return self.clone();
        }
        extra.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out = Vec::with_capacity(self.breaks.len() + extra.len());
        let (mut i, mut j) = (0, 0);
        let base = &self.breaks;
        while i < base.len() || j < extra.len() {
            let take_base = j >= extra.len() || (i < base.len() && base[i] <= extra[j]);
            if take_base {
                out.push(base[i]);
                i += 1;
            } else {
                let e = extra[j];
                j += 1;
                let last = *out.last().unwrap();
                let next_base = base.get(i).copied().unwrap_or(f64::INFINITY);
                if e - last > BREAK_EPS && next_base - e > BREAK_EPS {
                    out.push(e);
                }
            }
        }
        StatePartition { breaks: out }
    }

    /// True when every breakpoint of `coarse` occurs in `self`.
    pub fn refines(&self, coarse: &StatePartition) -> bool {
        coarse.breaks.iter().all(|t| {
            let i = self.breaks.partition_point(|s| *s < *t - BREAK_EPS);
            i < self.breaks.len() && (self.breaks[i] - t).abs() <= BREAK_EPS
        })
    }

    /// For every interval of `self`, the index of the interval of `coarse`
    /// containing its midpoint.
    pub fn parent_map(&self, coarse: &StatePartition) -> Vec<usize> {
        (0..self.len()).map(|i| coarse.locate(self.midpoint(i))).collect()
    }
}

/// Finite measure whose density is constant on every interval of its partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceMeasure {
    partition: StatePartition,
    masses: Vec<f64>,
}

impl PieceMeasure {
    pub fn new(partition: StatePartition, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != partition.len() {
            return Err(Error::validation(
                "masses",
                format!("{} masses for {} intervals", masses.len(), partition.len()),
            ));
        }
        for (i, m) in masses.iter().enumerate() {
            if !m.is_finite() || *m < 0.0 {
                return Err(Error::validation(format!("masses[{i}]"), format!("invalid mass {m}")));
            }
        }
        Ok(PieceMeasure { partition, masses })
    }

    pub fn zero(partition: StatePartition) -> Self {
        let masses = vec![0.0; partition.len()];
        PieceMeasure { partition, masses }
    }

    /// Uniform measure (Lebesgue times `total`) on `[0, 1]`.
    pub fn uniform(total: f64) -> Self {
        PieceMeasure { partition: StatePartition::unit(), masses: vec![total] }
    }

    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn density(&self, i: usize) -> f64 {
        self.masses[i] / self.partition.width(i)
    }

    /// Mass of `[0, b]`.
    pub fn cdf(&self, b: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Domain(format!("cdf argument {b} outside [0, 1]")));
        }
        Ok(self.mass_below(b))
    }

    /// Same as [`cdf`](Self::cdf) with `b` clamped to `[0, 1]`.
    pub fn mass_below(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        let i = self.partition.locate(b);
        let prefix: f64 = self.masses[..i].iter().sum();
        let (lo, hi) = self.partition.interval(i);
        let frac = ((b - lo) / (hi - lo)).clamp(0.0, 1.0);
        prefix + self.masses[i] * frac
    }

    /// Mass of `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.mass_below(b) - self.mass_below(a)).max(0.0)
    }

    /// Interval `[b_min, b_max]` of coordinates where the normalized CDF equals `alpha`.
    pub fn quantile(&self, alpha: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("quantile level {alpha} outside [0, 1]")));
        }
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::DegenerateMeasure);
        }
        let target = alpha * total;
        let k = self.partition.len();
        let mut prefix = Vec::with_capacity(k + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for m in &self.masses {
            acc += m;
            prefix.push(acc);
        }
        let at = |i: usize| {
            let (lo, hi) = self.partition.interval(i);
            let t = ((target - prefix[i]) / self.masses[i]).clamp(0.0, 1.0);
            (lo + t * (hi - lo)).clamp(lo, hi)
        };

        let b_min = if target <= 0.0 {
            0.0
        } else {
            (0..k)
                .find(|&i| self.masses[i] > 0.0 && prefix[i + 1] >= target)
                .map(at)
                .unwrap_or(1.0)
        };
        let b_max = if target >= total {
            1.0
        } else {
            (0..k)
                .rev()
                .find(|&i| self.masses[i] > 0.0 && prefix[i] <= target)
                .map(at)
                .unwrap_or(0.0)
        };
        Ok((b_min, b_max.max(b_min)))
    }

    /// Re-expresses the measure on a partition refining its own one.
    pub fn refine_to(&self, fine: &StatePartition) -> PieceMeasure {
        let parent = fine.parent_map(&self.partition);
        let masses = (0..fine.len())
            .map(|i| {
                let p = parent[i];
                self.masses[p] * (fine.width(i) / self.partition.width(p))
            })
            .collect();
        PieceMeasure { partition: fine.clone(), masses }
    }

    /// Sums masses onto a coarser partition.
    pub fn coarsen_to(&self, coarse: &StatePartition) -> PieceMeasure {
        let mut masses = vec![0.0; coarse.len()];
        for (i, p) in self.partition.parent_map(coarse).into_iter().enumerate() {
            masses[p] += self.masses[i];
        }
        PieceMeasure { partition: coarse.clone(), masses }
    }

    pub fn split_at(&self, b: f64) -> PieceMeasure {
        let fine = self.partition.with_breakpoint(b);
        if fine.len() == self.partition.len() {
            return self.clone();
        }
        self.refine_to(&fine)
    }

    /// `|m1 - m2|(X)` on the common refinement.
    pub fn total_variation(&self, other: &PieceMeasure) -> f64 {
        let common = self.partition.refine(&other.partition);
        let a = self.refine_to(&common);
        let b = other.refine_to(&common);
        a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()).sum()
    }

    pub fn scaled(&self, s: f64) -> PieceMeasure {
        PieceMeasure {
            partition: self.partition.clone(),
            masses: self.masses.iter().map(|m| m * s).collect(),
        }
    }
}
