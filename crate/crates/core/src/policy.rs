//! Interval-partitioned stationary policies and their text format.
//!
//! A policy file lists rows `t_lo t_hi action` (deterministic) or
//! `t_lo t_hi p_0 ... p_{A-1}` (stationary); the rows must tile `[0, 1]`.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measure::{StatePartition, BREAK_EPS};

/// Maximum number of actions supported by [`ActionSet`].
pub const MAX_ACTIONS: usize = 64;

/// Small set of action indices, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ActionSet(u64);

impl ActionSet {
    pub fn empty() -> Self {
        ActionSet(0)
    }

    pub fn single(a: usize) -> Self {
        ActionSet(1u64 << a)
    }

    pub fn all(n: usize) -> Self {
        if n >= 64 {
            ActionSet(u64::MAX)
        } else {
            ActionSet((1u64 << n) - 1)
        }
    }

    pub fn from_actions(actions: &[usize]) -> Self {
        ActionSet(actions.iter().fold(0, |m, &a| m | (1u64 << a)))
    }

    pub fn contains(self, a: usize) -> bool {
        a < 64 && self.0 & (1u64 << a) != 0
    }

    pub fn insert(&mut self, a: usize) {
        self.0 |= 1u64 << a;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: ActionSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersect(self, other: ActionSet) -> ActionSet {
        ActionSet(self.0 & other.0)
    }

    /// Lowest action in the set.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |a| bits & (1u64 << a) != 0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

/// Values of `vals` (attached to the intervals of `part`) pulled back to the
/// intervals of a refining partition.
pub(crate) fn pull_back<T: Clone>(part: &StatePartition, vals: &[T], fine: &StatePartition) -> Vec<T> {
    fine.parent_map(part).into_iter().map(|p| vals[p].clone()).collect()
}

/// Merges adjacent intervals carrying equal values.
fn merge_equal<T: PartialEq + Clone>(part: &StatePartition, vals: &[T]) -> (StatePartition, Vec<T>) {
    let b = part.breakpoints();
    let mut breaks = vec![0.0];
    let mut out: Vec<T> = vec![vals[0].clone()];
    for i in 1..vals.len() {
        if vals[i] != *out.last().unwrap() {
            breaks.push(b[i]);
            out.push(vals[i].clone());
        }
    }
    breaks.push(1.0);
    (StatePartition::new(breaks).expect("subset of valid breakpoints"), out)
}

/// Nonrandomized stationary policy: one action per interval.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicPolicy {
    partition: StatePartition,
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(partition: StatePartition, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != partition.len() {
            return Err(Error::validation(
                "policy",
                format!("{} actions for {} intervals", actions.len(), partition.len()),
            ));
        }
        Ok(DeterministicPolicy { partition, actions })
    }

    pub fn constant(action: usize) -> Self {
        DeterministicPolicy { partition: StatePartition::unit(), actions: vec![action] }
    }

    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn action_at(&self, x: f64) -> usize {
        self.actions[self.partition.locate(x)]
    }

    /// Actions on the intervals of a refining partition.
    pub fn actions_on(&self, fine: &StatePartition) -> Vec<usize> {
        pull_back(&self.partition, &self.actions, fine)
    }

    /// Same policy with adjacent equal-action intervals merged.
    pub fn canonical(&self) -> DeterministicPolicy {
        let (partition, actions) = merge_equal(&self.partition, &self.actions);
        DeterministicPolicy { partition, actions }
    }

    pub fn to_stationary(&self, action_count: usize) -> StationaryPolicy {
        let probs = self
            .actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; action_count];
                row[a] = 1.0;
                row
            })
            .collect();
        StationaryPolicy { partition: self.partition.clone(), probs }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, a) in self.actions.iter().enumerate() {
            let (lo, hi) = self.partition.interval(i);
            writeln!(s, "{lo} {hi} {a}").unwrap();
        }
        s
    }
}

/// Randomized stationary policy: a probability vector per interval.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryPolicy {
    partition: StatePartition,
    probs: Vec<Vec<f64>>,
}

impl StationaryPolicy {
    pub fn new(partition: StatePartition, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != partition.len() {
            return Err(Error::validation(
                "policy",
                format!("{} rows for {} intervals", probs.len(), partition.len()),
            ));
        }
        let width = probs.first().map_or(0, |r| r.len());
        for (i, row) in probs.iter().enumerate() {
            if row.len() != width || width == 0 {
                return Err(Error::validation(format!("policy[{i}]"), "inconsistent row length"));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::validation(format!("policy[{i}]"), "negative probability"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!("policy[{i}]"), format!("probabilities sum to {s}")));
            }
        }
        Ok(StationaryPolicy { partition, probs })
    }

    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn action_count(&self) -> usize {
        self.probs[0].len()
    }

    pub fn probs_on(&self, fine: &StatePartition) -> Vec<Vec<f64>> {
        pull_back(&self.partition, &self.probs, fine)
    }

    /// The deterministic policy this one equals, if every row is degenerate.
    pub fn as_deterministic(&self) -> Option<DeterministicPolicy> {
        let actions = self
            .probs
            .iter()
            .map(|row| row.iter().position(|&p| p == 1.0))
            .collect::<Option<Vec<_>>>()?;
        Some(DeterministicPolicy { partition: self.partition.clone(), actions }.canonical())
    }

    pub fn canonical(&self) -> StationaryPolicy {
        let (partition, probs) = merge_equal(&self.partition, &self.probs);
        StationaryPolicy { partition, probs }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, row) in self.probs.iter().enumerate() {
            let (lo, hi) = self.partition.interval(i);
            write!(s, "{lo} {hi}").unwrap();
            for p in row {
                write!(s, " {p}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// A policy read from a file, either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyPolicy {
    Deterministic(DeterministicPolicy),
    Stationary(StationaryPolicy),
}

impl AnyPolicy {
    /// Parses the row format. Rows with a single integer after the interval are
    /// read as a deterministic policy when `action_count > 1`.
    pub fn parse(text: &str, action_count: usize) -> Result<AnyPolicy> {
        let rows = parse_rows(text)?;
        let deterministic = action_count > 1 && rows.iter().all(|(_, _, v)| v.len() == 1);
        let mut breaks = vec![0.0];
        for (k, (lo, hi, _)) in rows.iter().enumerate() {
            let prev = *breaks.last().unwrap();
            if (lo - prev).abs() > BREAK_EPS {
                return Err(Error::validation(
                    format!("policy row {}", k + 1),
                    format!("interval starts at {lo}, expected {prev}"),
                ));
            }
            breaks.push(*hi);
        }
        let last = breaks.len() - 1;
        if (breaks[last] - 1.0).abs() > BREAK_EPS {
            return Err(Error::validation("policy", "rows do not reach 1"));
        }
        breaks[last] = 1.0;
        let partition = StatePartition::new(breaks)
            .map_err(|_| Error::validation("policy", "rows do not tile [0, 1]"))?;
        if deterministic {
            let mut actions = Vec::with_capacity(rows.len());
            for (k, (_, _, v)) in rows.iter().enumerate() {
                let a = v[0];
                if a.fract() != 0.0 || a < 0.0 || a as usize >= action_count {
                    return Err(Error::validation(
                        format!("policy row {}", k + 1),
                        format!("invalid action {a}"),
                    ));
                }
                actions.push(a as usize);
            }
            Ok(AnyPolicy::Deterministic(DeterministicPolicy::new(partition, actions)?))
        } else {
            for (k, (_, _, v)) in rows.iter().enumerate() {
                if v.len() != action_count {
                    return Err(Error::validation(
                        format!("policy row {}", k + 1),
                        format!("{} probabilities, expected {action_count}", v.len()),
                    ));
                }
            }
            let probs = rows.into_iter().map(|(_, _, v)| v).collect();
            Ok(AnyPolicy::Stationary(StationaryPolicy::new(partition, probs)?))
        }
    }

    pub fn into_stationary(self, action_count: usize) -> StationaryPolicy {
        match self {
            AnyPolicy::Deterministic(d) => d.to_stationary(action_count),
            AnyPolicy::Stationary(s) => s,
        }
    }

    pub fn into_deterministic(self) -> Result<DeterministicPolicy> {
        match self {
            AnyPolicy::Deterministic(d) => Ok(d),
            AnyPolicy::Stationary(s) => s
                .as_deterministic()
                .ok_or_else(|| Error::validation("policy", "expected a deterministic policy")),
        }
    }
}

type Row = (f64, f64, Vec<f64>);

fn parse_rows(text: &str) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::validation(format!("policy line {}", n + 1), e.to_string()))?;
        if nums.len() < 3 {
            return Err(Error::validation(format!("policy line {}", n + 1), "too few fields"));
        }
        rows.push((nums[0], nums[1], nums[2..].to_vec()));
    }
    if rows.is_empty() {
        return Err(Error::validation("policy", "no rows"));
    }
    Ok(rows)
}
