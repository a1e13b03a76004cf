//! Finite-action MDPs on `[0, 1]` with piecewise-constant kernels and an
//! absorbing sink.

mod builtin;
mod doc;
mod finite;
mod random;
mod transform;

use std::sync::OnceLock;

pub use builtin::{
    builtin, one_cell_discounted, unit_interval_onestep, BuiltinModel, BuiltinParams, EscapeChain, BUILTIN_NAMES,
};
pub use doc::{load_model, KernelEntry, ModelDoc, RewardEntry};
pub use finite::{absorption_certificate, AbsorptionCertificate, FiniteChoice, FiniteMdp};
pub use random::{random_deterministic, random_model, random_stationary, RandomSpec};
pub use transform::{discounted_to_absorbing, weighted_transform};

use crate::error::{Error, Result};
use crate::measure::{PieceMeasure, StatePartition};
use crate::policy::{ActionSet, DeterministicPolicy, StationaryPolicy, MAX_ACTIONS};

/// Row sums and masses are checked to this accuracy.
pub const MASS_TOL: f64 = 1e-12;

/// Accuracy used when an absorption certificate is computed on demand.
pub const CERTIFICATE_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    Absorbing,
    Discounted { beta: f64 },
}

/// One row of the kernel: masses sent to grid cells plus the mass sent to the sink.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transition {
    pub to: Vec<(usize, f64)>,
    pub absorb: f64,
}

impl Transition {
    pub fn absorbing() -> Self {
        Transition { to: Vec::new(), absorb: 1.0 }
    }

    /// Mass staying in `[0, 1]`.
    pub fn stay(&self) -> f64 {
        self.to.iter().map(|(_, m)| m).sum()
    }

    fn scaled(&self, beta: f64) -> Transition {
        Transition {
            to: self.to.iter().map(|&(d, m)| (d, beta * m)).collect(),
            absorb: (1.0 - beta) + beta * self.absorb,
        }
    }
}

/// Atomless MDP on `[0, 1]`. Kernels and rewards depend on the state only
/// through its grid cell; kernel destinations and the initial distribution
/// are uniform within every grid cell.
///
/// For a discounted model every analysis routine works with the equivalent
/// absorbing kernel (destination mass scaled by `beta`, the rest absorbed).
#[derive(Clone, Debug)]
pub struct AtomlessMdp {
    grid: StatePartition,
    action_count: usize,
    criteria: usize,
    available: Vec<ActionSet>,
    kernel: Vec<Transition>,
    effective: Vec<Transition>,
    rewards: Vec<Vec<f64>>,
    initial: Vec<f64>,
    kind: ModelKind,
    cert: OnceLock<std::result::Result<AbsorptionCertificate, String>>,
}

impl PartialEq for AtomlessMdp {
    fn eq(&self, o: &Self) -> bool {
        self.grid == o.grid
            && self.action_count == o.action_count
            && self.criteria == o.criteria
            && self.available == o.available
            && self.kernel == o.kernel
            && self.rewards == o.rewards
            && self.initial == o.initial
            && self.kind == o.kind
    }
}

/// Raw ingredients of a model, indexed `cell * action_count + action` for the
/// kernel and rewards. Entries of unavailable actions are ignored.
#[derive(Clone, Debug)]
pub struct ModelParts {
    pub grid: StatePartition,
    pub action_count: usize,
    pub available: Vec<ActionSet>,
    pub kernel: Vec<Transition>,
    pub rewards: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub kind: ModelKind,
}

impl AtomlessMdp {
    pub fn from_parts(p: ModelParts) -> Result<Self> {
        let m = p.grid.len();
        let na = p.action_count;
        if na == 0 || na > MAX_ACTIONS {
            return Err(Error::validation("actions", format!("action count {na} not in 1..={MAX_ACTIONS}")));
        }
        if p.available.len() != m {
            return Err(Error::validation("available", format!("{} entries for {m} cells", p.available.len())));
        }
        if p.kernel.len() != m * na || p.rewards.len() != m * na {
            return Err(Error::validation("kernel", "kernel/reward tables have the wrong size"));
        }
        if let ModelKind::Discounted { beta } = p.kind {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::validation("beta", format!("discount factor {beta} not in [0, 1)")));
            }
        }
        let mut criteria = None;
        let mut kernel = p.kernel;
        let mut rewards = p.rewards;
        for c in 0..m {
            let avail = p.available[c];
            if avail.is_empty() {
                return Err(Error::validation(format!("available[{c}]"), "empty action set"));
            }
            if avail.iter().any(|a| a >= na) {
                return Err(Error::validation(format!("available[{c}]"), "action index out of range"));
            }
            for a in 0..na {
                let idx = c * na + a;
                if !avail.contains(a) {
                    kernel[idx] = Transition::absorbing();
                    rewards[idx].clear();
                    continue;
                }
                let t = &kernel[idx];
                let path = format!("kernel[cell={c},action={a}]");
                if !(t.absorb.is_finite() && t.absorb >= 0.0) {
                    return Err(Error::validation(format!("{path}.absorb"), format!("invalid mass {}", t.absorb)));
                }
                for &(d, mass) in &t.to {
                    if d >= m {
                        return Err(Error::validation(format!("{path}.to"), format!("cell {d} out of range")));
                    }
                    if !(mass.is_finite() && mass >= 0.0) {
                        return Err(Error::validation(format!("{path}.to"), format!("invalid mass {mass}")));
                    }
                }
                let total = t.stay() + t.absorb;
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::validation(path, format!("row sums to {total}, expected 1")));
                }
                let r = &rewards[idx];
                if r.iter().any(|x| !x.is_finite()) {
                    return Err(Error::validation(format!("rewards[cell={c},action={a}]"), "non-finite reward"));
                }
                match criteria {
                    None => criteria = Some(r.len()),
                    Some(n) if n != r.len() => {
                        return Err(Error::validation(
                            format!("rewards[cell={c},action={a}]"),
                            format!("length {} differs from {n}", r.len()),
                        ))
                    }
                    _ => {}
                }
            }
        }
        let criteria = criteria.unwrap_or(0);
        if criteria == 0 {
            return Err(Error::validation("rewards", "reward vectors must have at least one criterion"));
        }
        for c in 0..m {
            for a in 0..na {
                if !p.available[c].contains(a) {
                    rewards[c * na + a] = vec![0.0; criteria];
                }
            }
        }
        if p.initial.len() != m {
            return Err(Error::validation("initial", format!("{} masses for {m} cells", p.initial.len())));
        }
        for (c, x) in p.initial.iter().enumerate() {
            if !(x.is_finite() && *x >= 0.0) {
                return Err(Error::validation(format!("initial[{c}]"), format!("invalid mass {x}")));
            }
        }
        let total: f64 = p.initial.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::validation("initial", format!("total mass {total}, expected 1")));
        }
        let effective = match p.kind {
            ModelKind::Absorbing => kernel.clone(),
            ModelKind::Discounted { beta } => kernel.iter().map(|t| t.scaled(beta)).collect(),
        };
        Ok(AtomlessMdp {
            grid: p.grid,
            action_count: na,
            criteria,
            available: p.available,
            kernel,
            effective,
            rewards,
            initial: p.initial,
            kind: p.kind,
            cert: OnceLock::new(),
        })
    }

    pub fn to_parts(&self) -> ModelParts {
        ModelParts {
            grid: self.grid.clone(),
            action_count: self.action_count,
            available: self.available.clone(),
            kernel: self.kernel.clone(),
            rewards: self.rewards.clone(),
            initial: self.initial.clone(),
            kind: self.kind,
        }
    }

    pub fn grid(&self) -> &StatePartition {
        &self.grid
    }

    pub fn cells(&self) -> usize {
        self.grid.len()
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn criteria(&self) -> usize {
        self.criteria
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn available(&self, cell: usize) -> ActionSet {
        self.available[cell]
    }

    /// Kernel row used for analysis (the absorbing equivalent for discounted models).
    pub fn transition(&self, cell: usize, action: usize) -> &Transition {
        &self.effective[cell * self.action_count + action]
    }

    /// Kernel row as declared.
    pub fn declared_transition(&self, cell: usize, action: usize) -> &Transition {
        &self.kernel[cell * self.action_count + action]
    }

    pub fn reward(&self, cell: usize, action: usize) -> &[f64] {
        &self.rewards[cell * self.action_count + action]
    }

    /// Initial masses per grid cell.
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn initial_measure(&self) -> PieceMeasure {
        PieceMeasure::new(self.grid.clone(), self.initial.clone()).expect("validated")
    }

    /// Largest absolute reward over all coordinates and available pairs.
    pub fn max_abs_reward(&self) -> f64 {
        self.rewards.iter().flatten().fold(0.0, |m: f64, r| m.max(r.abs()))
    }

    /// Cell-level finite MDP (kernels of available actions only).
    pub fn finite_view(&self) -> FiniteMdp {
        let choices = (0..self.cells())
            .map(|c| {
                self.available[c]
                    .iter()
                    .map(|a| {
                        let t = self.transition(c, a);
                        FiniteChoice {
                            label: a,
                            to: t.to.clone(),
                            absorb: t.absorb,
                            reward: self.reward(c, a).to_vec(),
                        }
                    })
                    .collect()
            })
            .collect();
        FiniteMdp::new(choices, self.initial.clone()).expect("model already validated")
    }

    /// Uniform-absorption certificate, computed once and cached.
    pub fn certificate(&self) -> Result<&AbsorptionCertificate> {
        self.cert
            .get_or_init(|| absorption_certificate(&self.finite_view(), CERTIFICATE_TOL).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::NotCertified(e.clone()))
    }

    /// Checks that the policy only uses available actions.
    pub fn check_deterministic(&self, phi: &DeterministicPolicy) -> Result<()> {
        let fine = self.grid.refine(phi.partition());
        let cells = fine.parent_map(&self.grid);
        for (i, a) in phi.actions_on(&fine).into_iter().enumerate() {
            if !self.available[cells[i]].contains(a) {
                let (lo, hi) = fine.interval(i);
                return Err(Error::validation(
                    format!("policy interval [{lo}, {hi}]"),
                    format!("action {a} not available"),
                ));
            }
        }
        Ok(())
    }

    pub fn check_stationary(&self, pi: &StationaryPolicy) -> Result<()> {
        if pi.action_count() != self.action_count {
            return Err(Error::validation(
                "policy",
                format!("{} action probabilities, model has {} actions", pi.action_count(), self.action_count),
            ));
        }
        let fine = self.grid.refine(pi.partition());
        let cells = fine.parent_map(&self.grid);
        for (i, row) in pi.probs_on(&fine).iter().enumerate() {
            for (a, p) in row.iter().enumerate() {
                if *p > 0.0 && !self.available[cells[i]].contains(a) {
                    let (lo, hi) = fine.interval(i);
                    return Err(Error::validation(
                        format!("policy interval [{lo}, {hi}]"),
                        format!("positive probability on unavailable action {a}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The deterministic policy taking the lowest available action everywhere.
    pub fn lowest_action_policy(&self) -> DeterministicPolicy {
        let actions = self.available.iter().map(|s| s.first().unwrap()).collect();
        DeterministicPolicy::new(self.grid.clone(), actions).unwrap().canonical()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell(absorb: f64, stay: f64) -> ModelParts {
        ModelParts {
            grid: StatePartition::unit(),
            action_count: 1,
            available: vec![ActionSet::single(0)],
            kernel: vec![Transition { to: vec![(0, stay)], absorb }],
            rewards: vec![vec![1.0]],
            initial: vec![1.0],
            kind: ModelKind::Absorbing,
        }
    }

    #[test]
    fn row_sum_checked() {
        assert!(AtomlessMdp::from_parts(one_cell(0.5, 0.5)).is_ok());
        let err = AtomlessMdp::from_parts(one_cell(0.4, 0.5)).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err}");
        assert!(err.to_string().contains("row sums"));
    }

    #[test]
    fn empty_available_rejected() {
        let mut p = one_cell(1.0, 0.0);
        p.available = vec![ActionSet::empty()];
        assert!(AtomlessMdp::from_parts(p).is_err());
    }

    #[test]
    fn discounted_effective_kernel() {
        let mut p = one_cell(0.0, 1.0);
        p.kind = ModelKind::Discounted { beta: 0.5 };
        let m = AtomlessMdp::from_parts(p).unwrap();
        assert_eq!(m.transition(0, 0).absorb, 0.5);
        assert_eq!(m.declared_transition(0, 0).absorb, 0.0);
        assert!((m.certificate().unwrap().l() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn never_absorbing_not_certified() {
        let m = AtomlessMdp::from_parts(one_cell(0.0, 1.0)).unwrap();
        assert!(matches!(m.certificate(), Err(Error::NotCertified(_))));
    }
}
