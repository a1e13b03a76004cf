//! Scalarized total-reward dynamic programming on submodels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measure::StatePartition;
use crate::model::AtomlessMdp;
use crate::occupancy::DENSE_LIMIT;
use crate::policy::{ActionSet, DeterministicPolicy};

/// Submodel: allowed actions per interval of a partition refining the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmodelSpec {
    partition: StatePartition,
    allowed: Vec<ActionSet>,
}

impl SubmodelSpec {
    /// The model itself.
    pub fn full(m: &AtomlessMdp) -> Self {
        SubmodelSpec {
            partition: m.grid().clone(),
            allowed: (0..m.cells()).map(|c| m.available(c)).collect(),
        }
    }

    pub fn new(m: &AtomlessMdp, partition: StatePartition, allowed: Vec<ActionSet>) -> Result<Self> {
        if !partition.refines(m.grid()) {
            return Err(Error::validation("submodel.partition", "must refine the model grid"));
        }
        if allowed.len() != partition.len() {
            return Err(Error::validation(
                "submodel.allowed",
                format!("{} action sets for {} intervals", allowed.len(), partition.len()),
            ));
        }
        let cells = partition.parent_map(m.grid());
        for (i, s) in allowed.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::validation(format!("submodel.allowed[{i}]"), "empty action set"));
            }
            if !s.is_subset(m.available(cells[i])) {
                return Err(Error::validation(format!("submodel.allowed[{i}]"), "action not available in the model"));
            }
        }
        Ok(SubmodelSpec { partition, allowed })
    }

    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn allowed(&self) -> &[ActionSet] {
        &self.allowed
    }

    /// True when the submodel has exactly one policy.
    pub fn is_deterministic(&self) -> bool {
        self.allowed.iter().all(|s| s.len() == 1)
    }

    /// The unique policy of a single-action submodel, or the lowest-action policy.
    pub fn lowest_policy(&self) -> DeterministicPolicy {
        let acts = self.allowed.iter().map(|s| s.first().unwrap()).collect();
        DeterministicPolicy::new(self.partition.clone(), acts).unwrap().canonical()
    }

    /// Whether `phi` only uses allowed actions.
    pub fn admits(&self, phi: &DeterministicPolicy) -> bool {
        let fine = self.partition.refine(phi.partition());
        let parent = fine.parent_map(&self.partition);
        phi.actions_on(&fine).iter().enumerate().all(|(i, &a)| self.allowed[parent[i]].contains(a))
    }

    /// Replaces actions that the submodel forbids by the lowest allowed one.
    pub fn project(&self, phi: &DeterministicPolicy) -> DeterministicPolicy {
        let fine = self.partition.refine(phi.partition());
        let parent = fine.parent_map(&self.partition);
        let acts = phi
            .actions_on(&fine)
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let s = self.allowed[parent[i]];
                if s.contains(a) {
                    a
                } else {
                    s.first().unwrap()
                }
            })
            .collect();
        DeterministicPolicy::new(fine, acts).unwrap().canonical()
    }
}

/// Scalar function constant on the intervals of a partition.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    partition: StatePartition,
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: f64) -> f64 {
        self.values[self.partition.locate(x)]
    }
}

/// Result of [`value_iteration`].
#[derive(Clone, Debug)]
pub struct DpSolution {
    pub value: ValueFunction,
    /// Greedy deterministic policy; ties go to the lowest action index.
    pub policy: DeterministicPolicy,
    /// `h = integral of v against mu`.
    pub h: f64,
    /// Certified bound on `|h - sup_pi <b, v^pi>|`.
    pub error_bound: f64,
    pub iterations: usize,
}

struct Layout {
    cell: Vec<usize>,
    weight: Vec<f64>,
}

impl Layout {
    fn new(m: &AtomlessMdp, part: &StatePartition) -> Self {
        let cell = part.parent_map(m.grid());
        let weight = (0..part.len()).map(|i| part.width(i) / m.grid().width(cell[i])).collect();
        Layout { cell, weight }
    }

    fn averages(&self, cells: usize, vals: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cells];
        for (i, v) in vals.iter().enumerate() {
            out[self.cell[i]] += self.weight[i] * v;
        }
        out
    }
}

fn scalar_rewards(m: &AtomlessMdp, b: &[f64]) -> Vec<f64> {
    let na = m.action_count();
    let mut out = vec![0.0; m.cells() * na];
    for c in 0..m.cells() {
        for a in m.available(c).iter() {
            out[c * na + a] = m.reward(c, a).iter().zip(b).map(|(r, w)| r * w).sum();
        }
    }
    out
}

/// `T^a v` evaluated on cell `c` from cell averages.
fn backup(m: &AtomlessMdp, rt: &[f64], vbar: &[f64], c: usize, a: usize) -> f64 {
    let t = m.transition(c, a);
    rt[c * m.action_count() + a] + t.to.iter().map(|&(d, p)| p * vbar[d]).sum::<f64>()
}

/// Best value and lowest near-optimal action per interval.
fn greedy(m: &AtomlessMdp, sub: &SubmodelSpec, lay: &Layout, rt: &[f64], vbar: &[f64], slack: f64) -> (Vec<f64>, Vec<usize>) {
    let mut vals = Vec::with_capacity(sub.allowed.len());
    let mut acts = Vec::with_capacity(sub.allowed.len());
    for (i, s) in sub.allowed.iter().enumerate() {
        let c = lay.cell[i];
        let q: Vec<(usize, f64)> = s.iter().map(|a| (a, backup(m, rt, vbar, c, a))).collect();
        let best = q.iter().fold(f64::NEG_INFINITY, |x, &(_, y)| x.max(y));
        let a = q.iter().find(|&&(_, y)| y >= best - slack).unwrap().0;
        vals.push(best);
        acts.push(a);
    }
    (vals, acts)
}

/// Cell averages of the value of the policy with actions `acts` per interval.
fn evaluate(m: &AtomlessMdp, lay: &Layout, rt: &[f64], acts: &[usize]) -> Option<Vec<f64>> {
    let n = m.cells();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for (i, &act) in acts.iter().enumerate() {
        let (c, w) = (lay.cell[i], lay.weight[i]);
        r[c] += w * rt[c * m.action_count() + act];
        for &(d, p) in &m.transition(c, act).to {
            a[(c, d)] -= w * p;
        }
    }
    let v = a.lu().solve(&r)?;
    v.iter().all(|x| x.is_finite()).then(|| v.iter().copied().collect())
}

/// Maximizes `<b, v^pi>` over the policies of `sub`.
///
/// Value iteration from zero runs for the number of steps after which the
/// certified tail falls below `tol`; small grids are then polished by policy
/// iteration, which makes the returned value exact up to rounding.
pub fn value_iteration(m: &AtomlessMdp, sub: &SubmodelSpec, b: &[f64], tol: f64) -> Result<DpSolution> {
    if b.len() != m.criteria() {
        return Err(Error::validation("direction", format!("{} components for {} criteria", b.len(), m.criteria())));
    }
    let cert = m.certificate()?;
    let lay = Layout::new(m, &sub.partition);
    let rt = scalar_rewards(m, b);
    let rmax = rt.iter().fold(0.0f64, |x, y| x.max(y.abs()));
    let slack = 1e-12 * rmax * cert.l();
    let steps = if rmax == 0.0 { 0 } else { cert.steps_for(tol.max(f64::MIN_POSITIVE) / rmax) };
    let polish = m.cells() <= DENSE_LIMIT;
    let vi_steps = if polish { steps.min(30) } else { steps };

    let mut vbar = vec![0.0; m.cells()];
    let mut vals = vec![0.0; sub.allowed.len()];
    let mut acts: Vec<usize> = sub.allowed.iter().map(|s| s.first().unwrap()).collect();
    for _ in 0..vi_steps {
        (vals, acts) = greedy(m, sub, &lay, &rt, &vbar, slack);
        vbar = lay.averages(m.cells(), &vals);
    }
    let mut error_bound = rmax * cert.survival_max(vi_steps) * cert.l();
    let mut iterations = vi_steps;

    if polish && rmax > 0.0 {
        if vi_steps == 0 {
            (_, acts) = greedy(m, sub, &lay, &rt, &vbar, slack);
        }
        for _ in 0..1000 {
            let Some(ev) = evaluate(m, &lay, &rt, &acts) else { break };
            iterations += 1;
            let mut changed = false;
            let mut next = acts.clone();
            for (i, s) in sub.allowed.iter().enumerate() {
                let c = lay.cell[i];
                let cur = backup(m, &rt, &ev, c, acts[i]);
                let q: Vec<(usize, f64)> = s.iter().map(|a| (a, backup(m, &rt, &ev, c, a))).collect();
                let best = q.iter().fold(f64::NEG_INFINITY, |x, &(_, y)| x.max(y));
                if best > cur + slack {
                    next[i] = q.iter().find(|&&(_, y)| y >= best - slack).unwrap().0;
                    changed = true;
                }
            }
            vbar = ev;
            if !changed {
                vals = acts.iter().enumerate().map(|(i, &a)| backup(m, &rt, &vbar, lay.cell[i], a)).collect();
                // improvement test passed up to `slack` per step
                error_bound = 2.0 * slack * cert.l();
                break;
            }
            acts = next;
        }
    }

    let h = m.initial().iter().zip(&vbar).map(|(mu, v)| mu * v).sum();
    Ok(DpSolution {
        value: ValueFunction { partition: sub.partition.clone(), values: vals },
        policy: DeterministicPolicy::new(sub.partition.clone(), acts)?.canonical(),
        h,
        error_bound,
        iterations,
    })
}

/// Support function `h(b)` of the performance set of `sub` and a maximizing
/// deterministic policy.
pub fn support(m: &AtomlessMdp, sub: &SubmodelSpec, b: &[f64], tol: f64) -> Result<(f64, DeterministicPolicy)> {
    let s = value_iteration(m, sub, b, tol)?;
    Ok((s.h, s.policy))
}

/// Default conserving tolerance `1e-8 (1 + max |<b, r>|)`.
pub fn default_eta(m: &AtomlessMdp, b: &[f64]) -> f64 {
    let rt = scalar_rewards(m, b);
    1e-8 * (1.0 + rt.iter().fold(0.0f64, |x, y| x.max(y.abs())))
}

/// Keeps, on every interval, the actions `a` with `|T^a v(x) - v(x)| <= eta`.
pub fn conserving_submodel(
    m: &AtomlessMdp,
    sub: &SubmodelSpec,
    b: &[f64],
    v: &ValueFunction,
    eta: f64,
) -> Result<SubmodelSpec> {
    let lay = Layout::new(m, &sub.partition);
    let vals: Vec<f64> = v.values.clone();
    if v.partition != sub.partition {
        return Err(Error::validation("value", "value function must live on the submodel partition"));
    }
    let vbar = lay.averages(m.cells(), &vals);
    let rt = scalar_rewards(m, b);
    let mut allowed = Vec::with_capacity(sub.allowed.len());
    for (i, s) in sub.allowed.iter().enumerate() {
        let mut keep = ActionSet::empty();
        for a in s.iter() {
            if (backup(m, &rt, &vbar, lay.cell[i], a) - vals[i]).abs() <= eta {
                keep.insert(a);
            }
        }
        if keep.is_empty() {
            let (lo, hi) = sub.partition.interval(i);
            return Err(Error::Tolerance(format!("no conserving action on [{lo}, {hi}] at eta {eta:e}")));
        }
        allowed.push(keep);
    }
    Ok(SubmodelSpec { partition: sub.partition.clone(), allowed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{discounted_to_absorbing, one_cell_discounted, unit_interval_onestep};

    #[test]
    fn zero_direction() {
        let m = unit_interval_onestep();
        let s = value_iteration(&m, &SubmodelSpec::full(&m), &[0.0], 1e-12).unwrap();
        assert_eq!(s.h, 0.0);
        assert!(s.value.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn onestep_support() {
        let m = unit_interval_onestep();
        let full = SubmodelSpec::full(&m);
        let (h, phi) = support(&m, &full, &[1.0], 1e-12).unwrap();
        assert_eq!(h, 1.0);
        assert_eq!(phi, DeterministicPolicy::constant(1));
        let (h, phi) = support(&m, &full, &[-1.0], 1e-12).unwrap();
        assert_eq!(h, 0.0);
        assert_eq!(phi, DeterministicPolicy::constant(0));
        let v = value_iteration(&m, &full, &[1.0], 1e-12).unwrap().value;
        let c = conserving_submodel(&m, &full, &[1.0], &v, default_eta(&m, &[1.0])).unwrap();
        assert_eq!(c.allowed(), &[ActionSet::single(1)]);
    }

    #[test]
    fn constant_reward_times_lifetime() {
        let m = discounted_to_absorbing(&one_cell_discounted(0.5, vec![3.0])).unwrap();
        let (h, _) = support(&m, &SubmodelSpec::full(&m), &[1.0], 1e-12).unwrap();
        assert!((h - 6.0).abs() < 1e-12);
        let one = SubmodelSpec::full(&m);
        let v = value_iteration(&m, &one, &[1.0], 1e-12).unwrap().value;
        assert_eq!(conserving_submodel(&m, &one, &[1.0], &v, 1e-8).unwrap(), one);
    }

    #[test]
    fn project_and_admit() {
        let m = unit_interval_onestep();
        let sub = SubmodelSpec::new(
            &m,
            StatePartition::new(vec![0.0, 0.5, 1.0]).unwrap(),
            vec![ActionSet::single(1), ActionSet::all(2)],
        )
        .unwrap();
        assert!(!sub.admits(&DeterministicPolicy::constant(0)));
        let p = sub.project(&DeterministicPolicy::constant(0));
        assert!(sub.admits(&p));
        assert_eq!(p.action_at(0.25), 1);
        assert_eq!(p.action_at(0.75), 0);
    }
}
