use serde::Serialize;

use super::context::{make_context, TwoPolicyContext};
use super::mnp::{caratheodory_prune, min_norm_point, MnpOptions, MnpResult, MnpStop, Vertex};
use crate::error::{Error, Result};
use crate::model::AtomlessMdp;
use crate::occupancy::{cell_mixture, cell_occupancy_exact, cell_performance, exact_performance_deterministic, refine_with_grid};
use crate::policy::{DeterministicPolicy, StationaryPolicy};
use crate::scalar_dp::{conserving_submodel, default_eta, value_iteration, SubmodelSpec};

/// One dimension-reduction step of the mixing recursion.
#[derive(Clone, Debug, Serialize)]
pub struct MixLevel {
    pub depth: usize,
    /// Criteria still matched at this level.
    pub active: Vec<usize>,
    /// Largest path parameter found with the target (nearly) inside the frozen set.
    pub alpha_hat: f64,
    /// Supporting hyperplane `<normal, v> = offset` of the face used below this level.
    pub normal: Vec<f64>,
    pub offset: f64,
    /// Criterion restored through the hyperplane.
    pub dropped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixCertificate {
    pub lambda: f64,
    pub target: Vec<f64>,
    pub achieved: Vec<f64>,
    /// Euclidean norm of `achieved - target`.
    pub error: f64,
    pub tol: f64,
    pub trace: Vec<MixLevel>,
}

/// Result of [`distance_to_performance_set`].
#[derive(Clone, Debug)]
pub struct DistanceResult {
    /// Distance estimate (an upper bound).
    pub distance: f64,
    pub lower: f64,
    /// Convex combination of deterministic policies attaining the near-projection.
    pub witness: Vec<(f64, DeterministicPolicy)>,
    pub projection: Vec<f64>,
    /// Unit vector from the projection towards the target; `None` when the
    /// target is within tolerance of the set.
    pub direction: Option<Vec<f64>>,
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn pick(v: &[f64], active: &[usize]) -> Vec<f64> {
    active.iter().map(|&j| v[j]).collect()
}

fn stationary_vector(m: &AtomlessMdp, pi: &StationaryPolicy) -> Result<Vec<f64>> {
    let r = refine_with_grid(m, pi.partition());
    let mix = cell_mixture(m, &r, &pi.probs_on(&r.partition));
    let q = cell_occupancy_exact(m, &mix)?;
    Ok(cell_performance(m, &mix, &q))
}

struct Engine<'a> {
    m: &'a AtomlessMdp,
    dp_tol: f64,
    trace: Vec<MixLevel>,
}

impl<'a> Engine<'a> {
    fn new(m: &'a AtomlessMdp) -> Result<Self> {
        let l = m.certificate()?.l();
        Ok(Engine { m, dp_tol: 1e-13 * (1.0 + m.max_abs_reward() * l), trace: Vec::new() })
    }

    fn vector(&self, phi: &DeterministicPolicy) -> Result<Vec<f64>> {
        exact_performance_deterministic(self.m, phi)
    }

    fn vertex(&self, phi: DeterministicPolicy, active: &[usize]) -> Result<Vertex<DeterministicPolicy>> {
        Ok(Vertex { point: pick(&self.vector(&phi)?, active), payload: phi })
    }

    /// Nearest point of the projection of `V(sub)` onto the active criteria.
    fn mnp(
        &self,
        sub: &SubmodelSpec,
        target: &[f64],
        active: &[usize],
        seeds: Vec<DeterministicPolicy>,
        opts: MnpOptions,
    ) -> Result<MnpResult<DeterministicPolicy>> {
        let n = self.m.criteria();
        let seeds = seeds.into_iter().map(|p| self.vertex(p, active)).collect::<Result<Vec<_>>>()?;
        let oracle = |d: &[f64]| {
            let mut b = vec![0.0; n];
            for (k, &j) in active.iter().enumerate() {
                b[j] = d[k];
            }
            let sol = value_iteration(self.m, sub, &b, self.dp_tol)?;
            Ok((self.vertex(sol.policy, active)?, 2.0 * sol.error_bound))
        };
        min_norm_point(&pick(target, active), seeds, oracle, opts)
    }

    fn rec(
        &mut self,
        psi0: &DeterministicPolicy,
        psi1: &DeterministicPolicy,
        lambda: f64,
        active: &[usize],
        tol: f64,
        depth: usize,
    ) -> Result<DeterministicPolicy> {
        if active.is_empty() || psi0 == psi1 || lambda >= 1.0 {
            return Ok(psi0.clone());
        }
        if lambda <= 0.0 {
            return Ok(psi1.clone());
        }
        let v0 = self.vector(psi0)?;
        let v1 = self.vector(psi1)?;
        let target: Vec<f64> = v0.iter().zip(&v1).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        if norm(&pick(&diff(&v0, &target), active)) <= tol / 8.0 {
            return Ok(psi0.clone());
        }
        if norm(&pick(&diff(&v1, &target), active)) <= tol / 8.0 {
            return Ok(psi1.clone());
        }
        let ctx = make_context(self.m, psi0, psi1)?;
        if active.len() == 1 {
            return self.bisect_path(&ctx, &target, active[0], tol, &v0);
        }
        self.reduce(&ctx, &target, active, tol, depth)
    }

    /// One criterion: intermediate values along the path.
    fn bisect_path(
        &self,
        ctx: &TwoPolicyContext,
        target: &[f64],
        j: usize,
        tol: f64,
        v0: &[f64],
    ) -> Result<DeterministicPolicy> {
        let eps = tol * 1e-3;
        let f0 = v0[j] - target[j];
        let p1 = ctx.path_policy(1.0)?;
        let f1 = self.vector(&p1)?[j] - target[j];
        if f1.abs() <= eps || f0.signum() == f1.signum() {
            return Ok(if f1.abs() < f0.abs() { p1 } else { ctx.phi0().clone() });
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let (mut best, mut best_f) = (ctx.phi0().clone(), f0.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let p = ctx.path_policy(mid)?;
            let f = self.vector(&p)?[j] - target[j];
            if f.abs() < best_f {
                best = p;
                best_f = f.abs();
            }
            if best_f <= eps || hi - lo <= 1e-16 {
                break;
            }
            if f.signum() == f0.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(best)
    }

    /// Two or more criteria: locate the boundary of the frozen sets, restrict
    /// to the supporting face there and drop one criterion.
    fn reduce(
        &mut self,
        ctx: &TwoPolicyContext,
        target: &[f64],
        active: &[usize],
        tol: f64,
        depth: usize,
    ) -> Result<DeterministicPolicy> {
        let k = active.len();
        let gstar = tol / 8.0;
        let rmax = self.m.max_abs_reward().max(f64::MIN_POSITIVE);
        let res = ctx.tv_modulus_inverse(gstar / ((k as f64).sqrt() * rmax))?.max(1e-15);
        let precise = |this: &Self, alpha: f64, stop_early: bool| -> Result<MnpResult<DeterministicPolicy>> {
            let sub = ctx.frozen(alpha)?;
            let seeds = vec![ctx.path_policy(alpha)?, ctx.phi1().clone()];
            let mut opts = MnpOptions::new(gstar * 1e-6, gstar * 1e-9);
            if stop_early {
                opts.stop_above = Some(4.0 * gstar);
                opts.stop_below = Some(gstar);
            }
            this.mnp(&sub, target, active, seeds, opts)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut at_hi: Option<MnpResult<DeterministicPolicy>> = None;
        while hi - lo > res {
            let mid = 0.5 * (lo + hi);
            let r = precise(self, mid, true)?;
            if r.stop == MnpStop::Above || r.upper > gstar {
                let done = r.stop != MnpStop::Above && r.upper <= 2.0 * gstar;
                hi = mid;
                at_hi = Some(r);
                if done {
                    break;
                }
            } else {
                lo = mid;
            }
        }
        let r = match at_hi {
            Some(r) if r.stop != MnpStop::Above => r,
            _ => precise(self, hi, false)?,
        };
        let Some(normal) = r.normal.clone() else {
            return Err(Error::CertifiedFailure {
                achieved: r.upper,
                tol,
                context: "no separating direction at the boundary".into(),
            });
        };
        let mut b = vec![0.0; self.m.criteria()];
        for (kk, &j) in active.iter().enumerate() {
            b[j] = normal[kk];
        }
        let frozen = ctx.frozen(hi)?;
        let sol = value_iteration(self.m, &frozen, &b, self.dp_tol)?;
        let face = conserving_submodel(self.m, &frozen, &b, &sol.value, default_eta(self.m, &b))?;
        let drop_k = (0..k)
            .max_by(|&x, &y| normal[x].abs().partial_cmp(&normal[y].abs()).unwrap())
            .unwrap();
        let dropped = active[drop_k];
        let rest: Vec<usize> = active.iter().copied().filter(|&j| j != dropped).collect();
        self.trace.push(MixLevel {
            depth,
            active: active.to_vec(),
            alpha_hat: lo,
            normal: b.clone(),
            offset: sol.h,
            dropped,
        });
        let terms: Vec<(f64, DeterministicPolicy)> = r
            .corral
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, v)| (w, face.project(&v.payload)))
            .collect();
        let sub_tol = tol / (2.0 * k as f64) / terms.len() as f64;
        self.fold(&terms, &rest, sub_tol, depth + 1)
    }

    /// Left fold of pairwise mixes over a convex combination.
    fn fold(
        &mut self,
        terms: &[(f64, DeterministicPolicy)],
        active: &[usize],
        stage_tol: f64,
        depth: usize,
    ) -> Result<DeterministicPolicy> {
        let mut acc = terms[0].1.clone();
        let mut wsum = terms[0].0;
        for (w, psi) in &terms[1..] {
            let lambda = wsum / (wsum + w);
            acc = self.rec(&acc, psi, lambda, active, stage_tol, depth)?;
            wsum += w;
        }
        Ok(acc)
    }
}

/// Distance from `target` to the performance set of `sub`, with a witness
/// convex combination of deterministic policies.
pub fn distance_to_performance_set(
    m: &AtomlessMdp,
    sub: &SubmodelSpec,
    target: &[f64],
    tol: f64,
) -> Result<DistanceResult> {
    if target.len() != m.criteria() {
        return Err(Error::validation("target", format!("{} components for {} criteria", target.len(), m.criteria())));
    }
    let eng = Engine::new(m)?;
    let all: Vec<usize> = (0..m.criteria()).collect();
    let r = eng.mnp(sub, target, &all, vec![sub.lowest_policy()], MnpOptions::new(tol * 1e-3, tol * 1e-3))?;
    let direction = if r.upper > tol { r.normal.clone() } else { None };
    Ok(DistanceResult {
        distance: r.upper,
        lower: r.lower,
        witness: r.corral.into_iter().filter(|(w, _)| *w > 0.0).map(|(w, v)| (w, v.payload)).collect(),
        projection: r.nearest,
        direction,
    })
}

/// Largest `alpha` (to the bisection resolution) with `G(alpha) <= tol`,
/// where `G(alpha)` is the distance from `target` to the frozen set.
pub fn alpha_hat(ctx: &TwoPolicyContext, target: &[f64], tol: f64) -> Result<f64> {
    let m = ctx.model();
    let g = |alpha: f64| -> Result<f64> { Ok(distance_to_performance_set(m, &ctx.frozen(alpha)?, target, tol)?.distance) };
    let g0 = g(0.0)?;
    if g0 > tol {
        return Err(Error::NotInSet(g0));
    }
    if g(1.0)? <= tol {
        return Ok(1.0);
    }
    let rmax = m.max_abs_reward().max(f64::MIN_POSITIVE);
    let res = ctx.tv_modulus_inverse(tol / ((m.criteria() as f64).sqrt() * rmax))?.max(1e-12);
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > res {
        let mid = 0.5 * (lo + hi);
        if g(mid)? <= tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Deterministic policy whose performance vector is within `tol` of
/// `lambda v^{phi0} + (1 - lambda) v^{phi1}`.
pub fn mix_pair(
    m: &AtomlessMdp,
    phi0: &DeterministicPolicy,
    phi1: &DeterministicPolicy,
    lambda: f64,
    tol: f64,
) -> Result<(DeterministicPolicy, MixCertificate)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda {lambda} not in [0, 1]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    m.check_deterministic(phi0)?;
    m.check_deterministic(phi1)?;
    let mut eng = Engine::new(m)?;
    let v0 = eng.vector(phi0)?;
    let v1 = eng.vector(phi1)?;
    let target: Vec<f64> = v0.iter().zip(&v1).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
    let all: Vec<usize> = (0..m.criteria()).collect();
    let phi = eng.rec(phi0, phi1, lambda, &all, tol, 0)?.canonical();
    let achieved = eng.vector(&phi)?;
    let error = norm(&diff(&achieved, &target));
    if error > tol {
        return Err(Error::CertifiedFailure { achieved: error, tol, context: "mix_pair".into() });
    }
    Ok((phi, MixCertificate { lambda, target, achieved, error, tol, trace: eng.trace }))
}

/// Convex combination of at most `N + 1` deterministic policies whose
/// performance vectors average to `v^pi` within `tol`.
pub fn caratheodory(m: &AtomlessMdp, pi: &StationaryPolicy, tol: f64) -> Result<Vec<(f64, DeterministicPolicy)>> {
    m.check_stationary(pi)?;
    if let Some(phi) = pi.as_deterministic() {
        return Ok(vec![(1.0, phi)]);
    }
    let eng = Engine::new(m)?;
    let n = m.criteria();
    let target = stationary_vector(m, pi)?;
    let full = SubmodelSpec::full(m);
    let mut seeds = Vec::new();
    for j in 0..n {
        for s in [1.0, -1.0] {
            let mut b = vec![0.0; n];
            b[j] = s;
            seeds.push(value_iteration(m, &full, &b, eng.dp_tol)?.policy);
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let mut opts = MnpOptions::new(tol * 1e-2, tol * 1e-6);
    opts.max_iter = 1000;
    let r = eng.mnp(&full, &target, &all, seeds, opts)?;
    if r.upper > tol {
        return Err(Error::CertifiedFailure { achieved: r.upper, tol, context: "caratheodory".into() });
    }
    let (w, verts): (Vec<f64>, Vec<Vertex<DeterministicPolicy>>) = r.corral.into_iter().unzip();
    let pts: Vec<Vec<f64>> = verts.iter().map(|v| v.point.clone()).collect();
    let w = caratheodory_prune(&pts, &w);
    let terms: Vec<(f64, DeterministicPolicy)> =
        w.into_iter().zip(verts).filter(|(w, _)| *w > 0.0).map(|(w, v)| (w, v.payload)).collect();
    let mut sum = vec![0.0; n];
    for (wi, phi) in &terms {
        for (s, x) in sum.iter_mut().zip(eng.vector(phi)?) {
            *s += wi * x;
        }
    }
    let residual = norm(&diff(&sum, &target));
    if residual > tol {
        return Err(Error::CertifiedFailure { achieved: residual, tol, context: "caratheodory".into() });
    }
    Ok(terms)
}

/// Deterministic policy with the performance vector of `pi` within `tol`.
pub fn derandomize(m: &AtomlessMdp, pi: &StationaryPolicy, tol: f64) -> Result<(DeterministicPolicy, MixCertificate)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    m.check_stationary(pi)?;
    let target = stationary_vector(m, pi)?;
    let terms = caratheodory(m, pi, tol / 4.0)?;
    let stage_tol = tol / (2.0 * terms.len() as f64);
    let mut eng = Engine::new(m)?;
    let mut acc = terms[0].1.clone();
    let mut wsum = terms[0].0;
    for (w, psi) in &terms[1..] {
        let lambda = wsum / (wsum + w);
        acc = eng.rec(&acc, psi, lambda, &(0..m.criteria()).collect::<Vec<_>>(), stage_tol, 0)?;
        wsum += w;
    }
    let phi = acc.canonical();
    let achieved = eng.vector(&phi)?;
    let error = norm(&diff(&achieved, &target));
    if error > tol {
        return Err(Error::CertifiedFailure { achieved: error, tol, context: "derandomize".into() });
    }
    Ok((phi, MixCertificate { lambda: 1.0, target, achieved, error, tol, trace: eng.trace }))
}
