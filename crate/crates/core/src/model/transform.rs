use super::{AtomlessMdp, ModelKind, Transition};
use crate::error::{Error, Result};

/// Replaces discounting by absorption: each step keeps a fraction `beta` of
/// the destination mass and sends the rest to the sink.
pub fn discounted_to_absorbing(m: &AtomlessMdp) -> Result<AtomlessMdp> {
    let ModelKind::Discounted { .. } = m.kind() else {
        return Err(Error::Domain("model is not discounted".into()));
    };
    let mut parts = m.to_parts();
    for c in 0..m.cells() {
        for a in 0..m.action_count() {
            parts.kernel[c * m.action_count() + a] = m.transition(c, a).clone();
        }
    }
    parts.kind = ModelKind::Absorbing;
    AtomlessMdp::from_parts(parts)
}

/// Weighted-norm transform with a positive weight `w` per grid cell.
///
/// Requires `sum_y w(y) p(y|x,a) <= w(x)` for every available pair; the
/// returned model has the same performance vector as `m` for every policy.
/// Discounted models are first converted with [`discounted_to_absorbing`].
pub fn weighted_transform(m: &AtomlessMdp, w: &[f64]) -> Result<AtomlessMdp> {
    let n = m.cells();
    let na = m.action_count();
    if w.len() != n {
        return Err(Error::validation("weights", format!("{} weights for {n} cells", w.len())));
    }
    if let Some(c) = w.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::validation(format!("weights[{c}]"), "weights must be positive"));
    }
    let total: f64 = m.initial().iter().zip(w).map(|(mu, wc)| mu * wc).sum();
    let mut parts = m.to_parts();
    for c in 0..n {
        for a in m.available(c).iter() {
            let t = m.transition(c, a);
            let to: Vec<(usize, f64)> = t.to.iter().map(|&(d, p)| (d, p * w[d] / w[c])).collect();
            let ratio: f64 = to.iter().map(|(_, p)| p).sum();
            if ratio > 1.0 + 1e-12 {
                return Err(Error::WeightCondition { cell: c, action: a, ratio, bound: 1.0 });
            }
            let idx = c * na + a;
            parts.kernel[idx] = Transition { to, absorb: (1.0 - ratio).max(0.0) };
            parts.rewards[idx] = m.reward(c, a).iter().map(|r| r / w[c] * total).collect();
        }
    }
    parts.initial = m.initial().iter().zip(w).map(|(mu, wc)| mu * wc / total).collect();
    // rounding in the rescaled initial masses
    let s: f64 = parts.initial.iter().sum();
    parts.initial.iter_mut().for_each(|x| *x /= s);
    parts.kind = ModelKind::Absorbing;
    AtomlessMdp::from_parts(parts)
}
