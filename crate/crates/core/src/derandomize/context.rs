use crate::error::{Error, Result};
use crate::measure::{PieceMeasure, StatePartition};
use crate::model::AtomlessMdp;
use crate::occupancy::{cell_mixture, cell_occupancy_exact, refine_with_grid};
use crate::policy::{ActionSet, DeterministicPolicy, StationaryPolicy};
use crate::scalar_dp::SubmodelSpec;

/// Two deterministic policies, their half/half average `pi*` and the state
/// occupancy `q` of `pi*`.
#[derive(Clone, Debug)]
pub struct TwoPolicyContext<'a> {
    model: &'a AtomlessMdp,
    phi0: DeterministicPolicy,
    phi1: DeterministicPolicy,
    /// Grid refined by both policies.
    partition: StatePartition,
    a0: Vec<usize>,
    a1: Vec<usize>,
    pi_star: StationaryPolicy,
    q: PieceMeasure,
}

pub fn make_context<'a>(
    m: &'a AtomlessMdp,
    phi0: &DeterministicPolicy,
    phi1: &DeterministicPolicy,
) -> Result<TwoPolicyContext<'a>> {
    m.check_deterministic(phi0)?;
    m.check_deterministic(phi1)?;
    let partition = m.grid().refine(phi0.partition()).refine(phi1.partition());
    let a0 = phi0.actions_on(&partition);
    let a1 = phi1.actions_on(&partition);
    let probs: Vec<Vec<f64>> = a0
        .iter()
        .zip(&a1)
        .map(|(&x, &y)| {
            let mut row = vec![0.0; m.action_count()];
            row[x] += 0.5;
            row[y] += 0.5;
            row
        })
        .collect();
    let pi_star = StationaryPolicy::new(partition.clone(), probs)?;
    let r = refine_with_grid(m, &partition);
    let mix = cell_mixture(m, &r, &pi_star.probs_on(&r.partition));
    let q = PieceMeasure::new(m.grid().clone(), cell_occupancy_exact(m, &mix)?)?;
    Ok(TwoPolicyContext { model: m, phi0: phi0.clone(), phi1: phi1.clone(), partition, a0, a1, pi_star, q })
}

impl<'a> TwoPolicyContext<'a> {
    pub fn model(&self) -> &'a AtomlessMdp {
        self.model
    }

    pub fn phi0(&self) -> &DeterministicPolicy {
        &self.phi0
    }

    pub fn phi1(&self) -> &DeterministicPolicy {
        &self.phi1
    }

    pub fn pi_star(&self) -> &StationaryPolicy {
        &self.pi_star
    }

    /// State occupancy of `pi*` on the grid.
    pub fn q(&self) -> &PieceMeasure {
        &self.q
    }

    /// Normalized distribution function of `q`.
    pub fn cdf(&self, b: f64) -> Result<f64> {
        Ok(self.q.cdf(b)? / self.q.total())
    }

    /// Threshold `b_min(alpha)` of the path.
    pub fn threshold(&self, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha {alpha} not in [0, 1]")));
        }
        Ok(self.q.quantile(alpha)?.0)
    }

    fn split(&self, alpha: f64) -> Result<(StatePartition, Vec<bool>, Vec<usize>)> {
        let b = self.threshold(alpha)?;
        let part = self.partition.with_breakpoint(b);
        let parent = part.parent_map(&self.partition);
        let below = (0..part.len()).map(|i| part.midpoint(i) < b).collect();
        Ok((part, below, parent))
    }

    /// `phi1` below the `alpha`-quantile of `q`, `phi0` above.
    pub fn path_policy(&self, alpha: f64) -> Result<DeterministicPolicy> {
        if alpha == 0.0 {
            return Ok(self.phi0.clone());
        }
        let (part, below, parent) = self.split(alpha)?;
        let acts = (0..part.len())
            .map(|i| if below[i] { self.a1[parent[i]] } else { self.a0[parent[i]] })
            .collect();
        Ok(DeterministicPolicy::new(part, acts)?.canonical())
    }

    /// Submodel with `phi1` forced below the `alpha`-threshold and the two
    /// actions `{phi0(x), phi1(x)}` above it.
    pub fn frozen(&self, alpha: f64) -> Result<SubmodelSpec> {
        let (part, below, parent) = self.split(alpha)?;
        let allowed = (0..part.len())
            .map(|i| {
                let (x, y) = (self.a0[parent[i]], self.a1[parent[i]]);
                if below[i] {
                    ActionSet::single(y)
                } else {
                    ActionSet::from_actions(&[x, y])
                }
            })
            .collect();
        SubmodelSpec::new(self.model, part, allowed)
    }

    /// Certified bound on `d_TV(Q^{phi_a}, Q^{phi_{a + delta}})`:
    /// `2 min_l [tail(l) + 2^l q(X) delta]`.
    pub fn tv_modulus(&self, delta: f64) -> Result<f64> {
        let cert = self.model.certificate()?;
        let qx = self.q.total();
        let delta = delta.abs();
        let mut best = f64::INFINITY;
        for l in 0..4096usize {
            let grow = 2f64.powi(l as i32) * qx * delta;
            if grow >= best {
                break;
            }
            best = best.min(cert.tail(l) + grow);
            if best == 0.0 {
                break;
            }
        }
        Ok(2.0 * best)
    }

    /// Smallest step (up to a factor of two on a log scale) whose modulus
    /// exceeds `eps`; steps below the returned value have modulus at most `eps`.
    pub fn tv_modulus_inverse(&self, eps: f64) -> Result<f64> {
        if self.tv_modulus(1.0)? <= eps {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (-60.0f64, 0.0f64);
        if self.tv_modulus(2f64.powf(lo))? > eps {
            return Ok(0.0);
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if self.tv_modulus(2f64.powf(mid))? <= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(2f64.powf(lo))
    }
}
