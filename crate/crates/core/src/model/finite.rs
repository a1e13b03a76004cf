use crate::error::{Error, Result};

/// Cap on the number of survival iterations before giving up.
pub const CERTIFICATE_ITERATION_CAP: usize = 100_000;

/// One available action of a finite state.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteChoice {
    pub label: usize,
    pub to: Vec<(usize, f64)>,
    pub absorb: f64,
    pub reward: Vec<f64>,
}

/// Finite-state MDP with an implicit absorbing sink.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    choices: Vec<Vec<FiniteChoice>>,
    initial: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(choices: Vec<Vec<FiniteChoice>>, initial: Vec<f64>) -> Result<Self> {
        let n = choices.len();
        if initial.len() != n {
            return Err(Error::validation("initial", "length differs from the state count"));
        }
        for (s, cs) in choices.iter().enumerate() {
            if cs.is_empty() {
                return Err(Error::validation(format!("state[{s}]"), "no available action"));
            }
            for c in cs {
                if c.to.iter().any(|&(d, m)| d >= n || m < 0.0) || c.absorb < 0.0 {
                    return Err(Error::validation(format!("state[{s}]"), "invalid transition"));
                }
                let total: f64 = c.to.iter().map(|(_, m)| m).sum::<f64>() + c.absorb;
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::validation(format!("state[{s}]"), format!("row sums to {total}")));
                }
            }
        }
        Ok(FiniteMdp { choices, initial })
    }

    pub fn states(&self) -> usize {
        self.choices.len()
    }

    pub fn choices(&self, s: usize) -> &[FiniteChoice] {
        &self.choices[s]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// `P(x_t` alive`)` for `t = 0..steps` under the stationary deterministic
    /// policy picking `policy[s]` (an index into `choices(s)`).
    pub fn alive_masses(&self, policy: &[usize], steps: usize) -> Vec<f64> {
        let mut q = self.initial.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            out.push(q.iter().sum());
            let mut next = vec![0.0; q.len()];
            for (s, &mass) in q.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for &(d, p) in &self.choices[s][policy[s]].to {
                    next[d] += mass * p;
                }
            }
            q = next;
        }
        out
    }

    /// Expected absorption time `E T` under a deterministic policy, summed
    /// until the alive mass falls below `tol`.
    pub fn expected_absorption_time(&self, policy: &[usize], tol: f64) -> f64 {
        self.tail_sum(policy, 0, tol)
    }

    /// `E sum_{t >= n} I{t < T}` under a deterministic policy.
    pub fn tail_sum(&self, policy: &[usize], n: usize, tol: f64) -> f64 {
        let mut q = self.initial.clone();
        let mut t = 0usize;
        let mut acc = 0.0;
        loop {
            let alive: f64 = q.iter().sum();
            if t >= n {
                acc += alive;
            }
            if alive <= tol || t > 10_000_000 {
                return acc;
            }
            let mut next = vec![0.0; q.len()];
            for (s, &mass) in q.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for &(d, p) in &self.choices[s][policy[s]].to {
                    next[d] += mass * p;
                }
            }
            q = next;
            t += 1;
        }
    }
}

/// Certified bounds on absorption: `l` bounds `sup_x sup_policy E_x T` and
/// [`tail`](Self::tail) bounds `sup_policy E sum_{t >= n} I{t < T}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsorptionCertificate {
    l: f64,
    /// `s_n = sup_policy P(T > n)` from the initial distribution.
    survival: Vec<f64>,
    /// `S_n = sup_x sup_policy P_x(T > n)`.
    survival_max: Vec<f64>,
}

impl AbsorptionCertificate {
    pub fn l(&self) -> f64 {
        self.l
    }

    /// Number of survival iterations performed.
    pub fn horizon(&self) -> usize {
        self.survival.len() - 1
    }

    /// Upper bound on `sup_x sup_policy P_x(T > n)`, extended beyond the
    /// computed horizon by submultiplicativity.
    pub fn survival_max(&self, n: usize) -> f64 {
        let k = self.horizon();
        if n <= k {
            return self.survival_max[n];
        }
        if k == 0 {
            return 0.0;
        }
        let rho = self.survival_max[k];
        let r = n % k;
        self.survival_max[r] * rho.powi((n / k) as i32)
    }

    /// Upper bound on `sup_policy P(T > n)` from the initial distribution.
    pub fn survival(&self, n: usize) -> f64 {
        let k = self.horizon();
        if n <= k {
            return self.survival[n];
        }
        self.survival[k] * self.survival_max(n - k)
    }

    /// Upper bound on `sup_policy E sum_{t >= n} I{t < T}`.
    pub fn tail(&self, n: usize) -> f64 {
        let l = self.l;
        let mut t = l.min(l * l / (n as f64 + 1.0));
        t = t.min(self.survival(n) * l);
        t
    }

    /// Smallest `n` with `survival_max(n) * l <= eps`.
    pub fn steps_for(&self, eps: f64) -> usize {
        let k = self.horizon();
        if let Some(n) = (0..=k).find(|&n| self.survival_max[n] * self.l <= eps) {
            return n;
        }
        let mut n = k;
        while self.survival_max(n) * self.l > eps && n < 100 * CERTIFICATE_ITERATION_CAP {
            n += k.max(1);
        }
        n
    }
}

/// Computes `L` by value iteration with unit reward together with the
/// survival sequence; fails if survival does not decay within the iteration cap.
pub fn absorption_certificate(m: &FiniteMdp, tol: f64) -> Result<AbsorptionCertificate> {
    let n = m.states();
    let mut s = vec![1.0; n];
    let mut u = vec![0.0; n];
    let mut survival = vec![m.initial.iter().sum::<f64>().min(1.0)];
    let mut survival_max = vec![1.0];
    let mut best_l = f64::INFINITY;
    for _ in 1..=CERTIFICATE_ITERATION_CAP {
        let mut s_next = vec![0.0; n];
        let mut u_next = vec![0.0; n];
        for x in 0..n {
            let (mut bs, mut bu) = (0.0f64, 0.0f64);
            for c in &m.choices[x] {
                let (mut ps, mut pu) = (0.0, 0.0);
                for &(d, p) in &c.to {
                    ps += p * s[d];
                    pu += p * u[d];
                }
                bs = bs.max(ps);
                bu = bu.max(pu);
            }
            s_next[x] = bs.min(1.0);
            u_next[x] = 1.0 + bu;
        }
        s = s_next;
        u = u_next;
        let smax = s.iter().fold(0.0f64, |a, &b| a.max(b));
        let umax = u.iter().fold(0.0f64, |a, &b| a.max(b));
        survival.push(m.initial.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>().min(smax));
        survival_max.push(smax);
        if smax < 1.0 {
            best_l = best_l.min(umax / (1.0 - smax));
            if smax * best_l <= tol {
                return Ok(AbsorptionCertificate { l: best_l, survival, survival_max });
            }
        }
    }
    Err(Error::NotCertified(format!(
        "survival probability did not decay within {CERTIFICATE_ITERATION_CAP} iterations (last sup {})",
        survival_max.last().unwrap()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(stay: f64) -> FiniteMdp {
        FiniteMdp::new(
            vec![vec![FiniteChoice { label: 0, to: vec![(0, stay)], absorb: 1.0 - stay, reward: vec![0.0] }]],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn geometric_chain() {
        let c = absorption_certificate(&chain(0.5), 1e-13).unwrap();
        assert!((c.l() - 2.0).abs() < 1e-12);
        for n in 0..20 {
            assert!((c.survival(n) - 0.5f64.powi(n as i32)).abs() < 1e-15);
            assert!((c.tail(n) - 2.0 * 0.5f64.powi(n as i32)).abs() < 1e-12);
        }
        assert!(c.tail(200) < 1e-40);
    }

    #[test]
    fn immediate_absorption() {
        let c = absorption_certificate(&chain(0.0), 1e-13).unwrap();
        assert_eq!(c.l(), 1.0);
        assert_eq!(c.tail(0), 1.0);
        for n in 1..5 {
            assert_eq!(c.tail(n), 0.0);
        }
    }

    #[test]
    fn tail_nonincreasing() {
        let c = absorption_certificate(&chain(0.9), 1e-13).unwrap();
        assert!((c.l() - 10.0).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for n in 0..2000 {
            let t = c.tail(n);
            assert!(t <= prev + 1e-15);
            prev = t;
        }
    }
}
