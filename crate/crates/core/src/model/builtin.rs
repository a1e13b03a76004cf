use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{random_model, AtomlessMdp, FiniteChoice, FiniteMdp, ModelKind, ModelParts, RandomSpec, Transition};
use crate::error::{Error, Result};
use crate::lyapunov::VectorMeasure;
use crate::measure::StatePartition;
use crate::policy::ActionSet;

/// Parameters consulted by [`builtin`]; each name uses only some of them.
#[derive(Clone, Debug)]
pub struct BuiltinParams {
    /// Truncation level of `example-3.12`.
    pub n_max: usize,
    /// Cell count of `lyapunov-onestep`.
    pub grid: usize,
    /// Seed of `random`.
    pub seed: u64,
    /// Discount factor of `one-cell-discounted`.
    pub beta: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        BuiltinParams { n_max: 10, grid: 64, seed: 0, beta: 0.5 }
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "example-3.12",
    "lyapunov-onestep",
    "unit-interval-onestep",
    "one-cell-discounted",
    "random",
];

#[derive(Clone, Debug)]
pub enum BuiltinModel {
    Atomless(AtomlessMdp),
    /// Countable-state example truncated to finitely many states; atomic.
    Finite(EscapeChain),
}

pub fn builtin(name: &str, params: &BuiltinParams) -> Result<BuiltinModel> {
    Ok(match name {
        "example-3.12" => BuiltinModel::Finite(EscapeChain::new(params.n_max)?),
        "lyapunov-onestep" => {
            BuiltinModel::Atomless(VectorMeasure::linear_example(params.grid.max(1)).as_onestep_mdp()?)
        }
        "unit-interval-onestep" => BuiltinModel::Atomless(unit_interval_onestep()),
        "one-cell-discounted" => {
            if !(0.0..1.0).contains(&params.beta) {
                return Err(Error::Domain(format!("discount factor {} not in [0, 1)", params.beta)));
            }
            BuiltinModel::Atomless(one_cell_discounted(params.beta, vec![1.0]))
        }
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            BuiltinModel::Atomless(random_model(&mut rng, &RandomSpec::default()))
        }
        _ => return Err(Error::UnknownBuiltin(name.to_string())),
    })
}

/// One step on `[0, 1]` under Lebesgue measure, actions `{0, 1}`, reward `r(x, a) = a`.
pub fn unit_interval_onestep() -> AtomlessMdp {
    AtomlessMdp::from_parts(ModelParts {
        grid: StatePartition::unit(),
        action_count: 2,
        available: vec![ActionSet::all(2)],
        kernel: vec![Transition::absorbing(), Transition::absorbing()],
        rewards: vec![vec![0.0], vec![1.0]],
        initial: vec![1.0],
        kind: ModelKind::Absorbing,
    })
    .expect("valid builtin")
}

/// One cell, one action, uniform self-transition, discount `beta`.
pub fn one_cell_discounted(beta: f64, reward: Vec<f64>) -> AtomlessMdp {
    AtomlessMdp::from_parts(ModelParts {
        grid: StatePartition::unit(),
        action_count: 1,
        available: vec![ActionSet::single(0)],
        kernel: vec![Transition { to: vec![(0, 1.0)], absorb: 0.0 }],
        rewards: vec![reward],
        initial: vec![1.0],
        kind: ModelKind::Discounted { beta },
    })
    .expect("valid builtin")
}

/// Absorbing but not uniformly absorbing example, truncated at level `n_max`.
///
/// States `(i, j)` with `0 <= j < 2^i`; at `(i, 0)` one may continue (reach
/// `(i + 1, 0)` or the sink with probability 1/2 each) or stop (walk through
/// the `2^i` states of level `i`, then the sink). At the last level continuing
/// returns to `(n_max, 0)` with probability 1/2, which keeps the expected
/// absorption time of every policy equal to that of the untruncated model.
#[derive(Clone, Debug)]
pub struct EscapeChain {
    n_max: usize,
    mdp: FiniteMdp,
}

/// Choice index of "continue" at `(i, 0)`; "stop" is 1.
const CONTINUE: usize = 0;
const STOP: usize = 1;

impl EscapeChain {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max > 14 {
            return Err(Error::TooLarge(format!("truncation level {n_max} exceeds 14")));
        }
        let idx = |i: usize, j: usize| (1usize << i) - 1 + j;
        let states = (1usize << (n_max + 1)) - 1;
        let mut choices = vec![Vec::new(); states];
        for i in 0..=n_max {
            let width = 1usize << i;
            for j in 0..width {
                let walk = if j + 1 < width {
                    FiniteChoice { label: STOP, to: vec![(idx(i, j + 1), 1.0)], absorb: 0.0, reward: vec![1.0] }
                } else {
                    FiniteChoice { label: STOP, to: vec![], absorb: 1.0, reward: vec![1.0] }
                };
                if j == 0 {
                    let next = if i < n_max { idx(i + 1, 0) } else { idx(i, 0) };
                    let cont = FiniteChoice { label: CONTINUE, to: vec![(next, 0.5)], absorb: 0.5, reward: vec![1.0] };
                    choices[idx(i, j)] = vec![cont, walk];
                } else {
                    choices[idx(i, j)] = vec![walk];
                }
            }
        }
        let mut initial = vec![0.0; states];
        initial[0] = 1.0;
        Ok(EscapeChain { n_max, mdp: FiniteMdp::new(choices, initial)? })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }

    /// Always continue.
    pub fn phi_infinity(&self) -> Vec<usize> {
        vec![CONTINUE; self.mdp.states()]
    }

    /// Continue below level `n`, stop at level `n`.
    pub fn phi(&self, n: usize) -> Vec<usize> {
        let mut p = self.phi_infinity();
        p[(1usize << n) - 1] = STOP;
        p
    }
}
