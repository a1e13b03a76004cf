//! TOML model documents.
//!
//! ```toml
//! kind = "discounted"      # or "absorbing"
//! beta = 0.9               # discounted only
//! grid = [0.0, 0.5, 1.0]
//! actions = 2
//! available = [[0, 1], [1]]
//! initial = [[0.0, 1.0, 1.0]]          # (lo, hi, mass) rows
//!
//! [[kernel]]
//! cell = 0
//! action = 0
//! to = [[0.0, 0.5, 0.25], [0.5, 1.0, 0.25]]
//! absorb = 0.5
//!
//! [[rewards]]
//! cell = 0
//! action = 0
//! r = [1.0, 0.0]
//! ```
//!
//! Intervals in `to` and `initial` may cut grid cells; on load the grid is
//! refined so that every measure is uniform within each cell.

use serde::{Deserialize, Serialize};

use super::{AtomlessMdp, ModelKind, ModelParts, Transition};
use crate::error::{Error, Result};
use crate::measure::{StatePartition, BREAK_EPS};
use crate::policy::ActionSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub grid: Vec<f64>,
    pub actions: usize,
    pub available: Vec<Vec<usize>>,
    pub initial: Vec<[f64; 3]>,
    #[serde(default)]
    pub kernel: Vec<KernelEntry>,
    #[serde(default)]
    pub rewards: Vec<RewardEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub cell: usize,
    pub action: usize,
    #[serde(default)]
    pub to: Vec<[f64; 3]>,
    pub absorb: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardEntry {
    pub cell: usize,
    pub action: usize,
    pub r: Vec<f64>,
}

fn check_interval(path: &str, row: &[f64; 3]) -> Result<()> {
    let [lo, hi, mass] = *row;
    if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
        return Err(Error::validation(path, format!("bad interval [{lo}, {hi}]")));
    }
    if !(mass.is_finite() && mass >= 0.0) {
        return Err(Error::validation(path, format!("negative or non-finite mass {mass}")));
    }
    Ok(())
}

/// Spreads `(lo, hi, mass)` rows over the cells of `grid`, proportionally to overlap.
fn spread(grid: &StatePartition, rows: &[[f64; 3]]) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for &[lo, hi, mass] in rows {
        if mass == 0.0 {
            continue;
        }
        let mut c = grid.locate(lo);
        while c < grid.len() {
            let (a, b) = grid.interval(c);
            if a >= hi - BREAK_EPS {
                break;
            }
            let overlap = (b.min(hi) - a.max(lo)).max(0.0);
            out[c] += mass * overlap / (hi - lo);
            c += 1;
        }
    }
    out
}

impl ModelDoc {
    pub fn from_toml(text: &str) -> Result<ModelDoc> {
        toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model documents always serialize")
    }

    /// Validates the document and builds the model.
    pub fn build(&self) -> Result<AtomlessMdp> {
        let kind = match (self.kind.as_str(), self.beta) {
            ("absorbing", None) => ModelKind::Absorbing,
            ("absorbing", Some(_)) => return Err(Error::validation("beta", "only allowed for discounted models")),
            ("discounted", Some(beta)) => ModelKind::Discounted { beta },
            ("discounted", None) => return Err(Error::validation("beta", "missing discount factor")),
            (k, _) => return Err(Error::validation("kind", format!("unknown kind `{k}`"))),
        };
        let declared = StatePartition::new(self.grid.clone()).map_err(|e| match e {
            Error::Validation { path, message } => Error::validation(format!("grid.{path}"), message),
            e => e,
        })?;
        let m0 = declared.len();
        let na = self.actions;
        if na == 0 || na > crate::policy::MAX_ACTIONS {
            return Err(Error::validation("actions", format!("action count {na} out of range")));
        }
        if self.available.len() != m0 {
            return Err(Error::validation(
                "available",
                format!("{} entries for {m0} grid cells", self.available.len()),
            ));
        }
        let mut available = Vec::with_capacity(m0);
        for (c, acts) in self.available.iter().enumerate() {
            if acts.is_empty() {
                return Err(Error::validation(format!("available[{c}]"), "empty action set"));
            }
            if let Some(a) = acts.iter().find(|&&a| a >= na) {
                return Err(Error::validation(format!("available[{c}]"), format!("action {a} out of range")));
            }
            available.push(ActionSet::from_actions(acts));
        }

        // gather all breakpoints and refine the grid
        let mut extra = Vec::new();
        for (i, row) in self.initial.iter().enumerate() {
            check_interval(&format!("initial[{i}]"), row)?;
            extra.extend_from_slice(&row[..2]);
        }
        let mut kernel_rows: Vec<Option<&KernelEntry>> = vec![None; m0 * na];
        for (i, k) in self.kernel.iter().enumerate() {
            let path = format!("kernel[{i}]");
            if k.cell >= m0 || k.action >= na {
                return Err(Error::validation(path, "cell or action out of range"));
            }
            if !available[k.cell].contains(k.action) {
                return Err(Error::validation(path, format!("action {} not available in cell {}", k.action, k.cell)));
            }
            if kernel_rows[k.cell * na + k.action].replace(k).is_some() {
                return Err(Error::validation(path, "duplicate entry"));
            }
            for (j, row) in k.to.iter().enumerate() {
                check_interval(&format!("{path}.to[{j}]"), row)?;
                extra.extend_from_slice(&row[..2]);
            }
            if !(k.absorb.is_finite() && k.absorb >= 0.0) {
                return Err(Error::validation(format!("{path}.absorb"), format!("invalid mass {}", k.absorb)));
            }
            let total: f64 = k.to.iter().map(|r| r[2]).sum::<f64>() + k.absorb;
            if (total - 1.0).abs() > super::MASS_TOL {
                return Err(Error::validation(path, format!("row sums to {total}, expected 1")));
            }
        }
        let mut reward_rows: Vec<Option<&RewardEntry>> = vec![None; m0 * na];
        for (i, r) in self.rewards.iter().enumerate() {
            let path = format!("rewards[{i}]");
            if r.cell >= m0 || r.action >= na {
                return Err(Error::validation(path, "cell or action out of range"));
            }
            if !available[r.cell].contains(r.action) {
                return Err(Error::validation(path, format!("action {} not available in cell {}", r.action, r.cell)));
            }
            if reward_rows[r.cell * na + r.action].replace(r).is_some() {
                return Err(Error::validation(path, "duplicate entry"));
            }
        }
        for c in 0..m0 {
            for a in available[c].iter() {
                if kernel_rows[c * na + a].is_none() {
                    return Err(Error::validation("kernel", format!("missing entry for cell {c}, action {a}")));
                }
                if reward_rows[c * na + a].is_none() {
                    return Err(Error::validation("rewards", format!("missing entry for cell {c}, action {a}")));
                }
            }
        }

        let grid = declared.refine(&StatePartition::new({
            let mut v: Vec<f64> = extra.into_iter().filter(|&x| x > 0.0 && x < 1.0).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            let mut b = vec![0.0];
            b.extend(v);
            b.push(1.0);
            b
        })?);
        let parent = grid.parent_map(&declared);
        let m = grid.len();
        let mut kernel = Vec::with_capacity(m * na);
        let mut rewards = Vec::with_capacity(m * na);
        for &p in parent.iter() {
            for a in 0..na {
                match (kernel_rows[p * na + a], reward_rows[p * na + a]) {
                    (Some(k), Some(r)) => {
                        let masses = spread(&grid, &k.to);
                        let to = masses.into_iter().enumerate().filter(|(_, x)| *x > 0.0).collect();
                        kernel.push(Transition { to, absorb: k.absorb });
                        rewards.push(r.r.clone());
                    }
                    _ => {
                        kernel.push(Transition::absorbing());
                        rewards.push(Vec::new());
                    }
                }
            }
        }
        AtomlessMdp::from_parts(ModelParts {
            available: parent.iter().map(|&p| available[p]).collect(),
            initial: spread(&grid, &self.initial),
            grid,
            action_count: na,
            kernel,
            rewards,
            kind,
        })
    }

    /// Document describing `m` on its (already refined) grid.
    pub fn from_model(m: &AtomlessMdp) -> ModelDoc {
        let grid = m.grid();
        let cell_row = |c: usize, mass: f64| {
            let (lo, hi) = grid.interval(c);
            [lo, hi, mass]
        };
        let mut kernel = Vec::new();
        let mut rewards = Vec::new();
        for c in 0..m.cells() {
            for a in m.available(c).iter() {
                let t = m.declared_transition(c, a);
                kernel.push(KernelEntry {
                    cell: c,
                    action: a,
                    to: t.to.iter().map(|&(d, x)| cell_row(d, x)).collect(),
                    absorb: t.absorb,
                });
                rewards.push(RewardEntry { cell: c, action: a, r: m.reward(c, a).to_vec() });
            }
        }
        let (kind, beta) = match m.kind() {
            ModelKind::Absorbing => ("absorbing".to_string(), None),
            ModelKind::Discounted { beta } => ("discounted".to_string(), Some(beta)),
        };
        ModelDoc {
            kind,
            beta,
            grid: grid.breakpoints().to_vec(),
            actions: m.action_count(),
            available: (0..m.cells()).map(|c| m.available(c).to_vec()).collect(),
            initial: m
                .initial()
                .iter()
                .enumerate()
                .filter(|(_, x)| **x > 0.0)
                .map(|(c, &x)| cell_row(c, x))
                .collect(),
            kernel,
            rewards,
        }
    }
}

/// Parses and validates a TOML model document.
pub fn load_model(text: &str) -> Result<AtomlessMdp> {
    ModelDoc::from_toml(text)?.build()
}

impl AtomlessMdp {
    pub fn from_toml(text: &str) -> Result<AtomlessMdp> {
        load_model(text)
    }

    pub fn to_toml(&self) -> String {
        ModelDoc::from_model(self).to_toml()
    }
}
