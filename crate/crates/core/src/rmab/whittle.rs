//! Whittle index by bisection on the passive subsidy.
//!
//! The index of a state is the smallest subsidy `m` at which the planner is
//! indifferent between intervening and abstaining. With rewards bounded by 1
//! in magnitude the crossing lies inside `±(2 / (1 − β) + 1)`.

use serde::{Deserialize, Serialize};

use super::mdp::MdpParams;
use super::state::{Action, BehaviorState};
use super::value_iteration::value_iteration;
use super::RmabError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WhittleConfig {
    /// Stop bisecting once the bracket is narrower than this.
    pub tol: f64,
    /// Tolerance handed to each inner value iteration.
    pub value_tol: f64,
}

impl Default for WhittleConfig {
    fn default() -> Self {
        Self { tol: 1e-6, value_tol: 1e-9 }
    }
}

/// Δ(m) kept the same sign across the whole bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexabilityWarning {
    pub state: BehaviorState,
    pub delta_low: f64,
    pub delta_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhittleIndex {
    pub value: f64,
    /// Set when no crossing was found; `value` is then the bracket end.
    pub warning: Option<IndexabilityWarning>,
}

pub fn subsidy_bracket(discount: f64) -> (f64, f64) {
    let bound = 2.0 / (1.0 - discount) + 1.0;
    (-bound, bound)
}

/// `Q_m(s, I) − Q_m(s, A)`.
pub fn intervention_advantage(
    mdp: &MdpParams,
    state: BehaviorState,
    subsidy: f64,
    value_tol: f64,
) -> Result<f64, RmabError> {
    let q = value_iteration(mdp, subsidy, value_tol)?;
    Ok(q.get(state, Action::Intervene) - q.get(state, Action::Abstain))
}

pub fn whittle_index(mdp: &MdpParams, state: BehaviorState, config: &WhittleConfig) -> Result<WhittleIndex, RmabError> {
    mdp.validate()?;
    if !(config.tol > 0.0) {
        return Err(RmabError::InvalidParams(format!("whittle tolerance {} must be positive", config.tol)));
    }
    let advantage = |m| intervention_advantage(mdp, state, m, config.value_tol);
    let (mut lo, mut hi) = subsidy_bracket(mdp.discount);
    let delta_low = advantage(lo)?;
    let delta_high = advantage(hi)?;
    if delta_low <= 0.0 || delta_high > 0.0 {
        let warning = IndexabilityWarning { state, delta_low, delta_high };
        log::warn!("no sign change of the intervention advantage in [{lo}, {hi}]: {warning:?}");
        let value = if delta_low <= 0.0 { lo } else { hi };
        return Ok(WhittleIndex { value, warning: Some(warning) });
    }
    while hi - lo >= config.tol {
        let mid = 0.5 * (lo + hi);
        if advantage(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(WhittleIndex { value: 0.5 * (lo + hi), warning: None })
}

/// Adjacent grid points where Δ(m) increases. Indexable arms have none.
pub fn indexability_violations(
    mdp: &MdpParams,
    state: BehaviorState,
    grid: &[f64],
    value_tol: f64,
) -> Result<Vec<(f64, f64)>, RmabError> {
    let deltas =
        grid.iter().map(|&m| intervention_advantage(mdp, state, m, value_tol)).collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for i in 1..grid.len() {
        if deltas[i] > deltas[i - 1] + 4.0 * value_tol {
            out.push((grid[i - 1], grid[i]));
        }
    }
    if !out.is_empty() {
        log::warn!("Δ(m) increases on {} grid intervals for state {}", out.len(), state.as_str());
    }
    Ok(out)
}
