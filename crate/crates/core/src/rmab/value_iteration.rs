use serde::{Deserialize, Serialize};

use super::mdp::MdpParams;
use super::state::{Action, BehaviorState};
use super::RmabError;

const MAX_SWEEPS: usize = 1_000_000;

/// Action values under a passive subsidy, indexed `[state][action]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsidizedQ {
    pub subsidy: f64,
    pub q: [[f64; 2]; 2],
    pub value: [f64; 2],
    pub sweeps: usize,
}

impl SubsidizedQ {
    pub fn get(&self, state: BehaviorState, action: Action) -> f64 {
        self.q[state.index()][action.index()]
    }

    pub fn greedy(&self, state: BehaviorState) -> Action {
        let q = self.q[state.index()];
        if q[Action::Intervene.index()] > q[Action::Abstain.index()] {
            Action::Intervene
        } else {
            Action::Abstain
        }
    }
}

/// One Bellman backup: `Q(s,a) = r(s) + m·[a = A] + β Σ p(s,a,s') V(s')`.
pub fn bellman_q(mdp: &MdpParams, subsidy: f64, value: &[f64; 2]) -> [[f64; 2]; 2] {
    let mut q = [[0.0; 2]; 2];
    for s in BehaviorState::ALL {
        for a in Action::ALL {
            let row = mdp.p[s.index()][a.index()];
            let future = row[0] * value[0] + row[1] * value[1];
            let bonus = if a == Action::Abstain { subsidy } else { 0.0 };
            q[s.index()][a.index()] = s.reward() + bonus + mdp.discount * future;
        }
    }
    q
}

fn max_over_actions(q: &[[f64; 2]; 2]) -> [f64; 2] {
    [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])]
}

fn stopping_threshold(mdp: &MdpParams, tol: f64) -> Result<f64, RmabError> {
    if !(0.0..1.0).contains(&mdp.discount) {
        return Err(RmabError::InvalidDiscount(mdp.discount));
    }
    if !(tol > 0.0) {
        return Err(RmabError::InvalidParams(format!("tolerance {tol} must be positive")));
    }
    Ok(if mdp.discount == 0.0 { f64::INFINITY } else { tol * (1.0 - mdp.discount) / (2.0 * mdp.discount) })
}

/// Iterates the Bellman optimality operator from `V = 0` until successive
/// values differ by less than `tol (1 − β) / (2β)` in the sup norm.
pub fn value_iteration(mdp: &MdpParams, subsidy: f64, tol: f64) -> Result<SubsidizedQ, RmabError> {
    let threshold = stopping_threshold(mdp, tol)?;
    let mut value = [0.0; 2];
    let mut sweeps = 0;
    loop {
        let next = max_over_actions(&bellman_q(mdp, subsidy, &value));
        let diff = (next[0] - value[0]).abs().max((next[1] - value[1]).abs());
        value = next;
        sweeps += 1;
        if diff < threshold || sweeps >= MAX_SWEEPS {
            break;
        }
    }
    let q = bellman_q(mdp, subsidy, &value);
    Ok(SubsidizedQ { subsidy, q, value: max_over_actions(&q), sweeps })
}

/// Iterative evaluation of a fixed deterministic policy (`policy[state]`).
pub fn policy_evaluation(mdp: &MdpParams, policy: [Action; 2], subsidy: f64, tol: f64) -> Result<[f64; 2], RmabError> {
    let threshold = stopping_threshold(mdp, tol)?;
    let mut value = [0.0; 2];
    for _ in 0..MAX_SWEEPS {
        let q = bellman_q(mdp, subsidy, &value);
        let next = [q[0][policy[0].index()], q[1][policy[1].index()]];
        let diff = (next[0] - value[0]).abs().max((next[1] - value[1]).abs());
        value = next;
        if diff < threshold {
            break;
        }
    }
    Ok(value)
}
