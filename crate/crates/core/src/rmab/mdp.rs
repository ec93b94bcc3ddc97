use serde::{Deserialize, Serialize};

use super::state::{Action, BehaviorState, TransitionCounts};
use super::RmabError;

/// Two-state, two-action MDP: `p[state][action][next]` with rewards +1 in E
/// and -1 in NE, discounted by `discount`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpParams {
    pub p: [[[f64; 2]; 2]; 2],
    pub discount: f64,
}

impl MdpParams {
    /// Build from the four staying probabilities
    /// `[P(E,A,E), P(NE,A,NE), P(E,I,E), P(NE,I,NE)]`.
    pub fn from_vector(v: [f64; 4], discount: f64) -> Result<Self, RmabError> {
        let mut p = [[[0.0; 2]; 2]; 2];
        let (e, ne) = (BehaviorState::E.index(), BehaviorState::NE.index());
        let (a, i) = (Action::Abstain.index(), Action::Intervene.index());
        p[e][a] = [v[0], 1.0 - v[0]];
        p[ne][a] = [1.0 - v[1], v[1]];
        p[e][i] = [v[2], 1.0 - v[2]];
        p[ne][i] = [1.0 - v[3], v[3]];
        let mdp = Self { p, discount };
        mdp.validate()?;
        Ok(mdp)
    }

    /// `[P(E,A,E), P(NE,A,NE), P(E,I,E), P(NE,I,NE)]`.
    pub fn vector(&self) -> [f64; 4] {
        use Action::*;
        use BehaviorState::*;
        [self.prob(E, Abstain, E), self.prob(NE, Abstain, NE), self.prob(E, Intervene, E), self.prob(NE, Intervene, NE)]
    }

    pub fn prob(&self, state: BehaviorState, action: Action, next: BehaviorState) -> f64 {
        self.p[state.index()][action.index()][next.index()]
    }

    pub fn reward(state: BehaviorState) -> f64 {
        state.reward()
    }

    pub fn validate(&self) -> Result<(), RmabError> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(RmabError::InvalidDiscount(self.discount));
        }
        for row in self.p.iter().flatten() {
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
                return Err(RmabError::InvalidParams(format!("transition row {row:?} is not a distribution")));
            }
        }
        Ok(())
    }
}

/// Smoothed maximum-likelihood estimate `(count + α) / (row total + 2α)`.
pub fn estimate_params(counts: &TransitionCounts, alpha: f64, discount: f64) -> Result<MdpParams, RmabError> {
    if !(alpha >= 0.0) {
        return Err(RmabError::InvalidParams(format!("smoothing {alpha} must be non-negative")));
    }
    let mut p = [[[0.0; 2]; 2]; 2];
    for s in BehaviorState::ALL {
        for a in Action::ALL {
            let row = counts.counts[s.index()][a.index()];
            let denom = (row[0] + row[1]) as f64 + 2.0 * alpha;
            if denom == 0.0 {
                return Err(RmabError::UndefinedRow { state: s, action: a });
            }
            let to_e = (row[0] as f64 + alpha) / denom;
            p[s.index()][a.index()] = [to_e, 1.0 - to_e];
        }
    }
    let mdp = MdpParams { p, discount };
    mdp.validate()?;
    Ok(mdp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;
    use BehaviorState::*;

    fn counts_with(row: (BehaviorState, Action), to_e: u64, to_ne: u64) -> TransitionCounts {
        let mut c = TransitionCounts::default();
        c.counts[row.0.index()][row.1.index()] = [to_e, to_ne];
        c
    }

    #[test]
    fn estimate_examples() {
        let c = counts_with((E, Abstain), 3, 1);
        let mdp = estimate_params(&c, 1.0, 0.95).unwrap();
        assert!((mdp.prob(E, Abstain, E) - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(mdp.prob(NE, Intervene, E), 0.5);

        let mut full = c;
        for s in BehaviorState::ALL {
            for a in Action::ALL {
                if (s, a) != (E, Abstain) {
                    full.counts[s.index()][a.index()] = [1, 1];
                }
            }
        }
        let mdp = estimate_params(&full, 0.0, 0.95).unwrap();
        assert_eq!(mdp.prob(E, Abstain, E), 0.75);
        assert!(matches!(estimate_params(&c, 0.0, 0.95), Err(RmabError::UndefinedRow { .. })));
    }

    #[test]
    fn vector_round_trip() {
        let v = [0.9, 0.8, 0.95, 0.3];
        let mdp = MdpParams::from_vector(v, 0.9).unwrap();
        assert_eq!(mdp.vector(), v);
        assert_eq!(mdp.prob(NE, Intervene, E), 1.0 - 0.3);
        assert!(MdpParams::from_vector([1.2, 0.5, 0.5, 0.5], 0.9).is_err());
        assert!(MdpParams::from_vector(v, 1.0).is_err());
    }
}
