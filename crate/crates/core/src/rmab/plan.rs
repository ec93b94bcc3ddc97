use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mdp::MdpParams;
use super::state::BehaviorState;
use super::whittle::{whittle_index, WhittleConfig, WhittleIndex};
use super::RmabError;
use crate::calllog::BeneficiaryId;

/// Whittle index for every `(cluster, state)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhittleTable {
    /// `indices[cluster][state.index()]`.
    pub indices: Vec<[WhittleIndex; 2]>,
}

impl WhittleTable {
    /// Clusters are solved in parallel; the result does not depend on scheduling.
    pub fn compute(params: &[MdpParams], config: &WhittleConfig) -> Result<Self, RmabError> {
        let indices = params
            .par_iter()
            .map(|mdp| -> Result<[WhittleIndex; 2], RmabError> {
                Ok([whittle_index(mdp, BehaviorState::E, config)?, whittle_index(mdp, BehaviorState::NE, config)?])
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { indices })
    }

    pub fn index(&self, cluster: usize, state: BehaviorState) -> f64 {
        self.indices[cluster][state.index()].value
    }

    pub fn entry(&self, beneficiary_id: BeneficiaryId, cluster: usize, state: BehaviorState) -> PlanEntry {
        PlanEntry { beneficiary_id, cluster, state, index: self.index(cluster, state) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub beneficiary_id: BeneficiaryId,
    pub cluster: usize,
    pub state: BehaviorState,
    pub index: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanResult {
    pub selected: Vec<BeneficiaryId>,
    pub k: usize,
}

/// Entries ordered by index (highest first), ties by ascending id.
pub fn rank_entries(entries: &[PlanEntry]) -> Vec<&PlanEntry> {
    let mut ranked: Vec<&PlanEntry> = entries.iter().collect();
    ranked.sort_by(|a, b| b.index.total_cmp(&a.index).then_with(|| a.beneficiary_id.cmp(&b.beneficiary_id)));
    ranked
}

/// The `k` highest-index beneficiaries.
pub fn plan_top_k(entries: &[PlanEntry], k: usize) -> PlanResult {
    let selected = rank_entries(entries).into_iter().take(k).map(|e| e.beneficiary_id.clone()).collect();
    PlanResult { selected, k }
}

/// Percentage of `selected` that lies in `high_engagement`.
pub fn overlap_metric(selected: &[BeneficiaryId], high_engagement: &BTreeSet<BeneficiaryId>) -> Result<f64, RmabError> {
    if selected.is_empty() {
        return Err(RmabError::EmptyInput("empty selection"));
    }
    let hits = selected.iter().filter(|id| high_engagement.contains(*id)).count();
    Ok(100.0 * hits as f64 / selected.len() as f64)
}

/// `Σ β^t r(s_t)` over the observed trajectory.
pub fn discounted_return(trajectory: &[BehaviorState], discount: f64) -> Result<f64, RmabError> {
    if trajectory.is_empty() {
        return Err(RmabError::EmptyInput("empty trajectory"));
    }
    let mut weight = 1.0;
    let mut total = 0.0;
    for s in trajectory {
        total += weight * s.reward();
        weight *= discount;
    }
    Ok(total)
}
