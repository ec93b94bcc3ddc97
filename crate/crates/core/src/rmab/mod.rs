//! Restless-bandit intervention planning: monthly engagement states,
//! transition estimation, clustering, Whittle indices, and top-k selection.

mod clustering;
mod kmeans;
mod mdp;
mod plan;
mod state;
mod value_iteration;
mod whittle;

use thiserror::Error;

pub use clustering::{
    fit_cluster_model, pool_cluster_params, ClusterConfig, ClusterMember, ClusterModel, GroupingConfig,
};
pub use kmeans::{kmeans, squared_distance, KMeans, MAX_ITERATIONS as KMEANS_MAX_ITERATIONS};
pub use mdp::{estimate_params, MdpParams};
pub use plan::{discounted_return, overlap_metric, plan_top_k, rank_entries, PlanEntry, PlanResult, WhittleTable};
pub use state::{
    build_tuples, monthly_actions, monthly_states, window_state, Action, BehaviorState, StateConfig, TransitionCounts,
    TransitionTuple,
};
pub use value_iteration::{bellman_q, policy_evaluation, value_iteration, SubsidizedQ};
pub use whittle::{
    indexability_violations, intervention_advantage, subsidy_bracket, whittle_index, IndexabilityWarning,
    WhittleConfig, WhittleIndex,
};

#[derive(Debug, Error)]
pub enum RmabError {
    #[error("no observations for state {} under action {} and no smoothing", state.as_str(), action.as_str())]
    UndefinedRow { state: BehaviorState, action: Action },
    #[error("discount {0} outside [0, 1)")]
    InvalidDiscount(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cannot form {k} clusters from {points} points")]
    InvalidClusterCount { k: usize, points: usize },
    #[error("{0}")]
    EmptyInput(&'static str),
}
