//! Synthetic cohorts, the program simulator, intervention studies, and
//! planning-policy evaluation.

mod cohort;
mod policy;
mod program;
mod psqis;
pub mod scenarios;

use thiserror::Error;

use crate::calllog::CallLogError;
use crate::rmab::RmabError;

pub use cohort::{beneficiary_id, generate_cohort, AgeBand, Archetype, Cohort, CohortSpec, Demographics, GroundTruth};
pub use policy::{evaluate_policies, Policy, PolicyEvalConfig, PolicyReport, PolicyRun};
pub use program::{
    simulate_beneficiaries, simulate_program, BeneficiaryTrace, InterventionPolicy, NoInterventions, Planned,
    ProgramConfig, SimOutcome,
};
pub use psqis::{assign_arms, high_engagement, run_psqis, window_counts, Arm, ArmResult, PsqisConfig, PsqisResult};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid {field}: {message}")]
    InvalidSpec { field: String, message: String },
    #[error("{assigned} arm assignments for {beneficiaries} beneficiaries")]
    Unassigned { assigned: usize, beneficiaries: usize },
    #[error("budget k = {k} exceeds the {available} beneficiaries available")]
    BudgetTooLarge { k: usize, available: usize },
    #[error(transparent)]
    Rmab(#[from] RmabError),
    #[error(transparent)]
    CallLog(#[from] CallLogError),
}

impl SimError {
    pub(crate) fn spec(field: &str, message: impl Into<String>) -> Self {
        SimError::InvalidSpec { field: field.to_string(), message: message.into() }
    }
}
