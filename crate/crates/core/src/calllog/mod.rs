//! Call-log ingestion: deduplication, call classification, engagement ratios,
//! model features, and task labels.

mod features;
mod history;
pub mod io;
mod profile;
mod record;

use thiserror::Error;

pub use features::{
    build_sequence, features_for_window, long_term_features, make_long_term_example, make_short_term_example,
    sample_anchor, valid_anchors, CallRow, CallSequence, EngagementLabel, LongTermConfig, SequenceFeatures,
    ShortTermConfig, Task, CALL_CHANNELS, T_MAX,
};
pub use history::{e2c_ratio, extract_scalar_features, CallHistory, DateWindow, EventCounts, ScalarFeatureConfig};
pub use io::{InterventionKind, InterventionRecord};
pub use profile::{
    BeneficiaryProfile, Language, PhoneOwner, AGE_RANGE, CALL_SLOTS, EDUCATION_LEVELS, GESTATION_RANGE, INCOME_GROUPS,
    STATIC_DIM,
};
pub use record::{
    classify_call, classify_call_with, dedup_attempts, BeneficiaryId, CallEvent, CallRecord, EventKind,
    ENGAGEMENT_SECONDS,
};

/// Why a beneficiary was left out of a labelled dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum ExclusionReason {
    InvalidProfile(String),
    ShortHistory { days: i64 },
    TooFewConnections { connections: u32 },
}

#[derive(Debug, Error)]
pub enum CallLogError {
    #[error("beneficiary {beneficiary_id}, group {attempt_group}: negative duration {duration}")]
    NegativeDuration { beneficiary_id: BeneficiaryId, attempt_group: String, duration: f64 },
    #[error("beneficiary {beneficiary_id}: no connections between {} and {}", window.start, window.end)]
    NoConnections { beneficiary_id: BeneficiaryId, window: DateWindow },
    #[error("beneficiary {beneficiary_id}: {span_days}-day history too short for a sample")]
    SampleUnavailable { beneficiary_id: BeneficiaryId, span_days: i64 },
    #[error("beneficiary {beneficiary_id} excluded: {reason:?}")]
    Excluded { beneficiary_id: BeneficiaryId, reason: ExclusionReason },
    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: u64, message: String },
    #[error("{source_name}: {message}")]
    Csv { source_name: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
