//! Drop-off prediction and intervention planning for voice-call health
//! programs.
//!
//! - [`calllog`]: call-log ingestion, engagement ratios, features, labels.
//! - [`predictors`]: rule baseline, random forest, and the convolutional
//!   disengagement predictor, plus evaluation metrics.
//! - [`rmab`]: two-state intervention MDPs, Whittle indices, and top-k planning.
//! - [`sim`]: synthetic cohorts, intervention studies, and policy evaluation.

// `!(x >= 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calllog;
pub mod predictors;
pub mod rmab;
pub mod seed;
pub mod sim;

pub use calllog::{BeneficiaryId, CallHistory, EngagementLabel, SequenceFeatures, Task};

pub use rmab::{Action, BehaviorState, MdpParams};
pub use seed::SeedTree;
