use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::dataset::Prediction;
use super::PredictError;
use crate::calllog::{CallHistory, DateWindow, EngagementLabel, SequenceFeatures, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RulePredictorConfig {
    pub e2c_threshold: f64,
    pub window_days: u32,
}

impl Default for RulePredictorConfig {
    fn default() -> Self {
        Self { e2c_threshold: 0.5, window_days: 28 }
    }
}

impl RulePredictorConfig {
    pub fn validate(&self) -> Result<(), PredictError> {
        if !(self.e2c_threshold > 0.0 && self.e2c_threshold < 1.0) {
            return Err(PredictError::InvalidConfig(format!(
                "e2c_threshold {} must lie in (0, 1)",
                self.e2c_threshold
            )));
        }
        Ok(())
    }
}

/// At risk iff the E2C ratio over the `window_days` before `as_of` is below
/// the threshold. A window without connections counts as at risk.
pub fn rule_predict(
    history: &CallHistory,
    as_of: NaiveDate,
    config: &RulePredictorConfig,
    task: Task,
) -> EngagementLabel {
    let window = DateWindow::ending(as_of, u64::from(config.window_days));
    let at_risk = match history.counts(window).e2c() {
        Some(ratio) => ratio < config.e2c_threshold,
        None => true,
    };
    EngagementLabel::at_risk(task, at_risk)
}

/// The same rule applied to extracted features (the connection and
/// engagement counts of the feature window).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RulePredictor {
    pub config: RulePredictorConfig,
}

impl RulePredictor {
    pub fn new(config: RulePredictorConfig) -> Result<Self, PredictError> {
        config.validate()?;
        Ok(Self { config })
    }

    /// Score is `1 − E2C` (1 without connections), so ranking agrees with the rule.
    pub fn predict(&self, features: &SequenceFeatures) -> Prediction {
        let connections = features.connections();
        if connections <= 0.0 {
            return Prediction { probability: 1.0, positive: true };
        }
        let ratio = features.engagements() / connections;
        Prediction { probability: 1.0 - ratio, positive: ratio < self.config.e2c_threshold }
    }
}
