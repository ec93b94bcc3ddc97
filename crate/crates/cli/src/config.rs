//! Run configuration: one JSON or TOML file, every field optional.

use std::path::Path;

use chrono::NaiveDate;
use clap::ValueEnum;
use engage_core::calllog::{LongTermConfig, ShortTermConfig, Task, ENGAGEMENT_SECONDS};
use engage_core::predictors::condip::{CondipArch, TrainConfig};
use engage_core::predictors::{ForestConfig, RulePredictorConfig};
use engage_core::rmab::{ClusterConfig, WhittleConfig};
use engage_core::sim::scenarios::Scenario;
use engage_core::sim::SimError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rule,
    Forest,
    Condip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Connections longer than this many seconds are engagements.
    pub engagement_seconds: f64,
    /// Histories extend at least to this date.
    pub observed_until: Option<NaiveDate>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { engagement_seconds: ENGAGEMENT_SECONDS, observed_until: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Chance that a beneficiary receives a call intervention in a given month.
    pub call_prob: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { call_prob: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub task: Task,
    pub long_term: LongTermConfig,
    pub short_term: ShortTermConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { task: Task::LongTerm, long_term: LongTermConfig::default(), short_term: ShortTermConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondipConfig {
    pub arch: CondipArch,
    /// Loss weights default to the task's weights when absent.
    pub class_weights: Option<(f64, f64)>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stop_patience: Option<usize>,
}

impl Default for CondipConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            arch: CondipArch::default(),
            class_weights: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            early_stop_patience: t.early_stop_patience,
        }
    }
}

impl CondipConfig {
    pub fn train_config(&self, task: Task, seed: u64) -> TrainConfig {
        let base = TrainConfig::for_task(task);
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            class_weights: self.class_weights.unwrap_or(base.class_weights),
            seed,
            early_stop_patience: self.early_stop_patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub model: ModelKind,
    pub test_fraction: f64,
    /// Share of the training split held out for early stopping (CoNDiP only).
    pub validation_fraction: f64,
    pub rule: RulePredictorConfig,
    pub forest: ForestConfig,
    pub condip: CondipConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            model: ModelKind::Rule,
            test_fraction: 0.2,
            validation_fraction: 0.1,
            rule: RulePredictorConfig::default(),
            forest: ForestConfig::default(),
            condip: CondipConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub k: usize,
    /// Pool filter: at least `min_early_engagements` engagements in the first `early_days`.
    pub early_days: u32,
    pub min_early_engagements: u32,
    /// Planning date; defaults to the day after the last logged call.
    pub as_of: Option<NaiveDate>,
    /// Re-rank the pool every this many days after `as_of`, up to the day
    /// after the last logged call. Unset plans once.
    pub replan_interval_days: Option<u32>,
    pub cluster: ClusterConfig,
    pub whittle: WhittleConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            k: 100,
            early_days: 60,
            min_early_engagements: 2,
            as_of: None,
            replan_interval_days: None,
            cluster: ClusterConfig::default(),
            whittle: WhittleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub scenario: Scenario,
    pub generate: GenerateConfig,
    pub data: DataConfig,
    pub features: FeatureConfig,
    pub train: TrainSection,
    pub plan: PlanConfig,
}

fn parse_error(path: &Path, message: impl ToString) -> CliError {
    CliError::config(&path.display().to_string(), message.to_string())
}

impl RunConfig {
    /// Reads a `.toml` file as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let value: serde_json::Value = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| parse_error(path, e))?
        } else {
            serde_json::from_str(&text).map_err(|e| parse_error(path, e))?
        };
        serde_path_to_error::deserialize(value).map_err(|e| {
            let field = e.path().to_string();
            CliError::Config { field, message: e.into_inner().to_string() }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let within = |section: &'static str| {
            move |e: SimError| match e {
                SimError::InvalidSpec { field, message } => {
                    let field = field.strip_prefix(&format!("{section}.")).unwrap_or(&field).to_string();
                    CliError::Config { field: format!("scenario.{section}.{field}"), message }
                }
                other => other.into(),
            }
        };
        self.scenario.cohort.validate().map_err(within("cohort"))?;
        self.scenario.program.validate().map_err(within("program"))?;
        self.scenario.evaluation.validate().map_err(within("evaluation"))?;
        if !(0.0..=1.0).contains(&self.generate.call_prob) {
            return Err(CliError::config("generate.call_prob", "must lie in [0, 1]"));
        }
        if !(self.data.engagement_seconds >= 0.0) {
            return Err(CliError::config("data.engagement_seconds", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.train.test_fraction) {
            return Err(CliError::config("train.test_fraction", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.train.validation_fraction) {
            return Err(CliError::config("train.validation_fraction", "must lie in [0, 1)"));
        }
        if self.plan.k == 0 {
            return Err(CliError::config("plan.k", "must be positive"));
        }
        if self.plan.replan_interval_days == Some(0) {
            return Err(CliError::config("plan.replan_interval_days", "must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
