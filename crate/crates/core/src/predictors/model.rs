//! Versioned JSON container for trained predictors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::condip::CondipNetwork;
use super::dataset::Prediction;
use super::forest::RandomForest;
use super::rule::RulePredictor;
use super::PredictError;
use crate::calllog::{SequenceFeatures, Task};

pub const MODEL_FORMAT: &str = "engage-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "weights", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum TrainedModel {
    Rule(RulePredictor),
    Forest(RandomForest),
    Condip(CondipNetwork),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Rule(_) => "rule",
            TrainedModel::Forest(_) => "forest",
            TrainedModel::Condip(_) => "condip",
        }
    }

    pub fn predict(&self, features: &[SequenceFeatures]) -> Result<Vec<Prediction>, PredictError> {
        match self {
            TrainedModel::Rule(r) => Ok(features.iter().map(|f| r.predict(f)).collect()),
            TrainedModel::Forest(f) => Ok(features.iter().map(|x| f.predict(x)).collect()),
            TrainedModel::Condip(n) => n.predict(features),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub seed: u64,
    /// Configuration the model was trained with, echoed verbatim.
    pub config: serde_json::Value,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(task: Task, seed: u64, config: serde_json::Value, model: TrainedModel) -> Self {
        Self { format: MODEL_FORMAT.into(), version: MODEL_VERSION, task, seed, config, model }
    }

    pub fn to_json(&self) -> Result<String, PredictError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PredictError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(PredictError::Format(format!("unknown format {:?}", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(PredictError::Format(format!("unsupported version {}", file.version)));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictError> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &Path) -> Result<Self, PredictError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
