//! Drop-off predictors: the E2C rule baseline, a random forest, and the
//! convolutional disengagement predictor (CoNDiP), with evaluation metrics.

pub mod condip;
mod dataset;
mod forest;
mod metrics;
mod model;
mod rule;
mod tree;

use thiserror::Error;

pub use dataset::{train_test_split, FeatureDataset, LabeledExample, Prediction};
pub use forest::{forest_features, train_forest, ForestConfig, RandomForest};
pub use metrics::{auc, evaluate, roc_curve, write_roc_csv, ConfusionMatrix, MetricReport, RocPoint};
pub use model::{ModelFile, TrainedModel, MODEL_FORMAT, MODEL_VERSION};
pub use rule::{rule_predict, RulePredictor, RulePredictorConfig};
pub use tree::{train_tree, DecisionTree, MaxFeatures, Node, TreeConfig};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no training data")]
    EmptyData,
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
