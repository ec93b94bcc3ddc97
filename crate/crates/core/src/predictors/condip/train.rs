use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{weighted_bce, CondipBatch, CondipNetwork, Mode};
use crate::calllog::{SequenceFeatures, Task};
use crate::predictors::PredictError;
use crate::seed::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// `(negative, positive)` loss weights.
    pub class_weights: (f64, f64),
    pub seed: u64,
    /// Stop after this many epochs without a better validation loss.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.05,
            class_weights: (1.0, 1.75),
            seed: 0,
            early_stop_patience: Some(10),
        }
    }
}

impl TrainConfig {
    /// Unweighted loss for the short-term task, `(1, 1.75)` for the long-term task.
    pub fn for_task(task: Task) -> Self {
        let class_weights = match task {
            Task::ShortTerm => (1.0, 1.0),
            Task::LongTerm => (1.0, 1.75),
        };
        Self { class_weights, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        let (w0, w1) = self.class_weights;
        if !(w0 > 0.0 && w1 > 0.0 && w0.is_finite() && w1.is_finite()) {
            return Err(PredictError::InvalidConfig(format!("class_weights ({w0}, {w1}) must be positive")));
        }
        if self.batch_size < 2 {
            return Err(PredictError::InvalidConfig("batch_size must be at least 2".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(PredictError::InvalidConfig(format!(
                "learning_rate {} must be non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub features: &'a [SequenceFeatures],
    pub labels: &'a [bool],
}

impl<'a> TrainData<'a> {
    pub fn new(features: &'a [SequenceFeatures], labels: &'a [bool]) -> Result<Self, PredictError> {
        if features.len() != labels.len() {
            return Err(PredictError::LengthMismatch { predictions: features.len(), labels: labels.len() });
        }
        Ok(Self { features, labels })
    }

    fn batch(&self) -> Result<CondipBatch, PredictError> {
        let refs: Vec<&SequenceFeatures> = self.features.iter().collect();
        CondipBatch::from_features(&refs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Validation loss per epoch, in inference mode.
    pub validation_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

/// Mini-batch gradient descent with a seeded shuffle per epoch. Batches of a
/// single example are skipped since batch norm is undefined on them. With a
/// validation set, the parameters of the epoch with the lowest validation loss
/// are returned.
pub fn condip_train(
    mut net: CondipNetwork,
    train: TrainData<'_>,
    validation: Option<TrainData<'_>>,
    config: &TrainConfig,
) -> Result<(CondipNetwork, TrainReport), PredictError> {
    config.validate()?;
    if train.features.is_empty() {
        return Err(PredictError::EmptyData);
    }
    let all = train.batch()?;
    let valid = match validation {
        Some(v) if !v.features.is_empty() => Some((v.batch()?, v.labels)),
        _ => None,
    };
    let seeds = SeedTree::new(config.seed);
    let mut report = TrainReport { train_loss: Vec::new(), validation_loss: Vec::new(), best_epoch: 0 };
    let mut best: Option<(f64, CondipNetwork)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..all.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut seeds.indexed("epoch", epoch as u64).rng("shuffle"));
        let (mut total, mut seen) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch = all.select(chunk);
            let labels: Vec<bool> = chunk.iter().map(|&i| train.labels[i]).collect();
            let cache = net.forward(&batch, Mode::Train);
            let grads = net.backward(&cache, &labels, config.class_weights);
            if !grads.loss.is_finite() {
                return Err(PredictError::Divergence { epoch, loss: grads.loss });
            }
            net.params.sgd_step(&grads.params, config.learning_rate);
            if net.params.tensors().iter().any(|(_, t)| t.iter().any(|v| !v.is_finite())) {
                return Err(PredictError::Divergence { epoch, loss: f64::INFINITY });
            }
            net.update_running_stats(&cache);
            total += grads.loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let epoch_loss = if seen > 0 { total / seen as f64 } else { f64::NAN };
        report.train_loss.push(epoch_loss);

        let Some((vbatch, vlabels)) = &valid else {
            report.best_epoch = epoch;
            continue;
        };
        let vloss = weighted_bce(&net.forward(vbatch, Mode::Infer).logits, vlabels, config.class_weights);
        if !vloss.is_finite() {
            return Err(PredictError::Divergence { epoch, loss: vloss });
        }
        report.validation_loss.push(vloss);
        if best.as_ref().is_none_or(|(b, _)| vloss < *b) {
            best = Some((vloss, net.clone()));
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if config.early_stop_patience.is_some_and(|p| since_best >= p) {
                log::info!("early stop after epoch {epoch}; best epoch {}", report.best_epoch);
                break;
            }
        }
    }
    Ok((best.map(|(_, n)| n).unwrap_or(net), report))
}
