//! `train` and `predict`.

use std::collections::BTreeMap;
use std::path::Path;

use engage_core::calllog::{
    features_for_window, long_term_features, BeneficiaryId, CallHistory, EngagementLabel, ScalarFeatureConfig,
    SequenceFeatures, Task,
};
use engage_core::predictors::condip::{condip_train, CondipNetwork, TrainData, TrainReport};
use engage_core::predictors::{
    evaluate, forest_features, train_forest, train_test_split, write_roc_csv, FeatureDataset, ForestConfig, ModelFile,
    Prediction, RulePredictor, TrainedModel,
};
use engage_core::SeedTree;
use serde::Serialize;

use crate::config::{ModelKind, RunConfig};
use crate::data::{Dataset, FEATURES};
use crate::error::{CliError, Result};
use crate::output::{read_json, OutDir, Provenance};

pub const MODEL: &str = "model.json";

#[derive(Serialize)]
struct TrainSummary<'a> {
    model: ModelKind,
    task: Task,
    n_train: usize,
    n_test: usize,
    /// "test", or "train" when no examples were held out.
    evaluated_on: &'static str,
    report: &'a engage_core::predictors::MetricReport,
    training: Option<TrainReport>,
}

fn pick<T: Clone>(items: &[T], indices: &[usize]) -> Vec<T> {
    indices.iter().map(|&i| items[i].clone()).collect()
}

/// Fits the configured model on a seeded split and reports held-out metrics.
pub fn train(config: &RunConfig, features: Option<&Path>, out: &OutDir) -> Result<()> {
    let provenance = Provenance::new("train", config);
    let default_path = out.path(FEATURES);
    let path = features.unwrap_or(&default_path);
    let dataset: FeatureDataset = read_json(path, "dataset")?;
    if dataset.examples.is_empty() {
        return Err(CliError::Data(format!("{}: no examples", path.display())));
    }
    let task = dataset.task;
    let section = &config.train;
    let seeds = SeedTree::new(config.seed).child("train");
    let all_features: Vec<SequenceFeatures> = dataset.examples.iter().map(|e| e.features.clone()).collect();
    let labels = dataset.labels();
    let (train_idx, test_idx) = train_test_split(dataset.examples.len(), section.test_fraction, seeds.seed("split"));
    let (train_x, train_y) = (pick(&all_features, &train_idx), pick(&labels, &train_idx));

    let mut training = None;
    let model = match section.model {
        ModelKind::Rule => TrainedModel::Rule(RulePredictor::new(section.rule)?),
        ModelKind::Forest => {
            let x: Vec<Vec<f64>> = train_x.iter().map(forest_features).collect();
            let cfg = ForestConfig { seed: seeds.seed("forest"), ..section.forest };
            TrainedModel::Forest(train_forest(&x, &train_y, &cfg)?)
        }
        ModelKind::Condip => {
            let (fit, valid) = train_test_split(train_x.len(), section.validation_fraction, seeds.seed("validation"));
            let (fit_x, fit_y) = (pick(&train_x, &fit), pick(&train_y, &fit));
            let (val_x, val_y) = (pick(&train_x, &valid), pick(&train_y, &valid));
            let net = CondipNetwork::new(section.condip.arch.clone(), seeds.seed("init"))?;
            let cfg = section.condip.train_config(task, seeds.seed("condip"));
            let validation = if val_x.is_empty() { None } else { Some(TrainData::new(&val_x, &val_y)?) };
            let (net, report) = condip_train(net, TrainData::new(&fit_x, &fit_y)?, validation, &cfg)?;
            training = Some(report);
            TrainedModel::Condip(net)
        }
    };

    let (eval_x, eval_y, evaluated_on) = if test_idx.is_empty() {
        (train_x, train_y, "train")
    } else {
        (pick(&all_features, &test_idx), pick(&labels, &test_idx), "test")
    };
    let predictions = model.predict(&eval_x)?;
    let report = evaluate(&predictions, &eval_y)?;

    let file = ModelFile::new(task, config.seed, serde_json::to_value(&provenance)?, model);
    file.save(&out.path(MODEL))?;
    let summary = TrainSummary {
        model: section.model,
        task,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        evaluated_on,
        report: &report,
        training,
    };
    out.write_json("metrics.json", &provenance, "metrics", &summary)?;
    let roc = out.path("roc.csv");
    write_roc_csv(out.writer("roc.csv")?, &report.roc_points, &provenance.comments()).map_err(CliError::io(&roc))?;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "{} on {} {evaluated_on} examples: accuracy {:.4} precision {} recall {} f1 {} auc {}",
        file.model.kind(),
        report.n,
        report.accuracy,
        show(report.precision),
        show(report.recall),
        show(report.f1),
        show(report.auc),
    );
    Ok(())
}

/// Features a model of `task` scores for one beneficiary: the first month for
/// the long-term task, the latest feature window for the short-term task.
pub fn features_for(
    config: &RunConfig,
    task: Task,
    history: &CallHistory,
    profile: &engage_core::calllog::BeneficiaryProfile,
) -> SequenceFeatures {
    match task {
        Task::LongTerm => long_term_features(history, profile, &config.features.long_term),
        Task::ShortTerm => {
            let st = &config.features.short_term;
            let scalar = ScalarFeatureConfig { window_days: st.feature_days, missing_gap: st.missing_gap };
            features_for_window(history, profile, history.span().end, st.feature_days, &scalar)
        }
    }
}

/// Predictions for every profile in the dataset, in input order.
pub fn predict_dataset(
    config: &RunConfig,
    model: &ModelFile,
    data: &Dataset,
    histories: &BTreeMap<BeneficiaryId, CallHistory>,
) -> Result<Vec<Prediction>> {
    let features: Vec<SequenceFeatures> =
        data.profiles.iter().map(|p| features_for(config, model.task, &histories[&p.beneficiary_id], p)).collect();
    Ok(model.model.predict(&features)?)
}

pub fn label_name(label: EngagementLabel) -> &'static str {
    match label {
        EngagementLabel::ShortTermHighRisk => "high-risk",
        EngagementLabel::ShortTermLowRisk => "low-risk",
        EngagementLabel::Llte => "llte",
        EngagementLabel::Hlte => "hlte",
    }
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    if !path.exists() {
        return Err(CliError::Data(format!("missing model file: {}", path.display())));
    }
    ModelFile::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn predict(config: &RunConfig, model_path: &Path, input: &Path, out: &OutDir) -> Result<()> {
    let provenance = Provenance::new("predict", config);
    let model = load_model(model_path)?;
    let data = Dataset::load(input)?;
    let histories = data.histories(config)?;
    let predictions = predict_dataset(config, &model, &data, &histories)?;
    let rows = data.profiles.iter().zip(&predictions).map(|(p, pred)| {
        [
            p.beneficiary_id.to_string(),
            pred.probability.to_string(),
            u8::from(pred.positive).to_string(),
            label_name(EngagementLabel::at_risk(model.task, pred.positive)).to_string(),
        ]
    });
    out.write_csv("predictions.csv", &provenance, &["beneficiary_id", "probability", "positive", "label"], rows)?;
    let positives = predictions.iter().filter(|p| p.positive).count();
    println!("{} predictions, {positives} positive", predictions.len());
    Ok(())
}
