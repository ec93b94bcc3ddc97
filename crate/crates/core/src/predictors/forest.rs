use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Prediction;
use super::tree::{train_tree, DecisionTree, MaxFeatures, TreeConfig};
use super::PredictError;
use crate::calllog::SequenceFeatures;
use crate::seed::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: 30, min_samples_split: 2, max_features: MaxFeatures::Sqrt, seed: 0 }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), PredictError> {
        if self.n_trees == 0 {
            return Err(PredictError::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(PredictError::InvalidConfig("max_depth must be at least 1".into()));
        }
        Ok(())
    }

    fn tree(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            max_features: self.max_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Mean of the per-tree leaf frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, features: &SequenceFeatures) -> Prediction {
        Prediction::from_probability(self.predict_proba(&forest_features(features)))
    }
}

/// Flat input vector: static encoding, scalar call features, then the call rows.
pub fn forest_features(features: &SequenceFeatures) -> Vec<f64> {
    let mut v = features.flat_static();
    v.extend(features.dynamic.iter().flatten());
    v
}

/// Bagged trees. Tree `i` draws its bootstrap and split features from the
/// stream `tree/i` of `config.seed`, so the result does not depend on scheduling.
pub fn train_forest(x: &[Vec<f64>], y: &[bool], config: &ForestConfig) -> Result<RandomForest, PredictError> {
    config.validate()?;
    if x.is_empty() {
        return Err(PredictError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(PredictError::LengthMismatch { predictions: x.len(), labels: y.len() });
    }
    let seeds = SeedTree::new(config.seed);
    let tree_config = config.tree();
    let n = x.len();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.indexed("tree", i as u64).rng("bootstrap");
            let samples: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            train_tree(x, y, &samples, &tree_config, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RandomForest { config: *config, trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::seed::Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 0;
            let c = if pos { 2.0 } else { -2.0 };
            x.push(vec![c + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), c + rng.random_range(-1.0..1.0)]);
            y.push(pos);
        }
        (x, y)
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = blobs(500, 1);
        let cfg = ForestConfig { n_trees: 25, seed: 4, ..ForestConfig::default() };
        let f = train_forest(&x, &y, &cfg).unwrap();
        let correct = x.iter().zip(&y).filter(|(xi, &yi)| (f.predict_proba(xi) >= 0.5) == yi).count();
        assert!(correct as f64 / 500.0 >= 0.99);
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = blobs(120, 2);
        let cfg = ForestConfig { n_trees: 10, seed: 9, ..ForestConfig::default() };
        assert_eq!(train_forest(&x, &y, &cfg).unwrap(), train_forest(&x, &y, &cfg).unwrap());
        let other = ForestConfig { seed: 10, ..cfg };
        assert_ne!(train_forest(&x, &y, &cfg).unwrap(), train_forest(&x, &y, &other).unwrap());
    }

    #[test]
    fn probability_is_tree_mean() {
        let (x, y) = blobs(80, 3);
        let cfg = ForestConfig { n_trees: 7, max_depth: 2, seed: 1, ..ForestConfig::default() };
        let mut f = train_forest(&x, &y, &cfg).unwrap();
        let probe = [0.1, 0.0, -0.2];
        let p = f.predict_proba(&probe);
        assert!((0.0..=1.0).contains(&p));
        let mean = f.trees.iter().map(|t| t.predict_proba(&probe)).sum::<f64>() / 7.0;
        assert!((p - mean).abs() < 1e-15);
        f.trees.pop();
        assert!((f.predict_proba(&probe) - p).abs() <= 1.0 / 7.0 + 1e-12);
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(matches!(train_forest(&[], &[], &ForestConfig::default()), Err(PredictError::EmptyData)));
        let bad = ForestConfig { n_trees: 0, ..ForestConfig::default() };
        assert!(train_forest(&[vec![0.0]], &[true], &bad).is_err());
    }
}
