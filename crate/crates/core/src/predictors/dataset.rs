use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::calllog::{BeneficiaryId, EngagementLabel, SequenceFeatures, Task};
use crate::seed::SeedTree;

/// Model output for one example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Score for the positive (high risk / LLTE) class.
    pub probability: f64,
    /// Hard decision for the positive class.
    pub positive: bool,
}

impl Prediction {
    /// Positive iff `probability >= 0.5`.
    pub fn from_probability(probability: f64) -> Self {
        Self { probability, positive: probability >= 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub beneficiary_id: BeneficiaryId,
    /// Start of the feature window.
    pub anchor: NaiveDate,
    pub features: SequenceFeatures,
    pub label: EngagementLabel,
}

/// Labelled examples for one task, as written by `featurize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub task: Task,
    pub examples: Vec<LabeledExample>,
}

impl FeatureDataset {
    pub fn labels(&self) -> Vec<bool> {
        self.examples.iter().map(|e| e.label.is_positive()).collect()
    }

    pub fn features(&self) -> Vec<&SequenceFeatures> {
        self.examples.iter().map(|e| &e.features).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureDataset {
        FeatureDataset { task: self.task, examples: indices.iter().map(|&i| self.examples[i].clone()).collect() }
    }

    /// Seeded split into `(train, test)` with `round(n · test_fraction)` test examples.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (FeatureDataset, FeatureDataset) {
        let (train, test) = train_test_split(self.examples.len(), test_fraction, seed);
        (self.subset(&train), self.subset(&test))
    }
}

/// Shuffled index split; both halves are returned in ascending order.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut SeedTree::new(seed).rng("split"));
    let n_test = ((n as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_partition() {
        let (train, test) = train_test_split(101, 0.2, 9);
        assert_eq!(test.len(), 20);
        let mut all = [train.clone(), test.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_eq!(train_test_split(101, 0.2, 9), (train, test));
    }
}
