//! Binary CART classifier with Gini splits.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PredictError;

/// Number of features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().round() as usize,
            MaxFeatures::Count(c) => c,
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: 30, min_samples_split: 2, max_features: MaxFeatures::All }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `counts = [negatives, positives]` of the training samples reaching the leaf.
    Leaf { counts: [u32; 2] },
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    fn leaf_for(&self, x: &[f64]) -> [u32; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return *counts,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Positive-class frequency in the leaf reached by `x`.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let [neg, pos] = self.leaf_for(x);
        f64::from(pos) / f64::from(neg + pos)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(counts: [u32; 2]) -> f64 {
    let n = f64::from(counts[0] + counts[1]);
    if n == 0.0 {
        return 0.0;
    }
    let p = f64::from(counts[1]) / n;
    2.0 * p * (1.0 - p)
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    config: TreeConfig,
    n_features: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn counts(&self, samples: &[usize]) -> [u32; 2] {
        let pos = samples.iter().filter(|&&i| self.y[i]).count() as u32;
        [samples.len() as u32 - pos, pos]
    }

    fn best_split(&mut self, samples: &mut [usize], total: [u32; 2]) -> Option<BestSplit> {
        let wanted = self.config.max_features.resolve(self.n_features);
        let mut features: Vec<usize> = (0..self.n_features).collect();
        features.shuffle(self.rng);
        let n = samples.len() as f64;
        let mut best: Option<BestSplit> = None;
        let mut informative = 0;
        for f in features {
            if informative >= wanted {
                break;
            }
            samples.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let first = self.x[samples[0]][f];
            let last = self.x[samples[samples.len() - 1]][f];
            if first == last {
                continue;
            }
            informative += 1;
            let mut left = [0u32; 2];
            for k in 0..samples.len() - 1 {
                left[usize::from(self.y[samples[k]])] += 1;
                let (v, next) = (self.x[samples[k]][f], self.x[samples[k + 1]][f]);
                if v == next {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let nl = f64::from(left[0] + left[1]);
                let impurity = (nl * gini(left) + (n - nl) * gini(right)) / n;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit { feature: f, threshold, impurity });
                }
            }
        }
        best
    }

    fn build(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(samples);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        if counts[0] == 0
            || counts[1] == 0
            || depth >= self.config.max_depth
            || samples.len() < self.config.min_samples_split.max(2)
        {
            return id;
        }
        let Some(split) = self.best_split(samples, counts) else {
            return id;
        };
        let f = split.feature;
        samples.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
        let cut = samples.partition_point(|&i| self.x[i][f] <= split.threshold);
        let (left_samples, right_samples) = samples.split_at_mut(cut);
        let left = self.build(left_samples, depth + 1);
        let right = self.build(right_samples, depth + 1);
        self.nodes[id] = Node::Split { feature: f, threshold: split.threshold, left, right };
        id
    }
}

/// Grows a tree on `samples` (indices into `x`/`y`, repeats allowed).
pub fn train_tree<R: Rng>(
    x: &[Vec<f64>],
    y: &[bool],
    samples: &[usize],
    config: &TreeConfig,
    rng: &mut R,
) -> Result<DecisionTree, PredictError> {
    if samples.is_empty() || x.is_empty() {
        return Err(PredictError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(PredictError::LengthMismatch { predictions: x.len(), labels: y.len() });
    }
    if config.max_depth == 0 {
        return Err(PredictError::InvalidConfig("max_depth must be at least 1".into()));
    }
    let n_features = x[0].len();
    if x.iter().any(|row| row.len() != n_features) {
        return Err(PredictError::InvalidConfig("feature rows have different lengths".into()));
    }
    let mut builder = Builder { x, y, config: *config, n_features, rng, nodes: Vec::new() };
    let mut samples = samples.to_vec();
    builder.build(&mut samples, 0);
    Ok(DecisionTree { nodes: builder.nodes })
}
