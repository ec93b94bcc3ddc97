//! Demographic grouping, k-means over group parameter estimates, and pooled
//! per-cluster MDPs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, squared_distance};
use super::mdp::{estimate_params, MdpParams};
use super::state::{StateConfig, TransitionCounts};
use super::RmabError;
use crate::calllog::{BeneficiaryId, BeneficiaryProfile};

/// Which profile fields form the grouping key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupingConfig {
    pub education_level: bool,
    pub income_group: bool,
    pub phone_owner: bool,
    /// Width of age buckets in years; `None` leaves age out of the key.
    pub age_bucket_years: Option<u32>,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self { education_level: true, income_group: true, phone_owner: true, age_bucket_years: Some(10) }
    }
}

impl GroupingConfig {
    pub fn key(&self, profile: &BeneficiaryProfile) -> String {
        let mut parts = Vec::new();
        if self.education_level {
            parts.push(format!("edu={}", profile.education_level));
        }
        if self.income_group {
            parts.push(format!("inc={}", profile.income_group));
        }
        if self.phone_owner {
            parts.push(format!("phone={}", profile.phone_owner));
        }
        if let Some(width) = self.age_bucket_years.filter(|w| *w > 0) {
            let lo = profile.age / width * width;
            parts.push(format!("age={}-{}", lo, lo + width - 1));
        }
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join("|")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub n_clusters: usize,
    pub smoothing: f64,
    pub discount: f64,
    pub seed: u64,
    pub grouping: GroupingConfig,
    pub states: StateConfig,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            n_clusters: 20,
            smoothing: 1.0,
            discount: 0.95,
            seed: 0,
            grouping: GroupingConfig::default(),
            states: StateConfig::default(),
        }
    }
}

/// Transition counts of one beneficiary together with its grouping key.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMember {
    pub beneficiary_id: BeneficiaryId,
    pub group: String,
    pub counts: TransitionCounts,
}

/// Fitted grouping → cluster map with pooled parameters per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub config: ClusterConfig,
    pub group_clusters: BTreeMap<String, usize>,
    pub centroids: Vec<[f64; 4]>,
    pub params: Vec<MdpParams>,
    pub cluster_sizes: Vec<usize>,
    /// Cluster used for groups never seen during fitting.
    pub fallback_cluster: usize,
}

impl ClusterModel {
    pub fn cluster_of(&self, group: &str) -> usize {
        self.group_clusters.get(group).copied().unwrap_or(self.fallback_cluster)
    }

    pub fn cluster_of_profile(&self, profile: &BeneficiaryProfile) -> usize {
        self.cluster_of(&self.config.grouping.key(profile))
    }
}

/// Sums member counts per cluster and estimates one MDP per cluster.
pub fn pool_cluster_params(
    assignment: &[usize],
    counts: &[TransitionCounts],
    n_clusters: usize,
    smoothing: f64,
    discount: f64,
) -> Result<Vec<MdpParams>, RmabError> {
    let mut pooled = vec![TransitionCounts::default(); n_clusters];
    for (&cluster, c) in assignment.iter().zip(counts) {
        pooled.get_mut(cluster).ok_or(RmabError::InvalidClusterCount { k: cluster + 1, points: n_clusters })?.merge(c);
    }
    pooled.iter().map(|c| estimate_params(c, smoothing, discount)).collect()
}

pub fn fit_cluster_model(members: &[ClusterMember], config: &ClusterConfig) -> Result<ClusterModel, RmabError> {
    if members.is_empty() {
        return Err(RmabError::EmptyInput("no beneficiaries to cluster"));
    }
    let mut groups: BTreeMap<&str, TransitionCounts> = BTreeMap::new();
    for m in members {
        groups.entry(m.group.as_str()).or_default().merge(&m.counts);
    }
    let names: Vec<&str> = groups.keys().copied().collect();
    let vectors = groups
        .values()
        .map(|c| estimate_params(c, config.smoothing, config.discount).map(|p| p.vector()))
        .collect::<Result<Vec<_>, _>>()?;
    let k = config.n_clusters.clamp(1, vectors.len());
    let km = kmeans(&vectors, k, config.seed)?;
    let group_clusters: BTreeMap<String, usize> =
        names.iter().zip(&km.assignment).map(|(n, &c)| (n.to_string(), c)).collect();

    let member_clusters: Vec<usize> = members.iter().map(|m| group_clusters[&m.group]).collect();
    let member_counts: Vec<TransitionCounts> = members.iter().map(|m| m.counts).collect();
    let params = pool_cluster_params(&member_clusters, &member_counts, k, config.smoothing, config.discount)?;
    let mut cluster_sizes = vec![0; k];
    for &c in &member_clusters {
        cluster_sizes[c] += 1;
    }

    let mut all = TransitionCounts::default();
    member_counts.iter().for_each(|c| all.merge(c));
    let global = estimate_params(&all, config.smoothing, config.discount)?.vector();
    let fallback_cluster = (0..k)
        .min_by(|&a, &b| {
            squared_distance(&km.centroids[a], &global).total_cmp(&squared_distance(&km.centroids[b], &global))
        })
        .unwrap_or(0);

    Ok(ClusterModel {
        config: config.clone(),
        group_clusters,
        centroids: km.centroids,
        params,
        cluster_sizes,
        fallback_cluster,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmab::state::{Action, BehaviorState, TransitionTuple};
    use BehaviorState::*;

    fn tuple(s: BehaviorState, a: Action, n: BehaviorState) -> TransitionTuple {
        TransitionTuple { state: s, action: a, next: n }
    }

    #[test]
    fn pooled_rows_average_members() {
        let a = TransitionCounts::from_tuples(&[tuple(E, Action::Abstain, E)]);
        let b = TransitionCounts::from_tuples(&[tuple(E, Action::Abstain, NE)]);
        let params = pool_cluster_params(&[0, 0], &[a, b], 1, 0.0, 0.9);
        // Other rows are empty at α = 0.
        assert!(params.is_err());
        let params = pool_cluster_params(&[0, 0], &[a, b], 1, 1.0, 0.9).unwrap();
        assert_eq!(params[0].prob(E, Action::Abstain, E), 0.5);
    }

    #[test]
    fn singleton_cluster_matches_member() {
        let c = TransitionCounts::from_tuples(&[
            tuple(E, Action::Abstain, E),
            tuple(NE, Action::Intervene, E),
            tuple(NE, Action::Abstain, NE),
        ]);
        let pooled = pool_cluster_params(&[0], &[c], 1, 1.0, 0.95).unwrap();
        assert_eq!(pooled[0], estimate_params(&c, 1.0, 0.95).unwrap());
    }

    #[test]
    fn grouping_key() {
        let p = BeneficiaryProfile {
            beneficiary_id: "b".into(),
            age: 27,
            education_level: 3,
            income_group: 2,
            phone_owner: crate::calllog::PhoneOwner::Woman,
            registration_date: chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            gestation_age: 10,
            language: crate::calllog::Language::Hindi,
            call_slot: 1,
        };
        assert_eq!(GroupingConfig::default().key(&p), "edu=3|inc=2|phone=woman|age=20-29");
        let none =
            GroupingConfig { education_level: false, income_group: false, phone_owner: false, age_bucket_years: None };
        assert_eq!(none.key(&p), "all");
    }

    #[test]
    fn unseen_group_uses_fallback() {
        let members: Vec<ClusterMember> = (0..4)
            .map(|i| ClusterMember {
                beneficiary_id: BeneficiaryId(format!("b{i}")),
                group: format!("g{}", i % 2),
                counts: TransitionCounts::from_tuples(&[tuple(E, Action::Abstain, if i % 2 == 0 { E } else { NE })]),
            })
            .collect();
        let cfg = ClusterConfig { n_clusters: 5, ..ClusterConfig::default() };
        let model = fit_cluster_model(&members, &cfg).unwrap();
        assert_eq!(model.params.len(), 2);
        assert_eq!(model.cluster_sizes.iter().sum::<usize>(), 4);
        assert_eq!(model.cluster_of("never-seen"), model.fallback_cluster);
        assert_ne!(model.cluster_of("g0"), model.cluster_of("g1"));
    }
}
