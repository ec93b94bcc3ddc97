//! Built-in scenarios and the single-file scenario config.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::cohort::{Archetype, CohortSpec, Demographics};
use super::policy::PolicyEvalConfig;
use super::program::ProgramConfig;
use super::psqis::PsqisConfig;
use super::SimError;
use crate::rmab::{ClusterConfig, GroupingConfig};

/// Everything `simulate` and `evaluate` need. Missing sections take the
/// defaults of [`psqis_default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub cohort: CohortSpec,
    pub program: ProgramConfig,
    pub psqis: PsqisConfig,
    pub evaluation: PolicyEvalConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        psqis_default()
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.cohort.validate()?;
        self.program.validate()?;
        self.evaluation.validate()
    }

    /// Simulated days covering the pre-period and the post-intervention window.
    pub fn horizon_days(&self) -> u32 {
        self.psqis.horizon_days(&self.program).max(self.cohort.weeks * 7)
    }

    /// Same scenario with every archetype's active rows replaced by its passive rows.
    pub fn without_intervention_effect(mut self) -> Self {
        for a in &mut self.cohort.archetypes {
            a.params[2] = a.params[0];
            a.params[3] = a.params[1];
        }
        self
    }
}

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 6).expect("valid date")
}

fn archetype(name: &str, params: [f64; 4], connection_prob: f64, weight: f64, initial_e_prob: f64) -> Archetype {
    Archetype { name: name.into(), params, connection_prob, weight, initial_e_prob, demographics: None }
}

/// Mixed cohort whose intervention study orders the arms
/// control < SMS < hybrid < call.
pub fn psqis_default() -> Scenario {
    let cohort = CohortSpec {
        n_beneficiaries: 40_000,
        seed: 0,
        start_date: start_date(),
        registration_spread_days: 28,
        weeks: 40,
        demographics: Demographics::default(),
        archetypes: vec![
            archetype("engaged", [0.9, 0.5, 0.95, 0.3], 0.75, 0.12, 0.8),
            archetype("responsive", [0.8, 0.92, 0.97, 0.05], 0.7, 0.55, 0.2),
            archetype("disengaged", [0.3, 0.95, 0.4, 0.85], 0.6, 0.33, 0.1),
        ],
        discount: 0.95,
    };
    Scenario {
        cohort,
        program: ProgramConfig::default(),
        psqis: PsqisConfig::default(),
        evaluation: PolicyEvalConfig::default(),
    }
}

/// The default study with interventions that change nothing.
pub fn zero_effect() -> Scenario {
    psqis_default().without_intervention_effect()
}

/// Cohort with a planted "responsive" archetype, identifiable from education
/// and phone ownership, that only calls move out of the non-engaging state.
/// The other archetypes do not respond to calls.
pub fn planted_heterogeneity() -> Scenario {
    let responsive_demographics = Demographics {
        education_level: vec![0.0, 0.0, 0.0, 0.0, 0.4, 0.4, 0.2],
        phone_owner: vec![1.0, 0.0, 0.0],
        ..Demographics::default()
    };
    let others = Demographics {
        education_level: vec![0.1, 0.2, 0.3, 0.4, 0.0, 0.0, 0.0],
        phone_owner: vec![0.0, 0.7, 0.3],
        ..Demographics::default()
    };
    let cohort = CohortSpec {
        n_beneficiaries: 4_000,
        seed: 0,
        start_date: start_date(),
        registration_spread_days: 28,
        weeks: 40,
        demographics: others,
        archetypes: vec![
            Archetype {
                demographics: Some(responsive_demographics),
                ..archetype("responsive", [0.9, 0.95, 0.95, 0.1], 0.7, 0.3, 0.3)
            },
            archetype("steady", [0.9, 0.5, 0.9, 0.5], 0.7, 0.35, 0.6),
            archetype("disengaged", [0.4, 0.9, 0.4, 0.9], 0.7, 0.35, 0.2),
        ],
        discount: 0.95,
    };
    let grouping = GroupingConfig { income_group: false, age_bucket_years: None, ..GroupingConfig::default() };
    Scenario {
        cohort,
        program: ProgramConfig::default(),
        psqis: PsqisConfig { grouping: grouping.clone(), ..PsqisConfig::default() },
        evaluation: PolicyEvalConfig {
            cluster: ClusterConfig { n_clusters: 6, grouping, ..ClusterConfig::default() },
            ..PolicyEvalConfig::default()
        },
    }
}
