use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::calllog::{
    BeneficiaryId, BeneficiaryProfile, Language, PhoneOwner, CALL_SLOTS, EDUCATION_LEVELS, INCOME_GROUPS,
};
use crate::rmab::MdpParams;
use crate::seed::SeedTree;

/// Inclusive age range with a sampling weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBand {
    pub min: u32,
    pub max: u32,
    pub weight: f64,
}

/// Categorical weights per profile field. Ordinal fields are indexed from
/// their lowest code; weights need not be normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Demographics {
    pub age: Vec<AgeBand>,
    pub education_level: Vec<f64>,
    pub income_group: Vec<f64>,
    /// Order: woman, husband, family.
    pub phone_owner: Vec<f64>,
    /// Order: hindi, marathi, gujarati, kannada, english.
    pub language: Vec<f64>,
    pub call_slot: Vec<f64>,
    /// Inclusive range of gestation age at registration, in weeks.
    pub gestation_weeks: (u32, u32),
}

impl Default for Demographics {
    fn default() -> Self {
        Self {
            age: vec![
                AgeBand { min: 18, max: 19, weight: 0.1 },
                AgeBand { min: 20, max: 29, weight: 0.6 },
                AgeBand { min: 30, max: 39, weight: 0.27 },
                AgeBand { min: 40, max: 45, weight: 0.03 },
            ],
            education_level: vec![0.05, 0.1, 0.15, 0.25, 0.25, 0.15, 0.05],
            income_group: vec![0.2, 0.3, 0.25, 0.15, 0.07, 0.03],
            phone_owner: vec![0.5, 0.35, 0.15],
            language: vec![0.45, 0.4, 0.05, 0.05, 0.05],
            call_slot: vec![0.1, 0.2, 0.3, 0.2, 0.1, 0.1],
            gestation_weeks: (8, 30),
        }
    }
}

fn weighted(field: &str, weights: &[f64], len: usize) -> Result<WeightedIndex<f64>, SimError> {
    if weights.len() != len {
        return Err(SimError::spec(field, format!("expected {len} weights, got {}", weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(SimError::spec(field, "weights must be finite and non-negative"));
    }
    WeightedIndex::new(weights).map_err(|_| SimError::spec(field, "weights must not all be zero"))
}

fn span(range: (u32, u32)) -> usize {
    (range.1 - range.0 + 1) as usize
}

/// Validated samplers for [`Demographics`].
struct ProfileSampler {
    age: WeightedIndex<f64>,
    bands: Vec<AgeBand>,
    education: WeightedIndex<f64>,
    income: WeightedIndex<f64>,
    phone: WeightedIndex<f64>,
    language: WeightedIndex<f64>,
    slot: WeightedIndex<f64>,
    gestation: (u32, u32),
}

impl ProfileSampler {
    fn new(d: &Demographics, prefix: &str) -> Result<Self, SimError> {
        let field = |name: &str| format!("{prefix}.{name}");
        for band in &d.age {
            if band.min > band.max || band.min < crate::calllog::AGE_RANGE.0 || band.max > crate::calllog::AGE_RANGE.1 {
                return Err(SimError::spec(
                    &field("age"),
                    format!("band {}-{} outside the age domain", band.min, band.max),
                ));
            }
        }
        let ages: Vec<f64> = d.age.iter().map(|b| b.weight).collect();
        let (g0, g1) = d.gestation_weeks;
        if g0 > g1 || g1 > crate::calllog::GESTATION_RANGE.1 {
            return Err(SimError::spec(&field("gestation_weeks"), format!("invalid range ({g0}, {g1})")));
        }
        Ok(Self {
            age: weighted(&field("age"), &ages, ages.len().max(1))?,
            bands: d.age.clone(),
            education: weighted(&field("education_level"), &d.education_level, span(EDUCATION_LEVELS))?,
            income: weighted(&field("income_group"), &d.income_group, span(INCOME_GROUPS))?,
            phone: weighted(&field("phone_owner"), &d.phone_owner, PhoneOwner::ALL.len())?,
            language: weighted(&field("language"), &d.language, Language::ALL.len())?,
            slot: weighted(&field("call_slot"), &d.call_slot, span(CALL_SLOTS))?,
            gestation: d.gestation_weeks,
        })
    }

    fn sample<R: Rng>(
        &self,
        rng: &mut R,
        beneficiary_id: BeneficiaryId,
        registration_date: NaiveDate,
    ) -> BeneficiaryProfile {
        let band = self.bands[self.age.sample(rng)];
        BeneficiaryProfile {
            beneficiary_id,
            age: rng.random_range(band.min..=band.max),
            education_level: EDUCATION_LEVELS.0 + self.education.sample(rng) as u32,
            income_group: INCOME_GROUPS.0 + self.income.sample(rng) as u32,
            phone_owner: PhoneOwner::ALL[self.phone.sample(rng)],
            registration_date,
            gestation_age: rng.random_range(self.gestation.0..=self.gestation.1),
            language: Language::ALL[self.language.sample(rng)],
            call_slot: CALL_SLOTS.0 + self.slot.sample(rng) as u32,
        }
    }
}

/// A behavior type: ground-truth transition dynamics plus call reachability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    /// `[P(E,A,E), P(NE,A,NE), P(E,I,E), P(NE,I,NE)]`
    pub params: [f64; 4],
    /// Probability that an attempted call is picked up.
    pub connection_prob: f64,
    /// Mixture weight; weights over all archetypes sum to 1.
    pub weight: f64,
    /// Probability of starting in the engaging state.
    pub initial_e_prob: f64,
    /// Demographics for members of this archetype; the cohort default otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<Demographics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_beneficiaries: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
    /// Registrations are spread uniformly over this many days from `start_date`.
    pub registration_spread_days: u32,
    pub weeks: u32,
    pub demographics: Demographics,
    pub archetypes: Vec<Archetype>,
    pub discount: f64,
}

/// The cohort of the default intervention-study scenario.
impl Default for CohortSpec {
    fn default() -> Self {
        super::scenarios::psqis_default().cohort
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.archetypes.is_empty() {
            return Err(SimError::spec("archetypes", "at least one archetype is required"));
        }
        let total: f64 = self.archetypes.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-9 || self.archetypes.iter().any(|a| !(a.weight >= 0.0)) {
            return Err(SimError::spec(
                "archetypes.weight",
                format!("weights must be non-negative and sum to 1, got {total}"),
            ));
        }
        for (i, a) in self.archetypes.iter().enumerate() {
            let unit = |v: f64| (0.0..=1.0).contains(&v);
            if !a.params.iter().all(|&p| unit(p)) {
                return Err(SimError::spec(&format!("archetypes[{i}].params"), "probabilities must lie in [0, 1]"));
            }
            if !unit(a.connection_prob) {
                return Err(SimError::spec(&format!("archetypes[{i}].connection_prob"), "must lie in [0, 1]"));
            }
            if !unit(a.initial_e_prob) {
                return Err(SimError::spec(&format!("archetypes[{i}].initial_e_prob"), "must lie in [0, 1]"));
            }
            if let Some(d) = &a.demographics {
                ProfileSampler::new(d, &format!("archetypes[{i}].demographics"))?;
            }
        }
        ProfileSampler::new(&self.demographics, "demographics")?;
        if !(0.0..1.0).contains(&self.discount) {
            return Err(SimError::spec("discount", format!("{} outside [0, 1)", self.discount)));
        }
        Ok(())
    }

    pub fn archetype_params(&self, index: usize) -> MdpParams {
        MdpParams::from_vector(self.archetypes[index].params, self.discount).expect("validated archetype")
    }
}

/// Sampled profiles with their ground-truth archetype memberships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub spec: CohortSpec,
    pub profiles: Vec<BeneficiaryProfile>,
    /// Index into `spec.archetypes` per beneficiary.
    pub archetype: Vec<usize>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn params_of(&self, beneficiary: usize) -> MdpParams {
        self.spec.archetype_params(self.archetype[beneficiary])
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            archetypes: self.spec.archetypes.clone(),
            discount: self.spec.discount,
            membership: self
                .profiles
                .iter()
                .zip(&self.archetype)
                .map(|(p, &a)| (p.beneficiary_id.clone(), self.spec.archetypes[a].name.clone()))
                .collect(),
        }
    }
}

/// Archetypes and memberships, as written to `ground_truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub archetypes: Vec<Archetype>,
    pub discount: f64,
    pub membership: Vec<(BeneficiaryId, String)>,
}

pub fn beneficiary_id(index: usize) -> BeneficiaryId {
    BeneficiaryId::new(format!("b{index:06}"))
}

/// Seeded draw of archetype memberships, then profiles from the member's
/// archetype demographics (or the cohort default).
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort, SimError> {
    spec.validate()?;
    let mut rng = SeedTree::new(spec.seed).rng("cohort");
    let weights: Vec<f64> = spec.archetypes.iter().map(|a| a.weight).collect();
    let mixture = weighted("archetypes.weight", &weights, weights.len())?;
    let default_sampler = ProfileSampler::new(&spec.demographics, "demographics")?;
    let samplers: Vec<Option<ProfileSampler>> = spec
        .archetypes
        .iter()
        .map(|a| a.demographics.as_ref().map(|d| ProfileSampler::new(d, "archetypes.demographics")).transpose())
        .collect::<Result<_, _>>()?;
    let mut profiles = Vec::with_capacity(spec.n_beneficiaries);
    let mut archetype = Vec::with_capacity(spec.n_beneficiaries);
    for i in 0..spec.n_beneficiaries {
        let a = mixture.sample(&mut rng);
        let offset =
            if spec.registration_spread_days > 0 { rng.random_range(0..spec.registration_spread_days) } else { 0 };
        let date = spec.start_date + Days::new(u64::from(offset));
        let sampler = samplers[a].as_ref().unwrap_or(&default_sampler);
        profiles.push(sampler.sample(&mut rng, beneficiary_id(i), date));
        archetype.push(a);
    }
    Ok(Cohort { spec: spec.clone(), profiles, archetype })
}
