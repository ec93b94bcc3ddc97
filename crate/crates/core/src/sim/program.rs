use chrono::Days;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::Cohort;
use super::SimError;
use crate::calllog::{
    dedup_attempts, BeneficiaryProfile, CallHistory, CallRecord, DateWindow, InterventionKind, InterventionRecord,
    ENGAGEMENT_SECONDS,
};
use crate::rmab::{build_tuples, Action, BehaviorState, MdpParams, TransitionTuple};
use crate::seed::SeedTree;

/// Simulator knobs shared by every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProgramConfig {
    /// Chance that a connected call in an engaging month lasts past the engagement threshold.
    pub engage_prob_e: f64,
    /// Same, in a non-engaging month.
    pub engage_prob_ne: f64,
    /// Scheduled calls per week (1 or 2).
    pub calls_per_week: u32,
    /// A failed call is retried once the next day within the same attempt group.
    pub retry_failed: bool,
    /// SMS effect as a fraction of the expected call effect: the row moves
    /// `sms_multiplier * call_success` of the way from passive to active.
    pub sms_multiplier: f64,
    /// Probability that a planned call intervention reaches the beneficiary.
    pub call_success: f64,
    pub month_days: u32,
}

impl Default for ProgramConfig {
    fn default() -> Self {
        Self {
            engage_prob_e: 0.8,
            engage_prob_ne: 0.2,
            calls_per_week: 2,
            retry_failed: true,
            sms_multiplier: 0.3,
            call_success: 0.452,
            month_days: 30,
        }
    }
}

impl ProgramConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        for (field, v) in [
            ("engage_prob_e", self.engage_prob_e),
            ("engage_prob_ne", self.engage_prob_ne),
            ("sms_multiplier", self.sms_multiplier),
            ("call_success", self.call_success),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::spec(&format!("program.{field}"), format!("{v} outside [0, 1]")));
            }
        }
        if !(1..=2).contains(&self.calls_per_week) {
            return Err(SimError::spec("program.calls_per_week", "must be 1 or 2"));
        }
        if self.month_days < 7 {
            return Err(SimError::spec("program.month_days", "must be at least 7"));
        }
        Ok(())
    }
}

/// An intervention placed `day` days into a month.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Planned {
    pub kind: InterventionKind,
    pub day: u32,
}

/// Decides a beneficiary's intervention for a month after that month's calls
/// have been placed. `calls` holds every record so far, oldest first.
pub trait InterventionPolicy: Sync {
    fn decide(&self, beneficiary: usize, month: usize, calls: &[CallRecord]) -> Option<Planned>;
}

impl<F> InterventionPolicy for F
where
    F: Fn(usize, usize, &[CallRecord]) -> Option<Planned> + Sync,
{
    fn decide(&self, beneficiary: usize, month: usize, calls: &[CallRecord]) -> Option<Planned> {
        self(beneficiary, month, calls)
    }
}

pub struct NoInterventions;

impl InterventionPolicy for NoInterventions {
    fn decide(&self, _: usize, _: usize, _: &[CallRecord]) -> Option<Planned> {
        None
    }
}

/// Everything simulated for one beneficiary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeneficiaryTrace {
    /// Raw records including retries, in call order.
    pub calls: Vec<CallRecord>,
    pub interventions: Vec<InterventionRecord>,
    /// Latent state per month.
    pub states: Vec<BehaviorState>,
    /// Action realized per month: `Intervene` only for delivered calls.
    pub actions: Vec<Action>,
}

impl BeneficiaryTrace {
    /// Latent `(s_t, a_t, s_{t+1})` tuples.
    pub fn tuples(&self) -> Vec<TransitionTuple> {
        build_tuples(&self.states, &self.actions)
    }

    pub fn history(&self, profile: &BeneficiaryProfile, horizon_days: u32) -> CallHistory {
        let span = DateWindow::starting(profile.registration_date, u64::from(horizon_days));
        CallHistory::from_records(
            profile.beneficiary_id.clone(),
            &dedup_attempts(&self.calls),
            span,
            ENGAGEMENT_SECONDS,
        )
        .expect("simulated durations are non-negative")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub horizon_days: u32,
    /// Indexed like the cohort.
    pub traces: Vec<BeneficiaryTrace>,
}

impl SimOutcome {
    pub fn calls(&self) -> Vec<CallRecord> {
        self.traces.iter().flat_map(|t| t.calls.iter().cloned()).collect()
    }

    pub fn interventions(&self) -> Vec<InterventionRecord> {
        self.traces.iter().flat_map(|t| t.interventions.iter().cloned()).collect()
    }

    pub fn histories(&self, cohort: &Cohort) -> Vec<CallHistory> {
        self.traces.par_iter().zip(&cohort.profiles).map(|(t, p)| t.history(p, self.horizon_days)).collect()
    }
}

fn transition_row(
    mdp: &MdpParams,
    state: BehaviorState,
    planned: Option<(InterventionKind, bool)>,
    config: &ProgramConfig,
) -> f64 {
    let passive = mdp.prob(state, Action::Abstain, BehaviorState::E);
    let active = mdp.prob(state, Action::Intervene, BehaviorState::E);
    match planned {
        Some((InterventionKind::Call, true)) => active,
        Some((InterventionKind::Sms, _)) => passive + config.sms_multiplier * config.call_success * (active - passive),
        _ => passive,
    }
}

/// Simulates the listed beneficiaries. Each draws from its own streams
/// (`beneficiary/i` of `seed`): `state` for transitions, `calls` for call
/// outcomes, and `delivery` for intervention success, so results do not depend
/// on which other beneficiaries are simulated or on thread scheduling.
pub fn simulate_beneficiaries(
    cohort: &Cohort,
    indices: &[usize],
    horizon_days: u32,
    policy: &dyn InterventionPolicy,
    config: &ProgramConfig,
    seed: u64,
) -> Result<Vec<BeneficiaryTrace>, SimError> {
    config.validate()?;
    let seeds = SeedTree::new(seed).child("program");
    Ok(indices
        .par_iter()
        .map(|&i| simulate_one(cohort, i, horizon_days, policy, config, &seeds.indexed("beneficiary", i as u64)))
        .collect())
}

/// Simulates every beneficiary in the cohort for `horizon_days` from registration.
pub fn simulate_program(
    cohort: &Cohort,
    horizon_days: u32,
    policy: &dyn InterventionPolicy,
    config: &ProgramConfig,
    seed: u64,
) -> Result<SimOutcome, SimError> {
    let indices: Vec<usize> = (0..cohort.len()).collect();
    let traces = simulate_beneficiaries(cohort, &indices, horizon_days, policy, config, seed)?;
    Ok(SimOutcome { horizon_days, traces })
}

fn simulate_one(
    cohort: &Cohort,
    i: usize,
    horizon_days: u32,
    policy: &dyn InterventionPolicy,
    config: &ProgramConfig,
    seeds: &SeedTree,
) -> BeneficiaryTrace {
    let profile = &cohort.profiles[i];
    let archetype = &cohort.spec.archetypes[cohort.archetype[i]];
    let mdp = cohort.params_of(i);
    let mut state_rng = seeds.rng("state");
    let mut call_rng = seeds.rng("calls");
    let mut delivery_rng = seeds.rng("delivery");
    let offsets: &[u32] = if config.calls_per_week >= 2 { &[0, 3] } else { &[0] };
    let months = horizon_days.div_ceil(config.month_days) as usize;

    let mut state =
        if state_rng.random::<f64>() < archetype.initial_e_prob { BehaviorState::E } else { BehaviorState::NE };
    let mut trace =
        BeneficiaryTrace { calls: Vec::new(), interventions: Vec::new(), states: Vec::new(), actions: Vec::new() };
    for month in 0..months {
        trace.states.push(state);
        let engage = if state == BehaviorState::E { config.engage_prob_e } else { config.engage_prob_ne };
        let first = month as u32 * config.month_days;
        let last = (first + config.month_days).min(horizon_days);
        for day in first..last {
            if !offsets.contains(&(day % 7)) {
                continue;
            }
            let group = format!("{}-d{day}", profile.beneficiary_id);
            let mut place = |day: u32, rng: &mut crate::seed::Rng| {
                let connected = rng.random::<f64>() < archetype.connection_prob;
                let engaged = rng.random::<f64>() < engage;
                let duration = match (connected, engaged) {
                    (false, _) => 0.0,
                    (true, true) => f64::from(rng.random_range(31u32..=300)),
                    (true, false) => f64::from(rng.random_range(1u32..=30)),
                };
                trace.calls.push(CallRecord {
                    beneficiary_id: profile.beneficiary_id.clone(),
                    attempt_group: group.clone(),
                    call_date: profile.registration_date + Days::new(u64::from(day)),
                    message_id: profile.gestation_age + day / 7,
                    duration,
                    success: connected,
                });
                connected
            };
            if !place(day, &mut call_rng) && config.retry_failed && day + 1 < horizon_days {
                place(day + 1, &mut call_rng);
            }
        }

        let planned = policy.decide(i, month, &trace.calls);
        let mut realized = None;
        if let Some(p) = planned {
            let success = match p.kind {
                InterventionKind::Call => delivery_rng.random::<f64>() < config.call_success,
                InterventionKind::Sms => true,
            };
            let day = first + p.day.min(config.month_days - 1);
            trace.interventions.push(InterventionRecord {
                beneficiary_id: profile.beneficiary_id.clone(),
                date: profile.registration_date + Days::new(u64::from(day)),
                kind: p.kind,
                success,
            });
            realized = Some((p.kind, success));
        }
        trace.actions.push(match realized {
            Some((InterventionKind::Call, true)) => Action::Intervene,
            _ => Action::Abstain,
        });
        let to_e = transition_row(&mdp, state, realized, config);
        state = if state_rng.random::<f64>() < to_e { BehaviorState::E } else { BehaviorState::NE };
    }
    trace
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::calllog::EventKind;
    use crate::sim::cohort::{generate_cohort, Archetype, CohortSpec, Demographics};
    use chrono::NaiveDate;

    pub(crate) fn cohort(n: usize, params: [f64; 4], initial_e: f64) -> Cohort {
        let spec = CohortSpec {
            n_beneficiaries: n,
            seed: 1,
            start_date: NaiveDate::from_ymd_opt(2020, 5, 1).unwrap(),
            registration_spread_days: 5,
            weeks: 30,
            demographics: Demographics::default(),
            archetypes: vec![Archetype {
                name: "only".into(),
                params,
                connection_prob: 0.7,
                weight: 1.0,
                initial_e_prob: initial_e,
                demographics: None,
            }],
            discount: 0.95,
        };
        generate_cohort(&spec).unwrap()
    }

    #[test]
    fn absorbing_engagement() {
        let c = cohort(20, [1.0, 0.5, 1.0, 0.5], 1.0);
        let out = simulate_program(&c, 210, &NoInterventions, &ProgramConfig::default(), 3).unwrap();
        assert!(out.traces.iter().all(|t| t.states.iter().all(|&s| s == BehaviorState::E)));
        assert_eq!(out.traces[0].states.len(), 7);
    }

    #[test]
    fn intervened_ne_months_recover() {
        let c = cohort(50, [0.5, 0.9, 0.5, 0.0], 0.0);
        let always_call = |_: usize, _: usize, _: &[CallRecord]| Some(Planned { kind: InterventionKind::Call, day: 0 });
        let cfg = ProgramConfig { call_success: 1.0, ..ProgramConfig::default() };
        let out = simulate_program(&c, 300, &always_call, &cfg, 4).unwrap();
        for t in &out.traces {
            for w in t.states.windows(2) {
                if w[0] == BehaviorState::NE {
                    assert_eq!(w[1], BehaviorState::E);
                }
            }
        }
    }

    #[test]
    fn logs_respect_call_invariants() {
        let c = cohort(40, [0.8, 0.7, 0.9, 0.4], 0.5);
        let out = simulate_program(&c, 140, &NoInterventions, &ProgramConfig::default(), 5).unwrap();
        for (trace, profile) in out.traces.iter().zip(&c.profiles) {
            let deduped = dedup_attempts(&trace.calls);
            assert_eq!(dedup_attempts(&deduped), deduped);
            let h = trace.history(profile, out.horizon_days);
            for week in 0..20 {
                let start = profile.registration_date + Days::new(week * 7);
                let counts = h.counts(DateWindow::starting(start, 7));
                assert!(counts.engagements <= counts.connections && counts.connections <= counts.attempts);
                assert!(counts.attempts <= 2);
            }
            assert!(h.events().iter().all(|e| e.kind != EventKind::Engagement || e.duration > 30.0));
        }
    }

    #[test]
    fn outcome_ignores_other_beneficiaries() {
        let c = cohort(30, [0.8, 0.7, 0.9, 0.4], 0.5);
        let all = simulate_program(&c, 150, &NoInterventions, &ProgramConfig::default(), 6).unwrap();
        let some = simulate_beneficiaries(&c, &[4, 17], 150, &NoInterventions, &ProgramConfig::default(), 6).unwrap();
        assert_eq!(some[0], all.traces[4]);
        assert_eq!(some[1], all.traces[17]);
    }
}
