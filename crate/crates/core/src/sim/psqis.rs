//! Four-arm intervention study: control, SMS, call, and SMS followed by a
//! call for non-responders.

use std::collections::BTreeMap;

use chrono::Days;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cohort::Cohort;
use super::program::{simulate_program, Planned, ProgramConfig, SimOutcome};
use super::SimError;
use crate::calllog::{
    classify_call, dedup_attempts, CallHistory, CallRecord, DateWindow, EventCounts, InterventionKind,
};
use crate::rmab::GroupingConfig;
use crate::seed::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Sms,
    Hybrid,
    Call,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Control, Arm::Sms, Arm::Hybrid, Arm::Call];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Sms => "sms",
            Arm::Hybrid => "hybrid",
            Arm::Call => "call",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsqisConfig {
    /// Months observed before interventions start.
    pub pre_months: u32,
    /// Length of the post-intervention observation period.
    pub post_weeks: u32,
    /// Hybrid arm: weeks observed after the SMS before deciding on a call.
    pub hybrid_wait_weeks: u32,
    /// High engagement: post-period E2C strictly above this.
    pub high_e2c: f64,
    /// Keep only beneficiaries with at least this many engagements in their
    /// first 60 days.
    pub min_early_engagements: Option<u32>,
    pub grouping: GroupingConfig,
}

impl Default for PsqisConfig {
    fn default() -> Self {
        Self {
            pre_months: 3,
            post_weeks: 15,
            hybrid_wait_weeks: 6,
            high_e2c: 0.5,
            min_early_engagements: None,
            grouping: GroupingConfig::default(),
        }
    }
}

impl PsqisConfig {
    pub fn horizon_days(&self, program: &ProgramConfig) -> u32 {
        self.pre_months * program.month_days + self.post_weeks * 7
    }

    pub fn intervention_day(&self, program: &ProgramConfig) -> u32 {
        self.pre_months * program.month_days
    }
}

/// Arm assignment stratified by grouping key: each stratum is shuffled and
/// dealt round-robin, continuing the rotation across strata so arm sizes
/// differ by at most one.
pub fn assign_arms(cohort: &Cohort, grouping: &GroupingConfig, seed: u64) -> Vec<Arm> {
    let mut rng = SeedTree::new(seed).rng("arms");
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, p) in cohort.profiles.iter().enumerate() {
        strata.entry(grouping.key(p)).or_default().push(i);
    }
    let mut arms = vec![Arm::Control; cohort.len()];
    let mut next = rng.random_range(0..Arm::ALL.len());
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            arms[i] = Arm::ALL[next % Arm::ALL.len()];
            next += 1;
        }
    }
    arms
}

/// Counts over deduplicated calls dated in `window`.
pub fn window_counts(calls: &[CallRecord], window: DateWindow) -> EventCounts {
    let mut counts = EventCounts::default();
    for r in dedup_attempts(calls) {
        if window.contains(r.call_date) {
            counts.add(classify_call(&r).expect("non-negative duration").kind);
        }
    }
    counts
}

/// Post-period E2C strictly above `threshold`; no connections counts as not high.
pub fn high_engagement(history: &CallHistory, window: DateWindow, threshold: f64) -> bool {
    history.counts(window).e2c().is_some_and(|r| r > threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub n: usize,
    pub high: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsqisResult {
    pub arms: Vec<ArmResult>,
}

impl PsqisResult {
    pub fn arm(&self, arm: Arm) -> &ArmResult {
        self.arms.iter().find(|a| a.arm == arm).expect("all arms reported")
    }
}

/// Simulates the study and reports, per arm, the share of beneficiaries with
/// high engagement over the post-intervention period.
///
/// Interventions start `pre_months` months after registration. The hybrid arm
/// gets an SMS then, and a call `hybrid_wait_weeks` later unless the E2C ratio
/// over the calls in between reached `high_e2c`.
pub fn run_psqis(
    cohort: &Cohort,
    arms: &[Arm],
    program: &ProgramConfig,
    config: &PsqisConfig,
    seed: u64,
) -> Result<(PsqisResult, SimOutcome), SimError> {
    if arms.len() != cohort.len() {
        return Err(SimError::Unassigned { assigned: arms.len(), beneficiaries: cohort.len() });
    }
    program.validate()?;
    let month_days = program.month_days;
    let start = config.intervention_day(program);
    let start_month = (start / month_days) as usize;
    let followup = start + config.hybrid_wait_weeks * 7;
    let followup_month = (followup / month_days) as usize;
    let threshold = config.high_e2c;
    let policy = |i: usize, month: usize, calls: &[CallRecord]| -> Option<Planned> {
        let at = |kind| Some(Planned { kind, day: 0 });
        match (arms[i], month) {
            (Arm::Sms | Arm::Hybrid, m) if m == start_month => at(InterventionKind::Sms),
            (Arm::Call, m) if m == start_month => at(InterventionKind::Call),
            (Arm::Hybrid, m) if m == followup_month && followup_month > start_month => {
                let reg = cohort.profiles[i].registration_date;
                let window = DateWindow::new(reg + Days::new(u64::from(start)), reg + Days::new(u64::from(followup)));
                let responded = window_counts(calls, window).e2c().is_some_and(|r| r >= threshold);
                (!responded).then_some(Planned { kind: InterventionKind::Call, day: followup % month_days })
            }
            _ => None,
        }
    };
    let horizon = config.horizon_days(program);
    let outcome = simulate_program(cohort, horizon, &policy, program, seed)?;

    let mut tally: BTreeMap<Arm, (usize, usize)> = Arm::ALL.iter().map(|&a| (a, (0, 0))).collect();
    for (i, history) in outcome.histories(cohort).iter().enumerate() {
        let reg = cohort.profiles[i].registration_date;
        if let Some(min) = config.min_early_engagements {
            if history.counts(DateWindow::starting(reg, 60)).engagements < min {
                continue;
            }
        }
        let post = DateWindow::starting(reg + Days::new(u64::from(start)), u64::from(config.post_weeks) * 7);
        let entry = tally.get_mut(&arms[i]).expect("every arm tallied");
        entry.0 += 1;
        entry.1 += usize::from(high_engagement(history, post, threshold));
    }
    let arms = Arm::ALL
        .iter()
        .map(|&arm| {
            let (n, high) = tally[&arm];
            ArmResult { arm, n, high, percent: if n > 0 { 100.0 * high as f64 / n as f64 } else { 0.0 } }
        })
        .collect();
    Ok((PsqisResult { arms }, outcome))
}
