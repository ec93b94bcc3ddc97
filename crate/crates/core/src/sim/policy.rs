//! End-to-end evaluation of planning policies: fit the cluster model on a
//! training split, rank a held-out call arm and control arm, and compare how
//! many of each arm's top-k end up highly engaged.

use std::collections::BTreeSet;

use chrono::Days;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::Cohort;
use super::program::{simulate_beneficiaries, simulate_program, NoInterventions, Planned, ProgramConfig};
use super::psqis::high_engagement;
use super::SimError;
use crate::calllog::{BeneficiaryId, CallHistory, CallRecord, DateWindow, InterventionKind};
use crate::rmab::{
    fit_cluster_model, monthly_actions, monthly_states, overlap_metric, plan_top_k, rank_entries, window_state, Action,
    BehaviorState, ClusterConfig, ClusterMember, ClusterModel, PlanEntry, TransitionCounts, WhittleConfig,
    WhittleTable,
};
use crate::seed::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Highest Whittle index first.
    Whittle,
    /// Uniform sample of k.
    Random,
    /// NE beneficiaries first, then by one-step gain in E probability from a call.
    MyopicNeFirst,
    /// Whittle ranking, but the call arm receives no calls.
    NoOp,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Whittle, Policy::Random, Policy::MyopicNeFirst, Policy::NoOp];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Whittle => "whittle",
            Policy::Random => "random",
            Policy::MyopicNeFirst => "myopic-ne-first",
            Policy::NoOp => "no-op",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyEvalConfig {
    pub k: usize,
    pub runs: usize,
    /// Share of the cohort used to fit the cluster model.
    pub train_fraction: f64,
    /// Chance that a training beneficiary received a call, so active rows can be estimated.
    pub train_call_prob: f64,
    /// Months observed before the intervention.
    pub pre_months: u32,
    pub post_weeks: u32,
    pub high_e2c: f64,
    pub policies: Vec<Policy>,
    pub cluster: ClusterConfig,
    pub whittle: WhittleConfig,
    pub seed: u64,
}

impl Default for PolicyEvalConfig {
    fn default() -> Self {
        Self {
            k: 100,
            runs: 50,
            train_fraction: 0.5,
            train_call_prob: 0.5,
            pre_months: 3,
            post_weeks: 15,
            high_e2c: 0.5,
            policies: Policy::ALL.to_vec(),
            cluster: ClusterConfig::default(),
            whittle: WhittleConfig::default(),
            seed: 0,
        }
    }
}

impl PolicyEvalConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.k == 0 {
            return Err(SimError::spec("evaluation.k", "must be positive"));
        }
        if self.runs == 0 {
            return Err(SimError::spec("evaluation.runs", "must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(SimError::spec("evaluation.train_fraction", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.train_call_prob) {
            return Err(SimError::spec("evaluation.train_call_prob", "must lie in [0, 1]"));
        }
        if self.pre_months == 0 {
            return Err(SimError::spec("evaluation.pre_months", "must be at least 1"));
        }
        if self.post_weeks == 0 {
            return Err(SimError::spec("evaluation.post_weeks", "must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(SimError::spec("evaluation.policies", "at least one policy is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub run: usize,
    pub call: f64,
    pub control: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: Policy,
    pub call_mean: f64,
    pub call_std: f64,
    pub control_mean: f64,
    pub control_std: f64,
    pub gap_mean: f64,
    pub gap_std: f64,
    pub runs: Vec<PolicyRun>,
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Split {
    train: Vec<usize>,
    call: Vec<usize>,
    control: Vec<usize>,
    train_called: Vec<bool>,
}

fn split(n: usize, config: &PolicyEvalConfig, seeds: &SeedTree) -> Split {
    let mut rng = seeds.rng("split");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = ((n as f64) * config.train_fraction).round() as usize;
    let (train, test) = order.split_at(n_train.min(n));
    let half = test.len() / 2;
    let mut train = train.to_vec();
    let mut call = test[..half].to_vec();
    let mut control = test[half..].to_vec();
    train.sort_unstable();
    call.sort_unstable();
    control.sort_unstable();
    let mut called_rng = seeds.rng("train-calls");
    let mut train_called = vec![false; n];
    for &i in &train {
        train_called[i] = called_rng.random::<f64>() < config.train_call_prob;
    }
    Split { train, call, control, train_called }
}

fn fit_model(
    cohort: &Cohort,
    histories: &[CallHistory],
    interventions: &[Vec<crate::calllog::InterventionRecord>],
    train: &[usize],
    cluster: &ClusterConfig,
) -> Result<ClusterModel, SimError> {
    let members: Vec<ClusterMember> = train
        .iter()
        .map(|&i| {
            let h = &histories[i];
            let states = monthly_states(h, &cluster.states);
            let actions = monthly_actions(&interventions[i], h.span(), states.len(), &cluster.states);
            let tuples = crate::rmab::build_tuples(&states, &actions);
            ClusterMember {
                beneficiary_id: cohort.profiles[i].beneficiary_id.clone(),
                group: cluster.grouping.key(&cohort.profiles[i]),
                counts: TransitionCounts::from_tuples(&tuples),
            }
        })
        .collect();
    Ok(fit_cluster_model(&members, cluster)?)
}

fn select(
    policy: Policy,
    entries: &[PlanEntry],
    model: &ClusterModel,
    k: usize,
    rng: &mut crate::seed::Rng,
) -> Vec<BeneficiaryId> {
    match policy {
        Policy::Whittle | Policy::NoOp => plan_top_k(entries, k).selected,
        Policy::Random => entries.choose_multiple(rng, k).map(|e| e.beneficiary_id.clone()).collect(),
        Policy::MyopicNeFirst => {
            let gain = |e: &PlanEntry| {
                let p = &model.params[e.cluster];
                p.prob(e.state, Action::Intervene, BehaviorState::E)
                    - p.prob(e.state, Action::Abstain, BehaviorState::E)
            };
            let mut ranked: Vec<&PlanEntry> = rank_entries(entries);
            ranked.sort_by(|a, b| {
                (b.state == BehaviorState::NE)
                    .cmp(&(a.state == BehaviorState::NE))
                    .then_with(|| gain(b).total_cmp(&gain(a)))
                    .then_with(|| a.beneficiary_id.cmp(&b.beneficiary_id))
            });
            ranked.into_iter().take(k).map(|e| e.beneficiary_id.clone()).collect()
        }
    }
}

fn single_run(
    cohort: &Cohort,
    program: &ProgramConfig,
    config: &PolicyEvalConfig,
    run: usize,
) -> Result<Vec<(Policy, PolicyRun)>, SimError> {
    let seeds = SeedTree::new(config.seed).indexed("run", run as u64);
    let parts = split(cohort.len(), config, &seeds);
    let available = parts.call.len().min(parts.control.len());
    if config.k > available {
        return Err(SimError::BudgetTooLarge { k: config.k, available });
    }
    let mut in_call = vec![false; cohort.len()];
    for &i in &parts.call {
        in_call[i] = true;
    }
    let month = config.pre_months as usize;
    let calls = |i: usize, m: usize, _: &[CallRecord]| {
        (m == month && (in_call[i] || parts.train_called[i]))
            .then_some(Planned { kind: InterventionKind::Call, day: 0 })
    };
    let start = config.pre_months * program.month_days;
    let horizon = start + config.post_weeks * 7;
    let sim_seed = seeds.seed("sim");
    let outcome = simulate_program(cohort, horizon, &calls, program, sim_seed)?;
    let histories = outcome.histories(cohort);
    let interventions: Vec<_> = outcome.traces.iter().map(|t| t.interventions.clone()).collect();

    let mut cluster = config.cluster.clone();
    cluster.seed = seeds.seed("kmeans");
    cluster.states.month_days = program.month_days;
    let model = fit_model(cohort, &histories, &interventions, &parts.train, &cluster)?;
    let table = WhittleTable::compute(&model.params, &config.whittle)?;

    let entries = |arm: &[usize]| -> Vec<PlanEntry> {
        arm.iter()
            .map(|&i| {
                let p = &cohort.profiles[i];
                let before = DateWindow::starting(
                    p.registration_date + Days::new(u64::from(start - program.month_days)),
                    u64::from(program.month_days),
                );
                let state = window_state(&histories[i], before, cluster.states.e2c_threshold);
                table.entry(p.beneficiary_id.clone(), model.cluster_of_profile(p), state)
            })
            .collect()
    };
    let post = |i: usize| {
        DateWindow::starting(
            cohort.profiles[i].registration_date + Days::new(u64::from(start)),
            u64::from(config.post_weeks) * 7,
        )
    };
    let high = |arm: &[usize], hist: &dyn Fn(usize) -> CallHistory| -> BTreeSet<BeneficiaryId> {
        arm.iter()
            .filter(|&&i| high_engagement(&hist(i), post(i), config.high_e2c))
            .map(|&i| cohort.profiles[i].beneficiary_id.clone())
            .collect()
    };
    let observed = |i: usize| histories[i].clone();
    let call_entries = entries(&parts.call);
    let control_entries = entries(&parts.control);
    let call_high = high(&parts.call, &observed);
    let control_high = high(&parts.control, &observed);

    let mut results = Vec::new();
    for &policy in &config.policies {
        let mut rng = seeds.child("select").rng(policy.as_str());
        let call_sel = select(policy, &call_entries, &model, config.k, &mut rng);
        let control_sel = select(policy, &control_entries, &model, config.k, &mut rng);
        let call = if policy == Policy::NoOp {
            let traces = simulate_beneficiaries(cohort, &parts.call, horizon, &NoInterventions, program, sim_seed)?;
            let untreated = |i: usize| {
                let pos = parts.call.binary_search(&i).expect("call-arm member");
                traces[pos].history(&cohort.profiles[i], horizon)
            };
            overlap_metric(&call_sel, &high(&parts.call, &untreated))?
        } else {
            overlap_metric(&call_sel, &call_high)?
        };
        let control = overlap_metric(&control_sel, &control_high)?;
        results.push((policy, PolicyRun { run, call, control, gap: call - control }));
    }
    Ok(results)
}

/// Runs `config.runs` seeded replications and summarizes each policy's
/// call-arm overlap, control-arm overlap, and their difference.
pub fn evaluate_policies(
    cohort: &Cohort,
    program: &ProgramConfig,
    config: &PolicyEvalConfig,
) -> Result<Vec<PolicyReport>, SimError> {
    config.validate()?;
    program.validate()?;
    let per_run = (0..config.runs)
        .into_par_iter()
        .map(|r| single_run(cohort, program, config, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(config
        .policies
        .iter()
        .map(|&policy| {
            let runs: Vec<PolicyRun> =
                per_run.iter().flatten().filter(|(p, _)| *p == policy).map(|(_, r)| r.clone()).collect();
            let (call_mean, call_std) = mean_std(runs.iter().map(|r| r.call));
            let (control_mean, control_std) = mean_std(runs.iter().map(|r| r.control));
            let (gap_mean, gap_std) = mean_std(runs.iter().map(|r| r.gap));
            PolicyReport { policy, call_mean, call_std, control_mean, control_std, gap_mean, gap_std, runs }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::program::tests::cohort;

    fn small_config(runs: usize) -> PolicyEvalConfig {
        PolicyEvalConfig {
            k: 10,
            runs,
            cluster: ClusterConfig { n_clusters: 3, ..ClusterConfig::default() },
            ..PolicyEvalConfig::default()
        }
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std([4.0].into_iter()), (4.0, 0.0));
        let (m, s) = mean_std([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn budget_above_arm_size_is_an_error() {
        let c = cohort(40, [0.8, 0.7, 0.9, 0.4], 0.5);
        let cfg = PolicyEvalConfig { k: 11, ..small_config(1) };
        assert!(matches!(
            evaluate_policies(&c, &ProgramConfig::default(), &cfg),
            Err(SimError::BudgetTooLarge { k: 11, available: 10 })
        ));
    }

    #[test]
    fn reproducible_and_shaped() {
        let c = cohort(200, [0.8, 0.7, 0.9, 0.4], 0.5);
        let cfg = small_config(3);
        let a = evaluate_policies(&c, &ProgramConfig::default(), &cfg).unwrap();
        let b = evaluate_policies(&c, &ProgramConfig::default(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        for report in &a {
            assert_eq!(report.runs.len(), 3);
            for r in &report.runs {
                assert!((0.0..=100.0).contains(&r.call) && (0.0..=100.0).contains(&r.control));
                assert_eq!(r.gap, r.call - r.control);
            }
        }
    }

    #[test]
    fn no_op_matches_whittle_when_calls_have_no_effect() {
        let c = cohort(200, [0.8, 0.7, 0.8, 0.7], 0.5);
        let reports = evaluate_policies(&c, &ProgramConfig::default(), &small_config(2)).unwrap();
        let find = |p| reports.iter().find(|r| r.policy == p).unwrap();
        assert_eq!(find(Policy::NoOp).runs, find(Policy::Whittle).runs);
    }
}
