//! `plan` and `evaluate`.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::Days;
use engage_core::calllog::{DateWindow, Task};
use engage_core::rmab::{
    build_tuples, fit_cluster_model, monthly_actions, monthly_states, rank_entries, window_state, ClusterMember,
    ClusterModel, TransitionCounts, WhittleTable,
};
use engage_core::sim::{evaluate_policies, Cohort, PolicyReport};
use engage_core::SeedTree;
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{read_ground_truth, Dataset};
use crate::error::{CliError, Result};
use crate::model::{load_model, predict_dataset};
use crate::output::{OutDir, Provenance};

#[derive(Serialize)]
struct ClusterArtifacts<'a> {
    model: &'a ClusterModel,
    whittle: &'a WhittleTable,
}

/// Ranks predicted-LLTE beneficiaries by Whittle index and flags the top k.
///
/// The pool keeps beneficiaries the model flags as LLTE that still had at
/// least `min_early_engagements` engagements in their first `early_days`.
/// Clusters are fitted on the monthly states and call actions of every
/// beneficiary in the input; current states come from the month before each
/// planning date. With a replanning interval every epoch is ranked on its own.
pub fn plan(config: &RunConfig, model_path: &Path, input: &Path, out: &OutDir) -> Result<()> {
    let provenance = Provenance::new("plan", config);
    let model = load_model(model_path)?;
    if model.task != Task::LongTerm {
        return Err(CliError::Data(format!("{}: planning needs a long-term model", model_path.display())));
    }
    let data = Dataset::load(input)?;
    let histories = data.histories(config)?;
    let predictions = predict_dataset(config, &model, &data, &histories)?;
    let interventions = data.interventions_by_id();
    let plan = &config.plan;
    let mut cluster = plan.cluster.clone();
    cluster.seed = SeedTree::new(config.seed).seed("kmeans");

    let members: Vec<ClusterMember> = data
        .profiles
        .iter()
        .map(|p| {
            let h = &histories[&p.beneficiary_id];
            let states = monthly_states(h, &cluster.states);
            let logged = interventions.get(&p.beneficiary_id).map_or(&[][..], Vec::as_slice);
            let actions = monthly_actions(logged, h.span(), states.len(), &cluster.states);
            ClusterMember {
                beneficiary_id: p.beneficiary_id.clone(),
                group: cluster.grouping.key(p),
                counts: TransitionCounts::from_tuples(&build_tuples(&states, &actions)),
            }
        })
        .collect();
    let clusters = fit_cluster_model(&members, &cluster)?;
    let table = WhittleTable::compute(&clusters.params, &plan.whittle)?;

    let log_end = data.calls.iter().map(|c| c.call_date + Days::new(1)).max();
    let as_of =
        plan.as_of.or(log_end).ok_or_else(|| CliError::Data("no calls logged and no plan.as_of given".into()))?;
    let mut epochs = vec![as_of];
    if let (Some(step), Some(end)) = (plan.replan_interval_days, log_end) {
        while let Some(next) = epochs.last().and_then(|d| d.checked_add_days(Days::new(u64::from(step)))) {
            if next > end {
                break;
            }
            epochs.push(next);
        }
    }

    let pool: Vec<_> = data
        .profiles
        .iter()
        .zip(&predictions)
        .filter(|(p, pred)| {
            let early = DateWindow::starting(p.registration_date, u64::from(plan.early_days));
            pred.positive && histories[&p.beneficiary_id].counts(early).engagements >= plan.min_early_engagements
        })
        .collect();
    if pool.is_empty() {
        return Err(CliError::Data(format!(
            "empty intervention pool: no predicted LLTE beneficiary has {} engagements in the first {} days",
            plan.min_early_engagements, plan.early_days
        )));
    }
    let probability: BTreeMap<_, _> = pool.iter().map(|(p, pred)| (&p.beneficiary_id, pred.probability)).collect();

    let mut rows = Vec::new();
    for (epoch, &date) in epochs.iter().enumerate() {
        let recent = DateWindow::ending(date, u64::from(cluster.states.month_days));
        let entries: Vec<_> = pool
            .iter()
            .map(|(p, _)| {
                let state = window_state(&histories[&p.beneficiary_id], recent, cluster.states.e2c_threshold);
                table.entry(p.beneficiary_id.clone(), clusters.cluster_of_profile(p), state)
            })
            .collect();
        for (rank, e) in rank_entries(&entries).into_iter().enumerate() {
            rows.push([
                epoch.to_string(),
                date.to_string(),
                (rank + 1).to_string(),
                e.beneficiary_id.to_string(),
                e.cluster.to_string(),
                e.state.as_str().to_string(),
                e.index.to_string(),
                probability[&e.beneficiary_id].to_string(),
                u8::from(rank < plan.k).to_string(),
            ]);
        }
    }
    let header = [
        "epoch",
        "as_of",
        "rank",
        "beneficiary_id",
        "cluster",
        "state",
        "whittle_index",
        "llte_probability",
        "selected",
    ];
    out.write_csv("plan.csv", &provenance, &header, rows)?;
    out.write_json(
        "cluster_model.json",
        &provenance,
        "clusters",
        &ClusterArtifacts { model: &clusters, whittle: &table },
    )?;
    let selected = plan.k.min(pool.len());
    match epochs.as_slice() {
        [only] => println!("pool of {}, selected {selected} as of {only}", pool.len()),
        [first, .., last] => {
            println!(
                "pool of {}, selected {selected} in each of {} epochs from {first} to {last}",
                pool.len(),
                epochs.len()
            )
        }
        [] => unreachable!("at least one epoch"),
    }
    Ok(())
}

/// Rebuilds the cohort from `beneficiaries.csv` and `ground_truth.json`.
fn cohort_from(config: &RunConfig, input: &Path) -> Result<Cohort> {
    let truth = read_ground_truth(input)?;
    let data = Dataset::load(input)?;
    let names: BTreeMap<&str, usize> = truth.archetypes.iter().enumerate().map(|(i, a)| (a.name.as_str(), i)).collect();
    let membership: BTreeMap<_, _> = truth.membership.iter().map(|(id, name)| (id, name.as_str())).collect();
    let archetype = data
        .profiles
        .iter()
        .map(|p| {
            let name = membership
                .get(&p.beneficiary_id)
                .ok_or_else(|| CliError::Data(format!("ground truth has no archetype for {}", p.beneficiary_id)))?;
            names.get(name).copied().ok_or_else(|| CliError::Data(format!("unknown archetype {name:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spec = config.scenario.cohort.clone();
    spec.n_beneficiaries = data.profiles.len();
    spec.archetypes = truth.archetypes;
    spec.discount = truth.discount;
    spec.validate()?;
    Ok(Cohort { spec, profiles: data.profiles, archetype })
}

#[derive(Serialize)]
struct Evaluation<'a> {
    k: usize,
    runs: usize,
    policies: &'a [PolicyReport],
}

pub fn format_table(reports: &[PolicyReport]) -> String {
    let mut table = format!("{:<16} {:<16} {:<16} {:<16}\n", "policy", "call", "control", "gap");
    for r in reports {
        let cell = |m: f64, s: f64| format!("{m:.2} ± {s:.2}");
        table.push_str(&format!(
            "{:<16} {:<16} {:<16} {:<16}\n",
            r.policy.as_str(),
            cell(r.call_mean, r.call_std),
            cell(r.control_mean, r.control_std),
            cell(r.gap_mean, r.gap_std),
        ));
    }
    table
}

/// Policy comparison on a generated cohort with known ground truth.
pub fn evaluate(config: &RunConfig, input: &Path, out: &OutDir) -> Result<()> {
    let provenance = Provenance::new("evaluate", config);
    let cohort = cohort_from(config, input)?;
    let mut eval = config.scenario.evaluation.clone();
    eval.seed = SeedTree::new(config.seed).seed("evaluation");
    let reports = evaluate_policies(&cohort, &config.scenario.program, &eval)?;
    out.write_json(
        "evaluation.json",
        &provenance,
        "evaluation",
        &Evaluation { k: eval.k, runs: eval.runs, policies: &reports },
    )?;
    let table = format_table(&reports);
    out.write_text("evaluation.txt", &table)?;
    print!("{table}");
    Ok(())
}
