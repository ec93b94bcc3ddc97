//! `generate`, `simulate`, and `featurize`, plus reading a dataset directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use engage_core::calllog::io::{
    build_histories, read_beneficiaries, read_calls, read_interventions, write_beneficiaries, write_calls,
    write_interventions, ParseOptions,
};
use engage_core::calllog::{
    make_long_term_example, make_short_term_example, sample_anchor, BeneficiaryId, BeneficiaryProfile, CallHistory,
    CallLogError, CallRecord, ExclusionReason, InterventionKind, InterventionRecord, Task,
};
use engage_core::predictors::{FeatureDataset, LabeledExample};
use engage_core::sim::{
    assign_arms, generate_cohort, run_psqis, simulate_program, Arm, Cohort, GroundTruth, Planned, SimOutcome,
};
use engage_core::SeedTree;
use rand::Rng;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{OutDir, Provenance};

pub const BENEFICIARIES: &str = "beneficiaries.csv";
pub const CALLS: &str = "calls.csv";
pub const INTERVENTIONS: &str = "interventions.csv";
pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const FEATURES: &str = "features.json";

/// A dataset directory: profiles, call log, optional intervention log.
pub struct Dataset {
    pub profiles: Vec<BeneficiaryProfile>,
    pub calls: Vec<CallRecord>,
    pub interventions: Vec<InterventionRecord>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(CliError::io(path))
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let options = ParseOptions::default();
        let profiles = read_beneficiaries(open(&dir.join(BENEFICIARIES))?, options)?.rows;
        let calls = read_calls(open(&dir.join(CALLS))?, options)?.rows;
        let path = dir.join(INTERVENTIONS);
        let interventions = if path.exists() { read_interventions(open(&path)?, options)?.rows } else { Vec::new() };
        Ok(Self { profiles, calls, interventions })
    }

    pub fn histories(&self, config: &RunConfig) -> Result<BTreeMap<BeneficiaryId, CallHistory>> {
        Ok(build_histories(&self.profiles, &self.calls, config.data.engagement_seconds, config.data.observed_until)?)
    }

    pub fn interventions_by_id(&self) -> BTreeMap<BeneficiaryId, Vec<InterventionRecord>> {
        let mut by_id: BTreeMap<BeneficiaryId, Vec<InterventionRecord>> = BTreeMap::new();
        for rec in &self.interventions {
            by_id.entry(rec.beneficiary_id.clone()).or_default().push(rec.clone());
        }
        by_id
    }
}

fn cohort(config: &RunConfig) -> Result<Cohort> {
    let mut spec = config.scenario.cohort.clone();
    spec.seed = SeedTree::new(config.seed).seed("cohort");
    Ok(generate_cohort(&spec)?)
}

fn write_logs(out: &OutDir, provenance: &Provenance, cohort: &Cohort, outcome: &SimOutcome) -> Result<()> {
    let comments = provenance.comments();
    write_beneficiaries(out.writer(BENEFICIARIES)?, &cohort.profiles, &comments)?;
    write_calls(out.writer(CALLS)?, &outcome.calls(), &comments)?;
    write_interventions(out.writer(INTERVENTIONS)?, &outcome.interventions(), &comments)?;
    out.write_json(GROUND_TRUTH, provenance, "ground_truth", &cohort.ground_truth())
}

/// Observational data: each beneficiary-month draws a call intervention with
/// probability `generate.call_prob`.
pub fn generate(config: &RunConfig, out: &OutDir) -> Result<()> {
    let provenance = Provenance::new("generate", config);
    let cohort = cohort(config)?;
    let seeds = SeedTree::new(config.seed);
    let draws = seeds.child("generate");
    let p = config.generate.call_prob;
    let policy = |i: usize, month: usize, _: &[CallRecord]| {
        let mut rng = draws.indexed("beneficiary", i as u64).indexed("month", month as u64).rng("call");
        (rng.random::<f64>() < p).then_some(Planned { kind: InterventionKind::Call, day: 0 })
    };
    let horizon = config.scenario.cohort.weeks * 7;
    let outcome = simulate_program(&cohort, horizon, &policy, &config.scenario.program, seeds.seed("program"))?;
    write_logs(out, &provenance, &cohort, &outcome)?;
    println!("generated {} beneficiaries, {} calls over {horizon} days", cohort.len(), outcome.calls().len());
    Ok(())
}

/// Four-arm intervention study on a generated cohort.
pub fn simulate(config: &RunConfig, out: &OutDir) -> Result<()> {
    let provenance = Provenance::new("simulate", config);
    let cohort = cohort(config)?;
    let seeds = SeedTree::new(config.seed);
    let scenario = &config.scenario;
    let arms = assign_arms(&cohort, &scenario.psqis.grouping, seeds.seed("arms"));
    let (result, outcome) = run_psqis(&cohort, &arms, &scenario.program, &scenario.psqis, seeds.seed("program"))?;
    write_logs(out, &provenance, &cohort, &outcome)?;
    let rows = cohort.profiles.iter().zip(&arms).map(|(p, a)| [p.beneficiary_id.to_string(), a.as_str().to_string()]);
    out.write_csv("arms.csv", &provenance, &["beneficiary_id", "arm"], rows)?;
    out.write_json("psqis.json", &provenance, "psqis", &result)?;
    let mut table = String::from("arm      n       high    percent\n");
    for arm in Arm::ALL {
        let r = result.arm(arm);
        table.push_str(&format!("{:<8} {:<7} {:<7} {:.2}\n", arm.as_str(), r.n, r.high, r.percent));
    }
    print!("{table}");
    Ok(())
}

/// Ground truth written by `generate` or `simulate`.
pub fn read_ground_truth(dir: &Path) -> Result<GroundTruth> {
    let path = dir.join(GROUND_TRUTH);
    if !path.exists() {
        return Err(CliError::Data(format!("missing ground truth: {}", path.display())));
    }
    crate::output::read_json(&path, "ground_truth")
}

/// Labelled examples for the configured task. Beneficiaries that cannot
/// yield an example are counted and skipped.
pub fn featurize(config: &RunConfig, input: &Path, out: &OutDir) -> Result<()> {
    let provenance = Provenance::new("featurize", config);
    let data = Dataset::load(input)?;
    let histories = data.histories(config)?;
    let features = &config.features;
    let draws = SeedTree::new(config.seed).child("featurize");
    let mut examples = Vec::new();
    let mut skipped: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, profile) in data.profiles.iter().enumerate() {
        let history = &histories[&profile.beneficiary_id];
        let made = match features.task {
            Task::LongTerm => {
                make_long_term_example(history, profile, &features.long_term).map(|(f, l)| (history.span().start, f, l))
            }
            Task::ShortTerm => {
                let mut rng = draws.indexed("beneficiary", i as u64).rng("anchor");
                sample_anchor(history, &features.short_term, &mut rng).and_then(|anchor| {
                    make_short_term_example(history, profile, anchor, &features.short_term).map(|(f, l)| (anchor, f, l))
                })
            }
        };
        match made {
            Ok((anchor, features, label)) => examples.push(LabeledExample {
                beneficiary_id: profile.beneficiary_id.clone(),
                anchor,
                features,
                label,
            }),
            Err(e) => {
                let reason = match e {
                    CallLogError::Excluded { reason, .. } => match reason {
                        ExclusionReason::InvalidProfile(_) => "invalid profile",
                        ExclusionReason::ShortHistory { .. } => "history too short",
                        ExclusionReason::TooFewConnections { .. } => "too few connections",
                    },
                    CallLogError::SampleUnavailable { .. } => "no feature window",
                    other => return Err(other.into()),
                };
                *skipped.entry(reason).or_default() += 1;
            }
        }
    }
    let positives = examples.iter().filter(|e| e.label.is_positive()).count();
    let dataset = FeatureDataset { task: features.task, examples };
    out.write_json(FEATURES, &provenance, "dataset", &dataset)?;
    println!("{} examples ({positives} positive)", dataset.examples.len());
    for (reason, n) in &skipped {
        println!("skipped {n}: {reason}");
    }
    Ok(())
}
