//! `engage`: call-log features, drop-off predictors, and intervention
//! planning from the command line.
//!
//! Exit codes: 0 success, 1 data or I/O error, 2 configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod data;
mod error;
mod model;
mod output;
mod planning;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use engage_core::calllog::Task;
use engage_core::sim::Policy;

use config::{ModelKind, RunConfig};
use error::Result;
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "engage", version, about = "Engagement prediction and intervention planning for voice-call programs")]
struct Cli {
    /// JSON or TOML run configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    ShortTerm,
    LongTerm,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a cohort and simulate its call logs with random call interventions.
    Generate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        weeks: Option<u32>,
    },
    /// Extract labelled feature examples from a dataset directory.
    Featurize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
    },
    /// Train a predictor on featurized examples and report held-out metrics.
    Train {
        /// Defaults to features.json in the output directory.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
    },
    /// Score every beneficiary of a dataset directory.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Rank the predicted-LLTE pool by Whittle index and select the top k.
    Plan {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the four-arm intervention study on a generated cohort.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Compare planning policies on a generated cohort with ground truth.
    Evaluate {
        /// Directory holding beneficiaries.csv and ground_truth.json.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated: whittle, random, myopic-ne-first, no-op.
        #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
        policy: Vec<Policy>,
    },
}

fn parse_policy(s: &str) -> std::result::Result<Policy, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown policy {s:?}"))
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Featurize { .. } => "featurize",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Plan { .. } => "plan",
            Command::Simulate { .. } => "simulate",
            Command::Evaluate { .. } => "evaluate",
        }
    }

    /// Folds command-line overrides into the configuration.
    fn apply(&self, config: &mut RunConfig) {
        match self {
            Command::Generate { n, weeks } => {
                if let Some(n) = n {
                    config.scenario.cohort.n_beneficiaries = *n;
                }
                if let Some(w) = weeks {
                    config.scenario.cohort.weeks = *w;
                }
            }
            Command::Simulate { n: Some(n) } => config.scenario.cohort.n_beneficiaries = *n,
            Command::Featurize { task: Some(t), .. } => {
                config.features.task = match t {
                    TaskArg::ShortTerm => Task::ShortTerm,
                    TaskArg::LongTerm => Task::LongTerm,
                }
            }
            Command::Train { model: Some(m), .. } => config.train.model = *m,
            Command::Plan { k: Some(k), .. } => config.plan.k = *k,
            Command::Evaluate { runs, k, policy, .. } => {
                let eval = &mut config.scenario.evaluation;
                if let Some(r) = runs {
                    eval.runs = *r;
                }
                if let Some(k) = k {
                    eval.k = *k;
                }
                if !policy.is_empty() {
                    eval.policies = policy.clone();
                }
            }
            _ => {}
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    cli.command.apply(&mut config);
    config.validate()?;
    log::info!("{} with config {}", cli.command.name(), config.hash());
    let out = OutDir::create(&cli.out)?;
    match &cli.command {
        Command::Generate { .. } => data::generate(&config, &out),
        Command::Simulate { .. } => data::simulate(&config, &out),
        Command::Featurize { input, .. } => data::featurize(&config, input, &out),
        Command::Train { features, .. } => model::train(&config, features.as_deref(), &out),
        Command::Predict { model, input } => model::predict(&config, model, input, &out),
        Command::Plan { model, input, .. } => planning::plan(&config, model, input, &out),
        Command::Evaluate { input, .. } => planning::evaluate(&config, input, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
