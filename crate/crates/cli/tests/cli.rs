use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use engage_core::sim::scenarios::Scenario;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_engage");

/// Small, fast configuration shared by the pipeline tests.
const CONFIG: &str = r#"
seed = 11

[scenario.cohort]
n_beneficiaries = 300
weeks = 40

[scenario.evaluation]
k = 10
runs = 2

[train.condip]
epochs = 3

[plan]
k = 5

[plan.cluster]
n_clusters = 3
"#;

fn engage(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = engage(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file below `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

/// Runs the whole pipeline into `root` and returns the stdout of each step.
fn pipeline(root: &Path, config: &Path) -> Vec<String> {
    let c = s(config);
    let d = |name: &str| root.join(name);
    let steps: Vec<Vec<String>> = vec![
        vec!["generate".into()],
        vec!["featurize".into(), "--input".into(), s(&d("generate")).into()],
        vec!["simulate".into(), "--n".into(), "400".into()],
        vec!["evaluate".into(), "--input".into(), s(&d("generate")).into()],
    ];
    let mut stdout = Vec::new();
    for step in steps {
        let out = d(&step[0]);
        let mut args = vec!["--config", c, "--out", s(&out)];
        args.extend(step.iter().map(String::as_str));
        stdout.push(String::from_utf8(ok(&args).stdout).unwrap());
    }
    let features = d("featurize").join("features.json");
    for model in ["rule", "forest", "condip"] {
        let out = d(&format!("train-{model}"));
        let args = ["--config", c, "--out", s(&out), "train", "--features", s(&features), "--model", model];
        stdout.push(String::from_utf8(ok(&args).stdout).unwrap());
    }
    let gen = d("generate");
    for model in ["rule", "forest", "condip"] {
        let m = d(&format!("train-{model}")).join("model.json");
        for cmd in ["predict", "plan"] {
            let out = d(&format!("{cmd}-{model}"));
            let args = ["--config", c, "--out", s(&out), cmd, "--model", s(&m), "--input", s(&gen)];
            stdout.push(String::from_utf8(ok(&args).stdout).unwrap());
        }
    }
    stdout
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn every_subcommand_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out_a = pipeline(&a, &config);
    let out_b = pipeline(&b, &config);
    assert_eq!(out_a, out_b);
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (name, bytes) in &sa {
        assert!(bytes == &sb[name], "{} differs between runs", name.display());
    }
    for cmd in ["generate", "featurize", "simulate", "evaluate", "train-condip", "predict-forest", "plan-rule"] {
        assert!(sa.keys().any(|k| k.starts_with(cmd)), "no output from {cmd}");
    }

    let c = dir.path().join("c");
    ok(&["--config", s(&config), "--seed", "12", "--out", s(&c), "generate"]);
    assert_ne!(std::fs::read(c.join("calls.csv")).unwrap(), sa[Path::new("generate/calls.csv")]);
}

#[test]
fn bad_archetype_weights_exit_with_code_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = Scenario::default();
    scenario.cohort.archetypes[0].weight += 0.2;
    let config = dir.path().join("config.json");
    std::fs::write(&config, serde_json::to_string(&serde_json::json!({ "scenario": scenario })).unwrap()).unwrap();
    let out = engage(&["--config", s(&config), "--out", s(&dir.path().join("o")), "generate"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("scenario.cohort.archetypes.weight"), "{stderr}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_config_field_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[plan]\nbudget = 3\n");
    let out = engage(&["--config", s(&config), "--out", s(&dir.path().join("o")), "generate", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plan.budget"));
}

#[test]
fn missing_output_directory_is_created() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deep").join("er").join("out");
    ok(&["--out", s(&out), "generate", "--n", "20", "--weeks", "8"]);
    for f in ["beneficiaries.csv", "calls.csv", "interventions.csv", "ground_truth.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let calls = std::fs::read_to_string(out.join("calls.csv")).unwrap();
    assert!(calls.starts_with("# tool: engage"));
    assert!(calls.contains("# config_sha256: "));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn rule_metrics_match_a_direct_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{CONFIG}\n[train]\ntest_fraction = 0.0\n"));
    let gen = dir.path().join("gen");
    ok(&["--config", s(&config), "--out", s(&gen), "generate"]);
    ok(&["--config", s(&config), "--out", s(&gen), "featurize", "--input", s(&gen)]);
    ok(&["--config", s(&config), "--out", s(&gen), "train", "--model", "rule"]);

    // At risk iff E2C of the feature window is below 0.5, or nothing connected.
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for ex in json(&gen.join("features.json"))["dataset"]["examples"].as_array().unwrap() {
        let scalar = ex["features"]["scalar_calls"].as_array().unwrap();
        let (conn, eng) = (scalar[1].as_f64().unwrap(), scalar[2].as_f64().unwrap());
        let predicted = conn == 0.0 || eng / conn < 0.5;
        let actual = ex["label"].as_str().unwrap() == "Llte";
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let metrics = &json(&gen.join("metrics.json"))["metrics"];
    assert_eq!(metrics["evaluated_on"], "train");
    let report = &metrics["report"];
    let n = tp + fp + tn + fn_;
    assert_eq!(report["n"].as_u64().unwrap(), n);
    assert_eq!(report["confusion"]["tp"].as_u64().unwrap(), tp);
    assert_eq!(report["confusion"]["fn_"].as_u64().unwrap(), fn_);
    let close = |key: &str, want: f64| {
        let got = report[key].as_f64().unwrap();
        assert!((got - want).abs() < 1e-12, "{key}: {got} vs {want}");
    };
    close("accuracy", (tp + tn) as f64 / n as f64);
    close("precision", tp as f64 / (tp + fp) as f64);
    close("recall", tp as f64 / (tp + fn_) as f64);
}

/// Keeps the CSV rows (and comment lines) whose first column is in `ids`.
fn filter_csv(from: &Path, to: &Path, ids: &[String]) {
    let text = std::fs::read_to_string(from).unwrap();
    let mut kept = String::new();
    let mut header = false;
    for line in text.lines() {
        let keep = if line.starts_with('#') {
            true
        } else if !header {
            header = true;
            true
        } else {
            ids.iter().any(|id| line.split(',').next() == Some(id.as_str()))
        };
        if keep {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    std::fs::write(to, kept).unwrap();
}

fn plan_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn plan_selects_exactly_k_from_the_pool() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let c = s(&config);
    let gen = dir.path().join("gen");
    ok(&["--config", c, "--out", s(&gen), "generate"]);
    ok(&["--config", c, "--out", s(&gen), "featurize", "--input", s(&gen)]);
    ok(&["--config", c, "--out", s(&gen), "train", "--model", "rule"]);
    let model = gen.join("model.json");
    let full = dir.path().join("full");
    ok(&["--config", c, "--out", s(&full), "plan", "--model", s(&model), "--input", s(&gen), "--k", "1000"]);
    let rows = plan_rows(&full.join("plan.csv"));
    assert!(rows.len() >= 10, "pool of {}", rows.len());
    assert!(rows.iter().all(|r| r[8] == "1"));

    let ids: Vec<String> = rows.iter().take(10).map(|r| r[3].clone()).collect();
    let small = dir.path().join("small");
    std::fs::create_dir(&small).unwrap();
    for f in ["beneficiaries.csv", "calls.csv", "interventions.csv"] {
        filter_csv(&gen.join(f), &small.join(f), &ids);
    }
    let out = dir.path().join("plan");
    ok(&["--config", c, "--out", s(&out), "plan", "--model", s(&model), "--input", s(&small), "--k", "3"]);
    let rows = plan_rows(&out.join("plan.csv"));
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().filter(|r| r[8] == "1").count(), 3);
    assert!(rows[..3].iter().all(|r| r[8] == "1"));
    let index: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(index.windows(2).all(|w| w[0] >= w[1]), "{index:?}");
    let ranks: Vec<usize> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(ranks, (1..=10).collect::<Vec<_>>());
}

#[test]
fn evaluate_without_ground_truth_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let gen = dir.path().join("gen");
    ok(&["--config", s(&config), "--out", s(&gen), "generate"]);
    std::fs::remove_file(gen.join("ground_truth.json")).unwrap();
    let out = engage(&["--config", s(&config), "--out", s(&dir.path().join("e")), "evaluate", "--input", s(&gen)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing ground truth"));
}

#[test]
fn a_single_evaluation_run_reports_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let gen = dir.path().join("gen");
    ok(&["--config", s(&config), "--out", s(&gen), "generate"]);
    let e = dir.path().join("e");
    let args = ["--config", s(&config), "--out", s(&e), "evaluate", "--input", s(&gen), "--runs", "1"];
    let args: Vec<&str> = args.into_iter().chain(["--policy", "whittle,random"]).collect();
    ok(&args);
    let eval = &json(&e.join("evaluation.json"))["evaluation"];
    assert_eq!(eval["runs"], 1);
    let policies = eval["policies"].as_array().unwrap();
    assert_eq!(policies.len(), 2);
    for p in policies {
        for key in ["call_std", "control_std", "gap_std"] {
            assert_eq!(p[key].as_f64().unwrap(), 0.0, "{key}");
        }
    }
}

#[test]
fn budget_larger_than_an_arm_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let gen = dir.path().join("gen");
    ok(&["--config", s(&config), "--out", s(&gen), "generate"]);
    let e = dir.path().join("e");
    let out = engage(&["--config", s(&config), "--out", s(&e), "evaluate", "--input", s(&gen), "--k", "1000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replanning_ranks_the_same_pool_at_each_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let c = s(&config);
    let gen = dir.path().join("gen");
    ok(&["--config", c, "--out", s(&gen), "generate"]);
    ok(&["--config", c, "--out", s(&gen), "featurize", "--input", s(&gen)]);
    ok(&["--config", c, "--out", s(&gen), "train", "--model", "rule"]);

    let calls = std::fs::read_to_string(gen.join("calls.csv")).unwrap();
    let mut lines = calls.lines().filter(|l| !l.starts_with('#'));
    let col = lines.next().unwrap().split(',').position(|h| h == "call_date").unwrap();
    let last = lines.map(|l| l.split(',').nth(col).unwrap().parse::<chrono::NaiveDate>().unwrap()).max().unwrap();
    let as_of = last - chrono::Days::new(59);
    let replan =
        CONFIG.replace("[plan]\nk = 5", &format!("[plan]\nk = 5\nas_of = \"{as_of}\"\nreplan_interval_days = 30"));
    let config = write_config(&dir.path().join("replan"), &replan);

    let out = dir.path().join("plan");
    ok(&["--config", s(&config), "--out", s(&out), "plan", "--model", s(&gen.join("model.json")), "--input", s(&gen)]);
    let rows = plan_rows(&out.join("plan.csv"));
    let epochs: Vec<&str> =
        rows.iter().map(|r| r[0].as_str()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    assert_eq!(epochs, ["0", "1", "2"]);
    let pool = rows.iter().filter(|r| r[0] == "0").count();
    for e in &epochs {
        let epoch: Vec<_> = rows.iter().filter(|r| r[0] == *e).collect();
        assert_eq!(epoch.len(), pool);
        assert_eq!(epoch.iter().filter(|r| r[8] == "1").count(), 5.min(pool));
    }
    assert_eq!(rows.iter().find(|r| r[0] == "2").unwrap()[1], (as_of + chrono::Days::new(60)).to_string());

    let zero = CONFIG.replace("[plan]\nk = 5", "[plan]\nk = 5\nreplan_interval_days = 0");
    let config = write_config(&dir.path().join("zero"), &zero);
    let out = engage(&[
        "--config",
        s(&config),
        "--out",
        s(&dir.path().join("z")),
        "plan",
        "--model",
        s(&gen.join("model.json")),
        "--input",
        s(&gen),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plan.replan_interval_days"));
}
