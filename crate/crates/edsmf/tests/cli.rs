//! The `edsmf` binary: exit codes, artifacts, manifest and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().unwrap()
}

/// Small synthetic config writing everything under `dir`.
fn config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"seed = 5
stages = ["synth", "agents", "ingest", "features", "signals", "train", "ensemble", "evaluate", "report"]

[paths]
bars = "{d}/out/data/bars.csv"
universe = "{d}/out/data/universe.csv"
corpus = "{c}"
output = "{d}/out"

[synthetic]
n_stocks = 30
train_steps = 780
valid_steps = 390
test_steps = 390

[data]
lookback = 8
train_steps = 780
valid_steps = 390
test_steps = 390

[model]
hidden = 8

[training]
epochs = 2
{extra}
"#,
        d = dir.display(),
        c = fixtures().join("corpus").display(),
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn edsmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edsmf"))
        .args(args)
        .arg("-q")
        .env_remove("EDSMF_BACKEND_URL")
        .env_remove("EDSMF_MODEL")
        .env_remove("EDSMF_API_KEY")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_writes_a_traceable_manifest_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");

    let first = edsmf(&["--config", cfg]);
    assert!(first.status.success(), "{}", stderr(&first));
    let manifest = json(&out.join("manifest.json"));
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.len() >= 7, "{} artifacts", artifacts.len());
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);

    // every JSON artifact carries the config hash
    let mut json_count = 0;
    for a in artifacts {
        let path = a["path"].as_str().unwrap();
        if path.ends_with(".json") {
            assert_eq!(json(&out.join(path))["config_hash"], hash.as_str(), "{path}");
            json_count += 1;
        }
        if path.starts_with("logs/") {
            assert!(a["sha256"].is_null(), "{path} should be volatile");
        } else {
            assert_eq!(a["sha256"].as_str().unwrap().len(), 64, "{path}");
        }
    }
    assert!(json_count >= 10);
    for must in ["comparison.csv", "plot_data.csv", "summary.md", "checkpoints/model_a.json", "agents/report.md"] {
        assert!(artifacts.iter().any(|a| a["path"] == must), "missing {must}");
    }
    let comparison = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(comparison.lines().next().unwrap(), "model_label,prec_at_10,ic,ric,sr");
    assert_eq!(comparison.lines().count(), 9);

    // the agents stage skipped the article dated after the window
    let transcript = json(&out.join("agents/transcript.json"));
    assert_eq!(transcript["rejected"], serde_json::json!(["004-late"]));
    assert_eq!(transcript["articles"].as_array().unwrap().len(), 3);

    std::fs::remove_dir_all(&out).unwrap();
    let second = edsmf(&["--config", cfg]);
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(json(&out.join("manifest.json")), manifest);

    // a standalone stage rerun on existing artifacts reproduces its outputs
    let report = std::fs::read(out.join("reports/stockmixer_baseline.json")).unwrap();
    let rerun = edsmf(&["--config", cfg, "evaluate"]);
    assert!(rerun.status.success(), "{}", stderr(&rerun));
    assert_eq!(std::fs::read(out.join("reports/stockmixer_baseline.json")).unwrap(), report);

    // a different seed changes the config hash
    let other = edsmf(&["--config", cfg, "--seed", "6", "--stages", "synth"]);
    assert!(other.status.success());
    assert_ne!(json(&out.join("manifest.json"))["config_hash"], hash.as_str());
}

#[test]
fn missing_universe_is_a_config_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let o = edsmf(&["--config", cfg.to_str().unwrap(), "--stages", "ingest,features"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("out/data/") && err.contains(".csv"), "{err}");
}

#[test]
fn missing_config_file_and_bad_overrides_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = edsmf(&["--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.toml"));

    let cfg = config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    for args in [
        vec!["--config", cfg, "--set", "training.epochs"],
        vec!["--config", cfg, "--set", "training.epochz=3"],
        vec!["--config", cfg, "--set", "data.lookback=0"],
        vec!["--config", cfg, "--stages", "ingest,dance"],
        vec!["--config", cfg, "launch"],
    ] {
        let o = edsmf(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn stage_failures_exit_3_with_the_stage_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    // nothing ingested yet
    let o = edsmf(&["--config", cfg, "train"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`train`"), "{}", stderr(&o));

    // malformed bar file: the error names the line
    let data = dir.path().join("out/data");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(data.join("universe.csv"), "stock_id,sector\nAAA,Energy\n").unwrap();
    std::fs::write(
        data.join("bars.csv"),
        "stock_id,timestamp,open,high,low,close,volume\nAAA,2024-11-05T09:30,1,1,1,1,1\nAAA,2024-11-05T09:31,1,1,1,oops,1\n",
    )
    .unwrap();
    let o = edsmf(&["--config", cfg, "ingest"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    // http backend without its environment
    let o = edsmf(&["--config", cfg, "--backend", "http", "agents"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("EDSMF_BACKEND_URL"), "{}", stderr(&o));
}

#[test]
fn custom_template_with_unknown_placeholder_fails_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let templates = dir.path().join("templates");
    std::fs::create_dir_all(&templates).unwrap();
    std::fs::write(templates.join("policy_analyst.txt"), "Role: Policy Analyst\n{news_summary}\nTone: {mood}\n").unwrap();
    let cfg = config(dir.path(), &format!("\n[agents]\ntemplates = \"{}\"\n", templates.display()));
    let o = edsmf(&["--config", cfg.to_str().unwrap(), "agents"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("mood"), "{}", stderr(&o));
}
