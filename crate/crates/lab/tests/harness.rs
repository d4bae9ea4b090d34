use std::path::{Path, PathBuf};
use std::process::Command;

use antithetic_lab::config::{MethodSpec, Split};
use antithetic_lab::experiments::{validate_budget, validate_splits};
use antithetic_lab::output::sha256_hex;
use antithetic_lab::{run, ExperimentConfig, LabError};
use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/configs").join(format!("{name}.json"))
}

fn fixture_json(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

fn parse(v: &Value) -> Result<ExperimentConfig, LabError> {
    ExperimentConfig::from_json(&v.to_string())
}

fn config_field(err: LabError) -> String {
    match err {
        LabError::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_antithetic-lab"))
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let mut v = fixture_json("correlation");
    v["experiment"]["model"]["schedule"]["stpes"] = json!(10);
    let field = config_field(parse(&v).unwrap_err());
    assert!(field.starts_with("experiment.model.schedule"), "{field}");
}

#[test]
fn version_and_seed_are_checked() {
    let mut v = fixture_json("uq");
    v["version"] = json!(2);
    assert_eq!(config_field(parse(&v).unwrap_err()), "version");

    let mut v = fixture_json("uq");
    v.as_object_mut().unwrap().remove("seed");
    assert!(matches!(parse(&v), Err(LabError::Config { .. })));
}

#[test]
fn budget_rules() {
    let methods = [MethodSpec::Mc, MethodSpec::Amc, MethodSpec::KAntithetic { k: 8 }, MethodSpec::Rqmc { replicates: 25 }];
    validate_budget(3200, &methods).unwrap();
    assert!(validate_budget(3201, &[MethodSpec::Amc]).is_err());
    assert!(validate_budget(3200, &[MethodSpec::KAntithetic { k: 7 }]).is_err());
    // 3200 / 32 = 100 points, not a power of two
    assert!(validate_budget(3200, &[MethodSpec::Rqmc { replicates: 32 }]).is_err());
    assert!(validate_budget(3200, &[MethodSpec::Mc, MethodSpec::Mc]).is_err());

    let ok = [Split { replicates: 25, points: 128 }, Split { replicates: 50, points: 64 }, Split { replicates: 200, points: 16 }];
    validate_splits(3200, &ok).unwrap();
    let err = validate_splits(3200, &[Split { replicates: 1, points: 3200 }]).unwrap_err();
    assert_eq!(config_field(err), "experiment.splits[0].replicates");
    assert!(validate_splits(3200, &[Split { replicates: 32, points: 100 }]).is_err());
    assert!(validate_splits(3200, &[Split { replicates: 20, points: 128 }]).is_err());
}

#[test]
fn numerical_errors_map_to_exit_code_three() {
    let err = LabError::from(antithetic_core::Error::NonFinite { step: 4 });
    assert_eq!(err.exit_code(), 3);
    assert_eq!(LabError::config("seed", "missing").exit_code(), 2);
}

#[test]
fn manifest_is_stable_and_self_describing() {
    let config = ExperimentConfig::load(&fixture("uq")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let a = run(&config, &tmp.path().join("a"), 1).unwrap();
    let b = run(&config, &tmp.path().join("b"), 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.config_sha256, sha256_hex(config.canonical_json().as_bytes()));
    for artifact in &a.artifacts {
        let bytes = std::fs::read(tmp.path().join("a").join(&artifact.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), artifact.sha256, "{}", artifact.path);
    }
    let on_disk = std::fs::read(tmp.path().join("a/manifest.json")).unwrap();
    assert_eq!(on_disk, std::fs::read(tmp.path().join("b/manifest.json")).unwrap());
    let text = String::from_utf8(on_disk).unwrap();
    assert!(!text.contains("thread"));

    let mut reseeded = config.clone();
    reseeded.seed += 1;
    let c = run(&reseeded, &tmp.path().join("c"), 1).unwrap();
    assert_ne!(a.config_sha256, c.config_sha256);
    assert_ne!(a.artifacts, c.artifacts);
}

#[test]
fn equal_budget_accounting() {
    let config = ExperimentConfig::load(&fixture("uq")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let m = run(&config, tmp.path(), 0).unwrap();
    let calls: Vec<usize> = m.sampler_calls.values().copied().collect();
    assert_eq!(calls.len(), 4);
    assert!(calls.iter().all(|&c| c == 64), "{:?}", m.sampler_calls);
    // MC against itself is exactly one
    let table = std::fs::read_to_string(tmp.path().join("tables/uq.csv")).unwrap();
    for line in table.lines().filter(|l| l.contains(",MC,")) {
        assert!(line.ends_with(",1.0"), "{line}");
    }
}

#[test]
fn linear_model_gives_perfect_anticorrelation() {
    let mut v = fixture_json("correlation");
    v["experiment"]["model"]["mixture"] = json!({ "kind": "gaussian", "dim": 48, "mean": 0.2, "variance": 0.5 });
    let tmp = tempfile::tempdir().unwrap();
    let m = run(&parse(&v).unwrap(), tmp.path(), 0).unwrap();
    let pn = m.summary["pn_centralized_mean"].as_f64().unwrap();
    assert!((pn + 1.0).abs() < 1e-6, "{pn}");

    let mut v = fixture_json("uq");
    v["experiment"]["model"]["mixture"] = json!({ "kind": "gaussian", "dim": 48, "mean": 0.2, "variance": 0.5 });
    v["experiment"]["model"]["sampler"] = json!({ "kind": "ddim" });
    v["experiment"]["statistics"] = json!(["mean_pixel"]);
    let m = run(&parse(&v).unwrap(), tmp.path().join("uq").as_path(), 0).unwrap();
    assert_eq!(m.summary["efficiency/mean_pixel/AMC(k=2)"], json!("inf"));
}

#[test]
fn mixture_pairs_beat_independent_pairs() {
    let config = ExperimentConfig::load(&fixture("correlation")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let s = run(&config, tmp.path(), 0).unwrap().summary;
    let get = |k: &str| s[k].as_f64().unwrap();
    let pooled = (get("pn_centralized_se").powi(2) + get("rr_centralized_se").powi(2)).sqrt();
    assert!(get("pn_centralized_mean") < get("rr_centralized_mean") - 5.0 * pooled, "{s}");
    for dir in ["tables", "plotdata"] {
        assert!(tmp.path().join(dir).is_dir());
    }
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let ok = lab().args(["fkg", "--config"]).arg(fixture("fkg")).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(ok.code(), Some(0));
    assert!(out.join("manifest.json").is_file());

    let wrong_kind = lab().args(["uq", "--config"]).arg(fixture("fkg")).arg("--out").arg(tmp.path().join("x")).output().unwrap();
    assert_eq!(wrong_kind.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&wrong_kind.stderr).contains("experiment.kind"));

    let bad = tmp.path().join("bad.json");
    let mut v = fixture_json("fkg");
    v["experiment"]["chains"]["extra"] = json!(1);
    std::fs::write(&bad, v.to_string()).unwrap();
    let unknown = lab().args(["fkg", "--config"]).arg(&bad).arg("--out").arg(tmp.path().join("y")).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("experiment.chains"));

    // output path occupied by a regular file
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let io = lab().args(["fkg", "--config"]).arg(fixture("fkg")).arg("--out").arg(&blocker).output().unwrap().status;
    assert_eq!(io.code(), Some(1));
}

#[test]
fn cli_seed_override_changes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |dir: &str| std::fs::read_to_string(tmp.path().join(dir).join("manifest.json")).unwrap();
    for (dir, seed) in [("a", "7"), ("b", "8")] {
        let s = lab().args(["correlation", "--seed", seed, "--threads", "2", "--config"]).arg(fixture("correlation")).arg("--out").arg(tmp.path().join(dir)).output().unwrap().status;
        assert!(s.success());
    }
    // seed 7 is the file's own seed
    let direct = run(&ExperimentConfig::load(&fixture("correlation")).unwrap(), &tmp.path().join("c"), 1).unwrap();
    assert_eq!(read("a"), read("c"));
    assert_ne!(read("a"), read("b"));
    assert_eq!(serde_json::from_str::<Value>(&read("c")).unwrap()["seed"], json!(direct.seed));
}
