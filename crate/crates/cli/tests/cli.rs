use std::path::Path;
use std::process::{Command, Output};

fn pants(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pants")).args(args).env("PANTS_OUT_DIR", out).output().expect("runs")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn same_config_same_report() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--R", "8", "--seed", "4", "steiner", "--perturb", "0.01"];
    assert!(pants(a.path(), &args).status.success());
    assert!(pants(b.path(), &args).status.success());
    let ra = read(a.path().join("steiner/report.json"));
    assert_eq!(ra, read(b.path().join("steiner/report.json")));
    let v: serde_json::Value = serde_json::from_str(&ra).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["outcome"], "pass");
    assert_eq!(v["config"]["R"], 8.0);
    assert!(v.get("timings_ms").is_none());
}

#[test]
fn icecap_is_a_hall_violation() {
    let d = tempfile::tempdir().unwrap();
    let o = pants(d.path(), &["match", "--mode", "icecap", "--imbalance", "3:1"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&read(d.path().join("match/report.json"))).unwrap();
    assert_eq!(v["outcome"], "violation");
    let m: serde_json::Value = serde_json::from_str(&read(d.path().join("match/matching.json"))).unwrap();
    assert!(m["result"]["HallViolation"]["certificate"]["deficiency"].as_u64().unwrap() > 0);
    assert!(read(d.path().join("match/feet.svg")).starts_with("<svg"));

    let o = pants(d.path(), &["match", "--mode", "icecap", "--expect-violation"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(d.path().join("match/report.json"))).unwrap();
    assert_eq!(v["outcome"], "expected-violation");
}

#[test]
fn atlas_round_trip() {
    let d = tempfile::tempdir().unwrap();
    pants(d.path(), &["--xi", "0.5", "match", "--mode", "bands", "--expect-violation"]);
    let atlas = d.path().join("saved.jsonl");
    std::fs::copy(d.path().join("match/atlas.jsonl"), &atlas).unwrap();
    let first = read(d.path().join("match/matching.json"));
    let o = pants(d.path(), &["--xi", "0.5", "match", "--atlas", atlas.to_str().unwrap(), "--expect-violation"]);
    assert!(o.status.success());
    assert_eq!(first, read(d.path().join("match/matching.json")));
}

#[test]
fn empty_inputs_are_errors() {
    let d = tempfile::tempdir().unwrap();
    let empty = d.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    for cmd in ["classify-pants", "assemble"] {
        let o = pants(d.path(), &[cmd, "--corpus", empty.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("no input"));
    }
    let o = pants(d.path(), &["match", "--atlas", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_names_fields() {
    let d = tempfile::tempdir().unwrap();
    let o = pants(d.path(), &["--eps", "0.2", "--n", "9", "steiner"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("n: 9 is outside [2, 8]"), "{err}");
    assert!(err.contains("eps: 0.2 is outside (0, pi/30]"), "{err}");

    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"R": 2.0}"#).unwrap();
    let o = pants(d.path(), &["--config", cfg.to_str().unwrap(), "steiner"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("R: 2 is outside [4, 20]"));
}

#[test]
fn nan_lemma_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = pants(d.path(), &["verify-lemma", "--lemma", "nan", "--cases", "1000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn assembly_and_summary() {
    let d = tempfile::tempdir().unwrap();
    assert!(pants(d.path(), &["assemble", "--pants", "10"]).status.success());
    let v: serde_json::Value = serde_json::from_str(&read(d.path().join("assemble/report.json"))).unwrap();
    assert_eq!(v["data"]["euler"], -20);
    let corpus = d.path().join("assemble/corpus.jsonl");
    let saved = d.path().join("corpus.jsonl");
    std::fs::copy(corpus, &saved).unwrap();
    assert!(pants(d.path(), &["assemble", "--corpus", saved.to_str().unwrap()]).status.success());

    pants(d.path(), &["match", "--mode", "icecap", "--expect-violation"]);
    assert!(pants(d.path(), &["report"]).status.success());
    let s: serde_json::Value = serde_json::from_str(&read(d.path().join("summary.json"))).unwrap();
    assert_eq!(s["reports"].as_array().unwrap().len(), 2);
    assert_eq!(s["outcome"], "pass");
}
