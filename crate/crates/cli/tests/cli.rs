use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_containsim"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

const CYCLIC: &str = r#"{
  "agents": {
    "followers": [
      {"id": "a", "a": [[0]], "b": [[1]], "c": [[1]]},
      {"id": "b", "a": [[0]], "b": [[1]], "c": [[1]]}
    ],
    "leaders": [{"id": "l", "s": [[0]], "d": [[1]]}]
  },
  "edges": [["l", "a", 1], ["a", "b", 1], ["b", "a", 1]]
}"#;

#[test]
fn run_on_example_contains() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", scenario("example.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&std::fs::read(dir.path().join("summary.json")).unwrap());
    assert_eq!(summary["containment_achieved"], true);
    for f in summary["followers"].as_array().unwrap() {
        assert!(f["terminal_error"].as_f64().unwrap() < 1e-2);
    }
    for name in ["validation.json", "discovery.json", "nli.json", "gains.json", "trace.csv", "plots.gp"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn stage_limit_stops_after_influence_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        scenario("example.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--stage",
        "nli",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("nli.json").exists());
    for name in ["gains.json", "trace.csv", "summary.json"] {
        assert!(!dir.path().join(name).exists(), "{name} written past the stage limit");
    }
}

#[test]
fn seeded_gains_are_reproducible() {
    let path = scenario("example.json");
    let a = run(&["gains", path.to_str().unwrap(), "--seed", "7"]);
    let b = run(&["gains", path.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn given_feedback_gains_are_used() {
    let out = run(&[
        "gains",
        scenario("example.json").to_str().unwrap(),
        "--k1-from-file",
        scenario("example_k1.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    let k2 = &v["followers"][3]["k2"];
    assert_eq!(k2[1][0].as_f64().unwrap().round(), 6.0);
    assert_eq!(k2[2][1].as_f64().unwrap().round(), 4.0);
}

#[test]
fn cyclic_graph_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cyclic.json");
    std::fs::write(&path, CYCLIC).unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(&out.stdout);
    let failed: Vec<u64> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "fail")
        .map(|c| c["assumption"].as_u64().unwrap())
        .collect();
    assert!(failed.contains(&2), "{failed:?}");
    let run_out = run(&["run", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(run_out.status.code(), Some(2));
}

#[test]
fn rank_deficient_output_fails_assumption_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("czero.json");
    std::fs::write(
        &path,
        r#"{"agents": {"followers": [{"id": 1, "a": [[0, 1], [0, 0]], "b": [[0], [1]], "c": [[1, 0], [0, 0]]}],
            "leaders": [{"id": 2, "s": [[0, 1], [-1, 0]], "d": [[1, 0], [0, 1]], "omega0": [1, 0]}]},
            "edges": [[2, 1, 1]]}"#,
    )
    .unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.lines().any(|l| l.starts_with("FAIL") && l.contains("assumption 4") && l.contains("follower 1")));
}

#[test]
fn malformed_file_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"seed\": ,\n}").unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn traces_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let path = scenario("example.json");
    for d in [&a, &b] {
        let out = run(&["run", path.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["trace.csv", "gains.json", "summary.json"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn directory_runs_every_scenario() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    std::fs::copy(scenario("example.json"), src.path().join("one.json")).unwrap();
    std::fs::copy(scenario("example.json"), src.path().join("two.json")).unwrap();
    let r = run(&[
        "run",
        src.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--jobs",
        "2",
        "--stage",
        "gains",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    for stem in ["one", "two"] {
        assert!(out.path().join(stem).join("gains.json").exists());
    }
}
