use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dispersim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispersim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, json).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const RING3: &str = r#"{"graph": {"kind": "ring", "n": 3}, "protocol": "rooted", "placement": {"root": 1, "k": 3}}"#;

#[test]
fn smoke_run_on_a_triangle() {
    let dir = TempDir::new().unwrap();
    let c = config(&dir, "ring3.json", RING3);
    let out = dir.path().join("out");
    let o = dispersim(&["run", "--config", s(&c), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("dispersed=true"));
    assert!(out.join("trace.jsonl").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["dispersed"], true);
    assert_eq!(summary["alive_count"], 3);
}

#[test]
fn crash_of_a_missing_robot_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let c = config(
        &dir,
        "bad.json",
        r#"{"graph": {"kind": "ring", "n": 3}, "protocol": "rooted", "placement": {"root": 1, "k": 3},
            "faults": {"explicit": [[9, 2]]}}"#,
    );
    let o = dispersim(&["run", "--config", s(&c), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonexistent robot 9"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&dispersim(&["run"])), 2);
    assert_eq!(code(&dispersim(&["verify", "no-such-suite"])), 2);
    assert_eq!(code(&dispersim(&["frobnicate"])), 2);
    let dir = TempDir::new().unwrap();
    let c = config(&dir, "ring3.json", RING3);
    assert_eq!(
        code(&dispersim(&["run", "--config", s(&c), "--jobs", "0"])),
        2
    );
    let junk = config(&dir, "junk.json", "{not json");
    assert_eq!(code(&dispersim(&["run", "--config", s(&junk)])), 2);
    let unknown = config(
        &dir,
        "unknown.json",
        &RING3.replace("}}", "}, \"colour\": 1}"),
    );
    assert_eq!(code(&dispersim(&["run", "--config", s(&unknown)])), 2);
}

#[test]
fn a_run_cut_short_fails_verification() {
    let dir = TempDir::new().unwrap();
    let c = config(
        &dir,
        "short.json",
        &RING3.replace("}}", "}, \"max_rounds\": 1}"),
    );
    let o = dispersim(&["run", "--config", s(&c), "--out", s(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not dispersed"));
}

const CRASHY: &str = r#"{"graph": {"kind": "random_connected", "n": 14, "m": 25, "seed": 2},
    "protocol": "arbitrary",
    "placement": {"clusters": [{"node": 3, "robots": [1, 3, 5, 7]}, {"node": 11, "robots": [2, 4, 6]}]},
    "faults": {"random": {"f": 2}}, "seed": 17}"#;

#[test]
fn replay_reproduces_the_summary() {
    let dir = TempDir::new().unwrap();
    let c = config(&dir, "crashy.json", CRASHY);
    let out = dir.path().join("out");
    assert_eq!(
        code(&dispersim(&["run", "--config", s(&c), "--out", s(&out)])),
        0
    );
    let o = dispersim(&["replay", "--out", s(&out), "--config", s(&c)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let summary = out.join("summary.json");
    let text = fs::read_to_string(&summary).unwrap();
    fs::write(
        &summary,
        text.replace("\"dispersed\": true", "\"dispersed\": false"),
    )
    .unwrap();
    assert_eq!(code(&dispersim(&["replay", "--out", s(&out)])), 1);

    let missing = dir.path().join("nowhere");
    assert_eq!(code(&dispersim(&["replay", "--out", s(&missing)])), 2);
}

#[test]
fn reruns_write_identical_files() {
    let dir = TempDir::new().unwrap();
    let c = config(&dir, "crashy.json", CRASHY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(
            code(&dispersim(&["run", "--config", s(&c), "--out", s(out)])),
            0
        );
    }
    for file in ["trace.jsonl", "summary.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap()
        );
    }
}

#[test]
fn exhaustive_run_writes_a_report() {
    let dir = TempDir::new().unwrap();
    let c = config(
        &dir,
        "ex.json",
        &RING3.replace("}}", "}, \"faults\": {\"exhaustive\": {\"f\": 1}}}"),
    );
    let out = dir.path().join("out");
    let o = dispersim(&["run", "--config", s(&c), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schedules_tested"], 3 * 63);
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
}

fn sweep_rows(dir: &TempDir, json: &str, jobs: &str) -> Vec<csv::StringRecord> {
    let c = config(dir, "sweep.json", json);
    let out = dir.path().join(format!("sweep-{jobs}"));
    let o = dispersim(&["sweep", "--config", s(&c), "--out", s(&out), "--jobs", jobs]);
    assert!(code(&o) <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("results.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "n",
            "m",
            "delta",
            "k",
            "f",
            "l",
            "protocol",
            "rounds",
            "dispersed",
            "max_memory_bits",
            "trace_hash",
            "error"
        ]
    );
    r.records().map(Result::unwrap).collect()
}

#[test]
fn rooted_sweep_stays_within_seven_k_squared() {
    let dir = TempDir::new().unwrap();
    let rows = sweep_rows(
        &dir,
        r#"{"base": {"graph": {"kind": "ring", "n": 16}, "protocol": "rooted", "placement": {"root": 1, "k": 2}},
            "axes": {"k": [2, 4, 8], "f": [0]}}"#,
        "2",
    );
    assert_eq!(rows.len(), 3);
    for r in rows {
        let k: u64 = r[3].parse().unwrap();
        let rounds: u64 = r[7].parse().unwrap();
        assert_eq!(&r[8], "true");
        assert!(rounds <= 7 * k * k, "{rounds} rounds for k={k}");
    }
}

#[test]
fn empty_axis_writes_only_the_header() {
    let dir = TempDir::new().unwrap();
    let rows = sweep_rows(
        &dir,
        r#"{"base": {"graph": {"kind": "ring", "n": 16}, "protocol": "rooted", "placement": {"root": 1, "k": 2}},
            "axes": {"k": []}}"#,
        "1",
    );
    assert!(rows.is_empty());
}

#[test]
fn arbitrary_sweep_over_random_graphs_disperses() {
    let seeds: Vec<String> = (0..20).map(|s| s.to_string()).collect();
    let json = format!(
        r#"{{"base": {{"graph": {{"kind": "random_connected", "n": 16, "m": 30, "seed": 0}}, "protocol": "arbitrary",
              "placement": {{"clusters": [{{"node": 1, "robots": [1, 2, 3, 4, 5, 6, 7, 8]}}]}}}},
             "axes": {{"l": [1, 2, 3], "f": [0, 1], "graph_seeds": [{}]}}}}"#,
        seeds.join(", ")
    );
    let dir = TempDir::new().unwrap();
    let rows = sweep_rows(&dir, &json, "4");
    assert_eq!(rows.len(), 120);
    for r in &rows {
        assert_eq!(&r[8], "true", "{r:?}");
        assert_eq!(&r[11], "", "{r:?}");
    }
    assert_eq!(rows, sweep_rows(&dir, &json, "1"));
}

#[test]
fn verify_determinism_passes_and_writes_a_report() {
    let dir = TempDir::new().unwrap();
    let o = dispersim(&["verify", "determinism", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("determinism: PASS"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("determinism.json")).unwrap())
            .unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 10);
}
