use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn veertrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veertrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn flow_of_t2_writes_one_event_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("events.csv");
    let t2 = fixture("t2.json");
    let run = veertrack(&[
        "flow",
        "--input",
        path_str(&t2),
        "--time",
        "0.5",
        "--csv",
        path_str(&out),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "index",
            "threshold",
            "t",
            "edge",
            "direction",
            "losers",
            "winners"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][1], "23/10");
    assert_eq!(&rows[0][3], "e1");
    assert_eq!(&rows[0][4], "L");
}

#[test]
fn validate_lists_violations_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let doc = std::fs::read_to_string(fixture("t2.json"))
        .unwrap()
        .replacen("\"1\",", "\"2\",", 1);
    std::fs::write(&bad, doc).unwrap();
    let run = veertrack(&["validate", "--input", path_str(&bad)]);
    assert_eq!(run.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("zero-sum at triangle 0"), "{stderr}");
    let report: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["passed"], Value::Bool(false));

    let good = veertrack(&["validate", "--input", path_str(&fixture("t2.json"))]);
    assert!(good.status.success());
}

#[test]
fn syntax_errors_report_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, "{\"mode\": \"exact\",\n  \"edges\": [}").unwrap();
    let run = veertrack(&["validate", "--input", path_str(&bad)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 2"));
}

#[test]
fn degenerate_flow_exits_two() {
    let run = veertrack(&[
        "flow",
        "--input",
        path_str(&fixture("t2.json")),
        "--time",
        "1.5",
    ]);
    assert_eq!(
        run.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
}

#[test]
fn close_gold_converges() {
    let gold = fixture("gold.json");
    let run = veertrack(&[
        "close",
        "--input",
        path_str(&gold),
        "--time",
        "12",
        "--delta",
        "1e-3",
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let doc: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(doc["converged"], Value::Bool(true));
    let period = doc["period"].as_f64().unwrap();
    assert!((period - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-6);
    assert_eq!(doc["periodic_point"]["mode"], "float");
}

#[test]
fn analyze_gold_reports_a_filling_period() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let gold = fixture("gold.json");
    let run = veertrack(&[
        "analyze",
        "--input",
        path_str(&gold),
        "--time",
        "4",
        "--report",
        path_str(&out),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["word"], "LR");
    assert_eq!(doc["report"]["is_pa"], Value::Bool(true));
    let dil = doc["report"]["dilatation"].as_f64().unwrap();
    assert!((dil - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
}

#[test]
fn track_prints_vertex_curves() {
    let run = veertrack(&[
        "track",
        "--input",
        path_str(&fixture("t2.json")),
        "--vertex-curves",
    ]);
    assert!(run.status.success());
    let text = String::from_utf8(run.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["e1,e2,e3", "1,0,1", "1,1,0"]);
}

#[test]
fn delaunay_emits_flips_and_a_valid_document() {
    let dir = tempfile::tempdir().unwrap();
    let flips = dir.path().join("flips.csv");
    let out = dir.path().join("out.json");
    let run = veertrack(&[
        "delaunay",
        "--input",
        path_str(&fixture("genus-two.json")),
        "--emit-flips",
        path_str(&flips),
        "--output",
        path_str(&out),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let mut reader = csv::Reader::from_path(&flips).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["step", "edge", "old_w", "old_h", "new_w", "new_h"]
    );
    assert!(veertrack(&["validate", "--input", path_str(&out)])
        .status
        .success());
}

#[test]
fn contract_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("contraction.csv");
    let run = veertrack(&[
        "contract",
        "--input",
        path_str(&fixture("gold.json")),
        "--times",
        "1,2,3",
        "--trials",
        "3",
        "--csv",
        path_str(&out),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["T", "trial", "d0", "dT", "ratio"]
    );
    assert_eq!(reader.records().count(), 9);
    let summary: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(summary["alpha"].as_f64().unwrap() > 0.0);
}

#[test]
fn report_writes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let run = veertrack(&[
        "report",
        "--input",
        path_str(&fixture("gold.json")),
        "--time",
        "4",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    for f in [
        "validation.json",
        "events.csv",
        "hilbert.csv",
        "contraction.csv",
        "summary.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
