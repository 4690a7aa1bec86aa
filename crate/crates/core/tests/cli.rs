use std::process::Command;

use bellstrength::cli::{parse_csv, read_output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bellstrength"))
}

#[test]
fn optimize_writes_a_readable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("opt.json");
    let status = bin()
        .args(["optimize", "--d", "3", "--mode", "conjectured", "--format", "json", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let out = read_output(&path).unwrap();
    assert_eq!(out.records.len(), 1);
    let r = &out.records[0];
    assert_eq!((r.d, r.row.as_str(), r.mode.as_str()), (3, "optimal", "conjectured"));
    assert!((r.divergence_bits.unwrap() - 0.0768501).abs() < 1e-6);
    // Only the final file is left behind.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn stdout_csv_round_trips() {
    let out = bin().args(["table1", "--tol", "1e-10"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed = parse_csv(&text).unwrap();
    let rows: Vec<&str> = parsed.records.iter().map(|r| r.row.as_str()).collect();
    assert_eq!(rows, ["maximally_entangled", "max_violation", "optimal"]);
    assert_eq!(parsed.to_csv().unwrap(), text);
    assert!((parsed.records[1].divergence_bits.unwrap() - 0.0719138).abs() < 1e-6);
}

#[test]
fn csv_and_json_files_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sim.csv");
    let json = dir.path().join("sim.json");
    for (path, format) in [(&csv, "csv"), (&json, "json")] {
        let status = bin()
            .args(["simulate", "--trials", "1000,20000", "--seed", "9", "--format", format, "--out"])
            .arg(path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let (a, b) = (read_output(&csv).unwrap(), read_output(&json).unwrap());
    assert_eq!(a.records, b.records);
    assert_eq!((a.config.seed, &a.config.trials), (b.config.seed, &b.config.trials));
}

#[test]
fn exit_codes() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    let bad = bin().args(["optimize", "--d", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let unknown = bin().arg("frobnicate").output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&unknown.stderr).starts_with("error: error"));
}
