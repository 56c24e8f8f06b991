use std::path::Path;
use std::process::Command;

use alttrip::cli::{parse_alphas, parse_dims};
use alttrip::constraints_file::{load_constraints, parse_constraints};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alttrip"))
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic").join(name)
}

#[test]
fn alpha_grid() {
    assert_eq!(parse_alphas("0.1:0.9:0.2").unwrap(), vec![0.1, 0.3, 0.5, 0.7, 0.9]);
    assert_eq!(parse_alphas("0.5").unwrap(), vec![0.5]);
    assert_eq!(parse_alphas("0.2,0.4").unwrap(), vec![0.2, 0.4]);
    assert!(parse_alphas("0.9:0.1:0.2").is_err());
    assert!(parse_alphas("a:b").is_err());
    assert_eq!(parse_dims("12,24").unwrap(), (12, 24));
    assert!(parse_dims("12").is_err());
}

#[test]
fn constraint_matrices_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cost.csv"), "poi_id,0,1,2\n0,0,1,2\n1,1,0,3\n2,2,3,0\n").unwrap();
    std::fs::write(dir.path().join("travel.csv"), "poi_id,2,1,0\n2,0,5,5\n1,5,0,5\n0,5,5,0\n").unwrap();
    std::fs::write(dir.path().join("hours.csv"), "poi_id,open,close,stay\n0,0,100,10\n1,0,100,10\n2,30,100,10\n").unwrap();
    let json = r#"{"budget": {"limit": 4, "cost_matrix_ref": "cost.csv"}, "must_see": [1],
                   "time": {"start": 0, "limit": 60, "hours_ref": "hours.csv", "travel_matrix_ref": "travel.csv"}}"#;
    std::fs::write(dir.path().join("c.json"), json).unwrap();
    let c = load_constraints(&dir.path().join("c.json"), 3).unwrap();
    let b = c.budget.unwrap();
    assert_eq!(b.cost[1][2], 3.0);
    assert_eq!(c.must_see, vec![1]);
    let t = c.time.unwrap();
    assert_eq!(t.open[2], 30.0);
    assert_eq!(t.travel[2][1], 5.0);

    std::fs::write(dir.path().join("short.csv"), "poi_id,0,1\n0,0,1\n1,1,0\n").unwrap();
    let bad = r#"{"budget": {"limit": 4, "cost_matrix_ref": "short.csv"}}"#;
    assert!(parse_constraints(bad, dir.path(), 3).is_err());
    assert!(parse_constraints(r#"{"budget": {"limit": 4}}"#, dir.path(), 3).is_err());
    assert!(parse_constraints(r#"{"colour": "red"}"#, dir.path(), 3).is_err());
    let inline = r#"{"budget": {"limit": 4, "cost": [[0,1],[1,0]]}}"#;
    assert!(parse_constraints(inline, dir.path(), 2).is_ok());
}

#[test]
fn end_to_end_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let status = bin()
        .args(["ingest", "--name", "synthetic", "--pois"])
        .arg(fixture("pois.csv"))
        .arg("--visits")
        .arg(fixture("visits.csv"))
        .arg("--out")
        .arg(&ds)
        .output()
        .unwrap();
    assert!(status.status.success());
    let counts: serde_json::Value = serde_json::from_slice(&status.stdout).unwrap();
    assert_eq!(counts["n_routes"], 318);

    let emb = ds.join("emb.bin");
    let ok = bin().args(["train-embeddings", "--epochs", "50", "--data"]).arg(&ds).arg("--out").arg(&emb).status().unwrap();
    assert!(ok.success());
    let model = dir.path().join("model.bin");
    let ok = bin()
        .args(["train-itrnet", "--epochs", "2", "--data"])
        .arg(&ds)
        .arg("--emb")
        .arg(&emb)
        .arg("--out")
        .arg(&model)
        .status()
        .unwrap();
    assert!(ok.success());

    let out = bin()
        .args(["recommend", "--s", "0", "--d", "5", "--k", "2", "--L", "4", "--method", "sampler", "--seed", "7", "--bundle"])
        .arg(&model)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["seed"], 7);
    assert_eq!(r["itineraries"].as_array().unwrap().len(), 2);

    let usage = bin().args(["recommend", "--s", "0", "--d", "0", "--bundle"]).arg(&model).status().unwrap();
    assert_eq!(usage.code(), Some(2));
    let usage = bin().args(["recommend", "--no-such-flag"]).status().unwrap();
    assert_eq!(usage.code(), Some(2));
    let data = bin().args(["recommend", "--s", "0", "--d", "1", "--bundle"]).arg(dir.path().join("missing.bin")).status().unwrap();
    assert_eq!(data.code(), Some(3));
    std::fs::write(dir.path().join("junk.bin"), "not a bundle").unwrap();
    let data = bin().args(["recommend", "--s", "0", "--d", "1", "--bundle"]).arg(dir.path().join("junk.bin")).status().unwrap();
    assert_eq!(data.code(), Some(3));

    let report = dir.path().join("report.csv");
    let ok = bin()
        .args(["evaluate", "--k", "2", "--L", "4", "--epochs", "2", "--only-folds", "1", "--bundle-dir"])
        .arg(&ds)
        .arg("--out")
        .arg(&report)
        .status()
        .unwrap();
    assert!(ok.success());
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("fold,s,d,k,L,f1,pairs_f1,diversity,comb_0.1"));
    assert!(dir.path().join("report.json").exists());
}
