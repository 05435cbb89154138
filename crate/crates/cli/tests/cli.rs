use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bandclt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandclt")).args(args).env_remove("BANDCLT_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn gamma_table() {
    let o = bandclt(&["gamma", "--max-k", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,exact,value");
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[2], "2,3/4,0.75");
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
}

#[test]
fn gamma_with_quadrature_column() {
    let text = stdout(&bandclt(&["gamma", "--max-k", "3", "--quadrature"]));
    let row: Vec<&str> = text.lines().nth(3).unwrap().split(',').collect();
    assert_eq!(row[1], "2/3");
    assert!((row[3].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-10);
}

#[test]
fn usage_errors_exit_one() {
    for args in [&["frobnicate"][..], &["gamma", "--bogus"], &["gamma", "--max-k", "x"], &["simulate", "--n", "10"]] {
        let o = bandclt(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    // Library argument errors are usage errors too.
    let o = bandclt(&["esd", "--n", "10", "--b", "7"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numeric_failures_exit_two() {
    let o = bandclt(&["kernel", "--x", "1", "--y", "1", "--method", "integral"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diagonal"));
}

#[test]
fn variance_sigma_term() {
    let v = json(&bandclt(&["variance", "--phi", "identity", "--kappa4", "0", "--sigma2", "1", "--variant", "printed"]));
    assert!((v["sigma_term"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(v["config"]["phi"], "identity");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_overlay_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"max-k": 3, "quadrature": false}"#).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(stdout(&bandclt(&["gamma", "--config", c])).lines().count(), 4);
    assert_eq!(stdout(&bandclt(&["gamma", "--config", c, "--max-k", "5"])).lines().count(), 6);
    fs::write(&cfg, r#"{"max_k": 3}"#).unwrap();
    let o = bandclt(&["gamma", "--config", c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown config key"));
}

#[test]
fn resolved_config_round_trips_as_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&bandclt(&["kernel", "--x", "0.5", "--y", "-1", "--method", "series"]));
    let cfg = dir.path().join("k.json");
    let mut conf = v["config"].clone();
    conf.as_object_mut().unwrap().retain(|_, v| !v.is_null());
    fs::write(&cfg, conf.to_string()).unwrap();
    let again = json(&bandclt(&["kernel", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["series"], again["series"]);
}

#[test]
fn csv_out_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = bandclt(&["gamma", "--max-k", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), "k,exact,value\n1,1,1\n2,3/4,0.75\n");
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("g.csv.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["max-k"], 2);
}

#[test]
fn dyck_and_clm() {
    assert_eq!(stdout(&bandclt(&["dyck", "--l", "2", "--m", "2"])), "l,m,k,count\n2,2,0,1\n2,2,1,0\n2,2,2,1\n");
    let clm = stdout(&bandclt(&["clm", "--max-deg", "2"]));
    assert!(clm.lines().any(|l| l.starts_with("2,2,5/3,")));
    assert!(clm.lines().any(|l| l == "1,1,3/4,0.75,3,3"));
    assert_eq!(bandclt(&["dyck", "--l", "1", "--m", "2"]).status.code(), Some(1));
}

#[test]
fn innerprod_theory_and_empirical() {
    let v = json(&bandclt(&["innerprod", "--f", "mono:1", "--g", "mono:1"]));
    assert!((v["theoretical"]["value"][0].as_f64().unwrap() - 3.0).abs() < 1e-9);
    let e = json(&bandclt(&[
        "innerprod", "--f", "poly:1", "--g", "poly:1", "--empirical", "--n", "40", "--b", "5", "--reps", "3",
    ]));
    assert_eq!(e["empirical"]["mean"].as_f64().unwrap(), 2.0);
}

#[test]
fn kernel_point_and_grid() {
    let v = json(&bandclt(&["kernel", "--x", "1", "--y", "-1"]));
    let s = v["series"]["value"].as_f64().unwrap();
    let i = v["integral"]["value"].as_f64().unwrap();
    assert!((s - i).abs() < 1e-5);
    let grid = stdout(&bandclt(&["kernel", "--grid", "-1,0,1", "--method", "integral"]));
    assert_eq!(grid.lines().next().unwrap(), "x,y,method,value,error");
    assert_eq!(grid.lines().count(), 1 + 6);
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bandclt(&[
        "simulate", "--n", "120", "--b-exp", "0.8", "--reps", "40", "--phi", "gauss", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    let v = json(&o);
    assert_eq!(v["config"]["seed"], 7);
    let records = fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 40);
    assert!(out.join("summary.json").exists());
    let hist = out.join("h.csv");
    let r = json(&bandclt(&["report", "--dir", out.to_str().unwrap(), "--hist-out", hist.to_str().unwrap()]));
    assert!(r["max_relative_difference_vs_summary"].as_f64().unwrap() <= 1e-9);
    assert!((r["mean"].as_f64().unwrap() - v["mean"].as_f64().unwrap()).abs() <= 1e-9 * v["mean"].as_f64().unwrap().abs());
    assert!(fs::read_to_string(hist).unwrap().starts_with("bin_left,bin_right,count,density\n"));
}

fn simulate_records(dir: &Path, name: &str, workers: &str) -> Vec<u8> {
    let out = dir.join(name);
    let o = Command::new(env!("CARGO_BIN_EXE_bandclt"))
        .args(["simulate", "--n", "80", "--b", "9", "--reps", "30", "--phi", "semicircle16", "--no-timing", "--out"])
        .arg(&out)
        .env("BANDCLT_WORKERS", workers)
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["workers"].as_u64().unwrap().to_string(), workers);
    fs::read(out.join("records.jsonl")).unwrap()
}

#[test]
fn worker_count_from_environment_does_not_change_records() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(simulate_records(dir.path(), "a", "1"), simulate_records(dir.path(), "b", "3"));
}

#[test]
fn esd_small() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("esd.csv");
    let v = json(&bandclt(&["esd", "--n", "300", "--b", "40", "--bins", "20", "--out", csv.to_str().unwrap()]));
    let ks = v["ks"].as_f64().unwrap();
    assert!(ks > 0.0 && ks < 0.1, "{ks}");
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 21);
}

#[test]
fn scan_and_stieltjes() {
    let scan = stdout(&bandclt(&["scan-resolvent", "--n-list", "60", "--b-list", "5,10", "--reps", "5"]));
    assert_eq!(scan.lines().count(), 3);
    assert!(scan.starts_with("n,b,reps,variance,std_error,ratio,ratio_std_error\n"));
    let v = json(&bandclt(&["stieltjes", "--z-re", "1", "--z-im", "1"]));
    assert!(v["values"][0]["residual"].as_f64().unwrap() < 1e-12);
    let c = json(&bandclt(&["stieltjes", "--z-im", "2,10", "--n", "100", "--b", "20", "--reps", "3"]));
    assert_eq!(c["comparisons"].as_array().unwrap().len(), 2);
    assert_eq!(bandclt(&["stieltjes", "--z-re", "1", "--z-im", "0"]).status.code(), Some(1));
}
