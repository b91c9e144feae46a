use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kstw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstw")).args(args).output().expect("binary runs")
}

fn kstw_in(out: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    kstw(&all)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(|c| c.parse().unwrap()).collect()).collect()
}

#[test]
fn equilibria_strong_chemotaxis() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstw_in(dir.path(), &["equilibria", "--a", "2", "--sigma", "0.5", "--gamma", "1", "--lambda", "1", "--limiter", "linear", "--mu", "1"]);
    assert!(out.status.success());
    let report = json(&dir.path().join("equilibria.json"));
    let eqs = report["equilibria"].as_array().unwrap();
    assert_eq!(eqs.len(), 3);
    let labels: Vec<&str> = eqs.iter().map(|e| e["label"].as_str().unwrap()).collect();
    assert_eq!(&labels[..2], ["Saddle", "Saddle"]);
    assert!(matches!(labels[2], "StableNode" | "StableFocus"));
}

#[test]
fn equilibria_balanced_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstw_in(dir.path(), &["equilibria", "--a", "1", "--sigma", "0.5"]);
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("equilibria.json"))["equilibria"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_flag_names_the_flag() {
    let out = kstw(&["equilibria", "--a", "two", "--sigma", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--a"));
}

#[test]
fn invalid_parameters_are_config_errors() {
    let out = kstw(&["equilibria", "--a", "1", "--sigma", "-0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kstw(&["equilibria", "--sigma", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn portrait_case_b_above_parabola() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstw_in(dir.path(), &["portrait", "--a", "0.5", "--sigma", "1", "--v-grid", "-0.5:1.5:5", "--w-grid", "2,4,8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let index = json(&dir.path().join("index.json"));
    assert_eq!(index["regime"], "B");
    let seeds = index["seeds"].as_array().unwrap();
    assert_eq!(seeds.len(), 15);
    for seed in seeds {
        let data = rows(&dir.path().join(seed["file"].as_str().unwrap()));
        let forward: Vec<&Vec<f64>> = data.iter().filter(|r| r[0] >= 0.0).collect();
        for pair in forward.windows(2) {
            // v turns around on the parabola, so stop at the first sample inside
            let (w, v) = (pair[1][1], pair[1][2]);
            if w < 1.0 - v * v {
                break;
            }
            assert!(v < pair[0][2], "v grows above the parabola at s = {}", pair[1][0]);
        }
    }
}

#[test]
fn portrait_case_d_low_seeds_are_captured() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstw_in(dir.path(), &["portrait", "--a", "2", "--sigma", "0.5", "--v-grid", "-0.5,0,0.5", "--w-grid", "0.05,0.2"]);
    assert!(out.status.success());
    for seed in json(&dir.path().join("index.json"))["seeds"].as_array().unwrap() {
        let kind = seed["summary"]["termination"]["forward"]["kind"].as_str().unwrap();
        assert!(matches!(kind, "Bounded" | "ConvergedToEquilibrium"), "{kind}");
    }
}

#[test]
fn empty_portrait_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstw_in(dir.path(), &["portrait", "--a", "0.5", "--sigma", "1", "--v-grid", "", "--w-grid", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shoot_uses_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstw_in(dir.path(), &["shoot", "--a", "0.5", "--sigma", "1", "--v0", "2"]);
    assert!(out.status.success());
    let r = json(&dir.path().join("shoot.json"));
    assert_eq!(r["method"], "Both");
    let (star, m) = (r["w0_star"].as_f64().unwrap(), r["manifold_w0"].as_f64().unwrap());
    assert!((star - m).abs() <= 1e-6 * star);
}

#[test]
fn shoot_rejects_critical_speed() {
    let out = kstw(&["shoot", "--a", "0.5", "--sigma", "0.5", "--v0", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn profile_above_threshold_is_soliton() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstw_in(dir.path(), &["profile", "--a", "0.5", "--sigma", "1", "--w0", "20", "--v0", "2", "--S0", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(&dir.path().join("profile.json"));
    assert!(meta["w0_star"].as_f64().unwrap() < 20.0);
    assert_eq!((meta["u_type"].as_str(), meta["S_type"].as_str()), (Some("A1"), Some("A1")));
    assert_eq!(meta["endpoint_slopes"]["u_prime_at_s_minus"], "PlusInfinity");

    // the CSV holds exactly the library's samples
    let p = kstw::ModelParams64::linear(0.5, 1.0, 1.0, 1.0).unwrap();
    let prof = kstw::profiles::linear_profile(&p, 20.0, 2.0, 0.0, 2.0).unwrap();
    let data = rows(&dir.path().join("profile.csv"));
    assert_eq!(data.len(), prof.samples.len());
    for (r, x) in data.iter().zip(&prof.samples) {
        assert_eq!(r, &vec![x.s, x.u, x.big_s]);
    }
}

#[test]
fn saturated_profile_needs_branch() {
    let args = ["profile", "--a", "1", "--sigma", "0.5", "--limiter", "relativistic", "--c", "1", "--w0", "5", "--v0", "0.5"];
    assert_eq!(kstw(&args).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let mut with_branch = args.to_vec();
    with_branch.extend(["--branch", "above"]);
    assert!(kstw_in(dir.path(), &with_branch).status.success());
    let meta = json(&dir.path().join("profile.json"));
    assert_eq!(meta["u_type"], "SaturatedFrontConcave");
    assert!(meta["continuation_coefficients"]["left"]["alpha"].is_f64());
}

#[test]
fn sweep_covers_five_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstw_in(dir.path(), &["sweep", "--a-values", "0.5,1,2", "--sigma-factors", "0.5,1.5"]);
    assert!(out.status.success());
    let mut r = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let labels: BTreeSet<String> = r.records().map(|x| x.unwrap()[3].to_string()).collect();
    assert_eq!(labels.into_iter().collect::<Vec<_>>(), ["A", "B", "C", "D", "E"]);
}

#[test]
fn sweep_is_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["sweep", "--a-values", "0.5,2", "--sigma-factors", "1.5", "--samples", "5", "--seed", "11"];
    assert!(kstw_in(d1.path(), &args).status.success());
    assert!(kstw_in(d2.path(), &args).status.success());
    let (a, b) = (std::fs::read(d1.path().join("sweep.csv")).unwrap(), std::fs::read(d2.path().join("sweep.csv")).unwrap());
    assert_eq!(a, b);
    let mut r = csv::Reader::from_path(d1.path().join("sweep.csv")).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        assert_eq!((&rec[9], &rec[10]), ("5", "5"));
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"params": {"a": 2, "sigma": 0.5, "gamma": 1, "lambda": 1}, "shoot": {"v0": 2}}"#).unwrap();
    let out = kstw_in(dir.path(), &["--config", cfg.to_str().unwrap(), "equilibria", "--a", "1"]);
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("equilibria.json"))["params"]["a"], 1.0);
    std::fs::write(&cfg, r#"{"params": {"a": 2, "sigmaa": 0.5}}"#).unwrap();
    assert_eq!(kstw(&["--config", cfg.to_str().unwrap(), "equilibria"]).status.code(), Some(2));
}
