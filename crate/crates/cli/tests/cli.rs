use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn symbreak(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symbreak"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SYMBREAK_OUT")
        .output()
        .expect("run symbreak")
}

fn ok(args: &[&str], out: &Path) {
    let o = symbreak(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = csv_rows(path);
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn detect_separates_anisotropic_clouds() {
    let dir = TempDir::new().unwrap();
    ok(&["detect", "--data", "clouds:aniso=16", "--group", "so3"], dir.path());
    let m = json(&dir.path().join("metric.json"));
    assert!(m["m"].as_f64().unwrap() >= 0.9, "{m}");
    assert_eq!(m["n_train"], 2000);
    assert_eq!(m["n_test"], 2000);
    assert_eq!(m["seed"], 0);
    let (header, rows) = csv_rows(&dir.path().join("curve.csv"));
    assert_eq!(header, ["epoch", "train_loss", "train_acc", "val_acc"]);
    assert!(!rows.is_empty());
    assert_eq!(json(&dir.path().join("config.resolved.json"))["group"], "so3");
}

#[test]
fn detect_isotropic_clouds_near_chance() {
    let dir = TempDir::new().unwrap();
    ok(&["detect", "--data", "clouds:aniso=1", "--group", "so3"], dir.path());
    let m = json(&dir.path().join("metric.json"))["m"].as_f64().unwrap();
    assert!((m - 0.5).abs() < 0.05, "m = {m}");
}

#[test]
fn missing_group_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = symbreak(&["detect", "--data", "clouds:aniso=16"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("group") && err.contains("Usage: symbreak detect"), "{err}");
}

#[test]
fn bad_settings_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"data": "clouds", "group": "so3", "bogus": 1}"#).unwrap();
    let o = symbreak(&["detect", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    for args in [
        &["detect", "--data", "cubes", "--group", "so3"][..],
        &["pvalue", "--data", "clouds", "--group", "so3", "--kernel", "gaussian"],
        &["ridge-sim", "--d0", "0"],
        &["mmd", "--data", "clouds"],
    ] {
        assert_eq!(symbreak(args, &dir.path().join("o")).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = symbreak(
        &["detect", "--data", "clouds:aniso=16", "--group", "so3", "--n-train", "200", "--n-test", "200", "--learning-rate", "1e300"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flags_override_file_over_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"data": "clouds:aniso=4", "group": "so3", "n_train": 300, "n_test": 100, "epochs": 3, "seed": 5}"#)
        .unwrap();
    let out = dir.path().join("run");
    ok(&["detect", "--config", cfg.to_str().unwrap(), "--n-test", "150"], &out);
    let r = json(&out.join("config.resolved.json"));
    assert_eq!(r["n_train"], 300);
    assert_eq!(r["n_test"], 150);
    assert_eq!(r["epochs"], 3);
    assert_eq!(r["seed"], 5);
    assert_eq!(r["batch_size"], 64);
    assert_eq!(r["format_version"], 1);
    let m = json(&out.join("metric.json"));
    assert_eq!((m["n_train"].as_u64(), m["n_test"].as_u64(), m["seed"].as_u64()), (Some(300), Some(150), Some(5)));
}

#[test]
fn output_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_symbreak"))
        .args(["synth", "--data", "orbit:r=4,theta=uniform", "--n", "20"])
        .env("SYMBREAK_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("dataset.csv").exists() && out.join("config.resolved.json").exists());
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let base = ["pvalue", "--data", "clouds:aniso=4", "--group", "so3", "--n-train", "40", "--n-test", "40", "--n1", "30", "--n2", "4"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&[&base[..], &["--workers", "1"]].concat(), &a);
    ok(&[&base[..], &["--workers", "4"]].concat(), &b);
    assert_eq!(fs::read(a.join("histogram.csv")).unwrap(), fs::read(b.join("histogram.csv")).unwrap());
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());

    let c = dir.path().join("c");
    let d = dir.path().join("d");
    let sim = ["ridge-sim", "--n", "20", "--d", "40", "--d0", "20", "--d-c", "10", "--sigma-w", "0.1,0.5", "--trials", "30", "--theory"];
    ok(&[&sim[..], &["--workers", "1"]].concat(), &c);
    ok(&[&sim[..], &["--workers", "3"]].concat(), &d);
    assert_eq!(fs::read(c.join("ridge_sim.csv")).unwrap(), fs::read(d.join("ridge_sim.csv")).unwrap());
}

#[test]
fn pvalue_canonicalized_clouds_fully_separate() {
    let dir = TempDir::new().unwrap();
    ok(&["pvalue", "--data", "clouds:aniso=16", "--group", "so3", "--kernel", "chamfer", "--sigma", "1.0"], dir.path());
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["p"].as_f64().unwrap(), 1.0 / 101.0);
    assert_eq!(s["n1"], 100);
    assert_eq!(s["n2"], 10);
    assert!(s["mean_actual"].as_f64().unwrap() > 0.0);
    let (header, rows) = csv_rows(&dir.path().join("histogram.csv"));
    assert_eq!(header, ["round", "kind", "distance"]);
    assert_eq!(rows.iter().filter(|r| r[1] == "calibration").count(), 100);
    assert_eq!(rows.iter().filter(|r| r[1] == "actual").count(), 10);

    let cls = dir.path().join("cls");
    ok(&["pvalue", "--data", "clouds:aniso=16", "--group", "so3", "--kernel", "classifier", "--n1", "20", "--n2", "3"], &cls);
    let p = json(&cls.join("summary.json"))["p"].as_f64().unwrap();
    assert!(p <= 0.05, "classifier p = {p}");
}

#[test]
fn pvalue_null_rarely_significant() {
    let dir = TempDir::new().unwrap();
    let mut above = 0;
    for seed in 0..20 {
        let out = dir.path().join(seed.to_string());
        let s = seed.to_string();
        ok(&["pvalue", "--data", "clouds:aniso=1", "--group", "so3", "--n-train", "50", "--n-test", "50", "--n1", "50", "--seed", &s], &out);
        if json(&out.join("summary.json"))["p"].as_f64().unwrap() > 0.05 {
            above += 1;
        }
    }
    assert!(above >= 18, "only {above} of 20 null runs had p > 0.05");
}

#[test]
fn pvalue_sweep_written() {
    let dir = TempDir::new().unwrap();
    ok(
        &["pvalue", "--data", "clouds:aniso=16", "--group", "so3", "--n-train", "40", "--n-test", "40", "--n1", "20", "--n2", "4", "--fractions", "0,0.5,1"],
        dir.path(),
    );
    let d = column(&dir.path().join("sweep.csv"), "mean_distance");
    assert_eq!(d.len(), 3);
    assert!(d[0] > d[2]);
    assert!(json(&dir.path().join("summary.json"))["sweep_spearman"].as_f64().is_some());
}

#[test]
fn mmd_outputs() {
    let dir = TempDir::new().unwrap();
    ok(&["mmd", "--data", "clouds:aniso=16", "--group", "so3", "--n", "60"], dir.path());
    let m = json(&dir.path().join("mmd.json"));
    assert!(m["mmd"].as_f64().unwrap() > 0.0);
    assert_eq!(m["kernel"], "chamfer");
    let same = dir.path().join("same");
    ok(&["mmd", "--data", "clouds:aniso=1", "--other", "clouds:aniso=1", "--kernel", "naive", "--sigma", "2", "--n", "60"], &same);
    assert_eq!(json(&same.join("mmd.json"))["sigma"], 2.0);
}

#[test]
fn taskdep_sweep_follows_lift_fraction() {
    let dir = TempDir::new().unwrap();
    ok(&["taskdep"], dir.path());
    let path = dir.path().join("taskdep.csv");
    let (header, rows) = csv_rows(&path);
    assert_eq!(header, ["dataset", "p", "seed", "m1", "m2", "m2_cross_entropy", "tt", "tf", "ft", "ff"]);
    assert_eq!(rows.len(), 5);
    let p = column(&path, "p");
    let m1 = column(&path, "m1");
    assert!(symbreak::stats::spearman(&p, &m1) >= 0.9, "{m1:?}");
    assert!((m1[0] - 0.5).abs() < 0.03, "{m1:?}");
    let ff = column(&path, "ff");
    let tf = column(&path, "tf");
    assert!(ff[4] > tf[4], "FF {} vs TF {}", ff[4], tf[4]);
}

#[test]
fn ridge_checks_within_tolerance() {
    let dir = TempDir::new().unwrap();
    ok(&["ridge-sim", "--check", "thm1,equivalence"], dir.path());
    let errs = column(&dir.path().join("check_thm1.csv"), "rel_error");
    assert_eq!(errs.len(), 3);
    assert!(errs.iter().all(|&e| e < 0.05), "{errs:?}");
    let dev = column(&dir.path().join("check_equivalence.csv"), "max_deviation");
    assert_eq!(dev.len(), 100);
    assert!(dev.iter().all(|&e| e < 1e-8));
}

#[test]
fn ridge_sim_default_sweep_with_theory() {
    let dir = TempDir::new().unwrap();
    let start = std::time::Instant::now();
    ok(&["ridge-sim", "--theory"], dir.path());
    assert!(start.elapsed().as_secs() < 300);
    let path = dir.path().join("ridge_sim.csv");
    let (header, rows) = csv_rows(&path);
    assert_eq!(
        header,
        ["sigma_w", "mode", "mean_risk", "std_risk", "trials", "theory_risk", "theory_bias", "theory_variance", "theory_kappa"]
    );
    assert_eq!(rows.len(), 14);
    assert!(rows.iter().all(|r| r[4] == "200"));
    let mean = column(&path, "mean_risk");
    let theory = column(&path, "theory_risk");
    for (m, t) in mean.iter().zip(&theory) {
        assert!((m - t).abs() / t < 0.1, "{m} vs {t}");
    }
    // Smallest sigma_w: augmentation is worse.
    assert!(mean[1] > mean[0]);
}

#[test]
fn ridge_theory_outputs() {
    let dir = TempDir::new().unwrap();
    ok(&["ridge-theory", "--sigma-w", "0.01,0.1", "--modes", "vanilla,test_symmetrized,augmented"], dir.path());
    let (_, rows) = csv_rows(&dir.path().join("theory.csv"));
    assert_eq!(rows.len(), 6);
    let t3 = json(&dir.path().join("limits.json"));
    let reports = t3["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["augmentation_variance_larger"], true);
}

#[test]
fn synth_round_trips_through_detect() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--data", "swiss:p=1", "--n", "400", "--seed", "3"], &data);
    let file = data.join("dataset.csv");
    assert!(data.join("dataset.json").exists());
    let again = dir.path().join("again");
    ok(&["synth", "--data", "swiss:p=1", "--n", "400", "--seed", "3"], &again);
    assert_eq!(fs::read(&file).unwrap(), fs::read(again.join("dataset.csv")).unwrap());
    let det = dir.path().join("det");
    ok(&["detect", "--data", file.to_str().unwrap(), "--group", "shift", "--n-train", "300", "--epochs", "5"], &det);
    let m = json(&det.join("metric.json"));
    assert_eq!((m["n_train"].as_u64(), m["n_test"].as_u64()), (Some(300), Some(100)));
}
