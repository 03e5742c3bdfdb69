use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mfmodel::MfLattice;

fn mfmodel(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfmodel"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("MFMODEL_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data(rel: &str) -> String {
    format!("{}/../../data/{rel}", env!("CARGO_MANIFEST_DIR"))
}

fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn fixtures_print_toy_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfmodel(&["fixtures"], dir.path());
    assert!(o.status.success());
    let s = stdout(&o);
    for v in ["250.43", "122.49", "44.93", "252.52", "125.08", "46.43", "252.65", "122.06", "46.41", "196.73"] {
        assert!(s.contains(v), "{v} missing from\n{s}");
    }
    assert!(dir.path().join("fixtures.json").exists());
}

#[test]
fn price_reproduces_table_and_dumps_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfmodel(&["price", "--case", "1", "--curve", &data("dataset1/curve.csv")], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("246.96"), "{s}");
    assert!(s.contains("228.45"), "{s}");
    let dump = fs::read_to_string(dir.path().join("lattice_case1_mr0.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&dump).unwrap();
    assert_eq!(v["version"], 1);
    let lat = MfLattice::from_json(&dump).unwrap();
    assert_eq!(lat.periods(), 10);
    let records: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("price.json")).unwrap()).unwrap();
    let rows = records.as_array().unwrap();
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0]["grid_params"]["steps_per_dev"], 10);
    let csv = fs::read_to_string(dir.path().join("bermudan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"case": [2], "steps": 6, "devs": 6, "strikes": [0.05], "exercise": "9-10"}"#).unwrap();
    let o = mfmodel(&["price", "--config", cfg.to_str().unwrap(), "--case", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("price.json")).unwrap()).unwrap();
    let last = records.as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["case"], 1);
    assert_eq!(last["grid_params"]["steps_per_dev"], 6);
    assert_eq!(last["exercise"], serde_json::json!([9, 10]));
    fs::write(&cfg, r#"{"stepz": 6}"#).unwrap();
    assert_eq!(mfmodel(&["price", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| mfmodel(args, dir.path()).status.code();
    assert_eq!(code(&["price", "--case", "1", "--exercise", ""]), Some(1));
    assert_eq!(code(&["price", "--case", "9"]), Some(1));
    assert_eq!(code(&["price", "--curve", "/no/such/file.csv"]), Some(1));
    assert_eq!(code(&["price", "--steps", "many"]), Some(1));
    assert_eq!(code(&["hedge", "--strategy", "gamma"]), Some(1));
    assert_eq!(code(&["future-smile", "--case", "1", "--expiry", "4", "--from", "6"]), Some(1));
    assert_eq!(code(&["nonsense"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn numerical_failures_exit_with_two_and_leave_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfmodel(&["price", "--case", "1", "--steps", "1", "--devs", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["command"], "price");
}

#[test]
fn unhedged_run_reports_npv_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfmodel(&["hedge", "--strategy", "unhedged", "--days", "4", "--seed", "5"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ledger = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert_eq!(ledger.lines().next().unwrap(), "date,unhedged_bermudan,unhedged_npv,unhedged_pnl");
    assert_eq!(ledger.lines().count(), 5);
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("hedge_stats.json")).unwrap()).unwrap();
    assert_eq!(stats.as_array().unwrap().len(), 1);
}

#[test]
fn runs_are_byte_for_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        assert!(mfmodel(&["hedge", "--days", "3", "--seed", "11", "--strategy", "all"], dir).status.success());
        assert!(mfmodel(&["price", "--case", "7", "--mr", "0.05", "--steps", "6", "--devs", "6"], dir).status.success());
        assert!(mfmodel(&["calibrate"], dir).status.success());
        assert!(mfmodel(&["smile-dynamics", "--bump", "discount", "--steps", "6"], dir).status.success());
    }
    same_files(a.path(), b.path());
    let c = tempfile::tempdir().unwrap();
    assert!(mfmodel(&["hedge", "--days", "3", "--seed", "12", "--strategy", "all"], c.path()).status.success());
    assert_ne!(fs::read(a.path().join("ledger.csv")).unwrap(), fs::read(c.path().join("ledger.csv")).unwrap());
}

#[test]
fn calibration_summary_orders_families() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfmodel(&["calibrate", "--ratio-cube", &data("dataset2/ratio_cube.csv")], dir.path());
    assert!(o.status.success());
    let summary = fs::read_to_string(dir.path().join("calibration_summary.csv")).unwrap();
    let errs: Vec<f64> = summary.lines().skip(1).take(4).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[0] > w[1]), "{errs:?}");
    let bounded = fs::read_to_string(dir.path().join("calibration_uvdd_bounded.csv")).unwrap();
    for line in bounded.lines().skip(1) {
        let m: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!((0.0..=0.10).contains(&m));
    }
}

#[test]
fn future_smile_sweep_writes_one_file_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfmodel(&["future-smile", "--steps", "4", "--devs", "6"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for mr in ["0", "0.1", "0.3"] {
        assert!(dir.path().join(format!("future_smile_mr{mr}.csv")).exists());
    }
    let summary = fs::read_to_string(dir.path().join("future_smile_summary.csv")).unwrap();
    let avgs: Vec<f64> = summary.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(avgs.windows(2).all(|w| w[1] > w[0]), "{avgs:?}");
}
