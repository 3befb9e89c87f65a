//! End-to-end runs of the `davies-lab` binary: golden outputs, exit codes,
//! reproducibility, seeding and the Gibbs-state cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_davies-lab");

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mcmi_ising4")
}

fn run(args: &[&str], config: &Value, out: &Path) -> Output {
    run_env(args, config, out, None)
}

fn run_env(args: &[&str], config: &Value, out: &Path, cache: Option<&Path>) -> Output {
    let cfg_path = out.with_extension("config.json");
    fs::write(&cfg_path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--config").arg(&cfg_path).arg("--out").arg(out);
    cmd.env_remove("DAVIES_LAB_CACHE");
    if let Some(c) = cache {
        cmd.env("DAVIES_LAB_CACHE", c);
    }
    cmd.output().unwrap()
}

fn ising4(h: f64) -> Value {
    json!({
        "schema_version": 1,
        "seed": 11,
        "model": {
            "type": "ising", "D": 1, "L": 2,
            "sites": [[-2], [-1], [0], [1]],
            "couplings": { "J": 1.0, "h": h }
        },
        "betas": [0.3, 0.8],
        "coarse_graining": { "k": 1, "c": 1, "ell": 5, "r": 1, "metric": "chebyshev" },
        "suites": ["mcmi-scan", "ineq", "w1"],
        "ineq": { "samples": 3 },
        "w1": { "samples": 1 }
    })
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

/// Compare two JSON documents, numbers to relative precision `1e-12`.
fn json_close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => close(x.as_f64().unwrap(), y.as_f64().unwrap()),
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| json_close(p, q)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| json_close(v, w)))
        }
        _ => a == b,
    }
}

#[test]
fn golden_mcmi_scan_on_a_four_site_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config: Value = serde_json::from_slice(&fs::read(golden_dir().join("config.json")).unwrap()).unwrap();
    let o = run(&["mcmi-scan"], &config, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let betas: [(&str, f64); 3] = [("0.2", 0.2), ("0.5", 0.5), ("1", 1.0)];
    for (tag, beta) in betas {
        let name = format!("mcmi_beta_{tag}.csv");
        let got = fs::read_to_string(out.join(&name)).unwrap();
        let want = fs::read_to_string(golden_dir().join(&name)).unwrap();
        let mut got_rows = csv::Reader::from_reader(got.as_bytes());
        let mut want_rows = csv::Reader::from_reader(want.as_bytes());
        assert_eq!(got_rows.headers().unwrap(), want_rows.headers().unwrap());
        let got_rows: Vec<csv::StringRecord> = got_rows.records().map(Result::unwrap).collect();
        let want_rows: Vec<csv::StringRecord> = want_rows.records().map(Result::unwrap).collect();
        assert_eq!(got_rows.len(), 3);
        assert_eq!(got_rows.len(), want_rows.len());
        for (g, w) in got_rows.iter().zip(&want_rows) {
            for col in 0..4 {
                assert_eq!(&g[col], &w[col]);
            }
            for col in 4..8 {
                assert!(close(g[col].parse().unwrap(), w[col].parse().unwrap()), "{name} column {col}");
            }
            // Zero-field chain with empty conditioning: ‖𝐇‖ = −log(1 − tanh(β)^dist).
            let dist: i32 = g[3].parse().unwrap();
            let expected = -(1.0 - beta.tanh().powi(dist)).ln();
            let h_norm: f64 = g[4].parse().unwrap();
            assert!((h_norm - expected).abs() < 1e-12, "{name}: {h_norm} vs {expected}");
        }
    }
    let got: Value = serde_json::from_slice(&fs::read(out.join("mcmi_fit.json")).unwrap()).unwrap();
    let want: Value = serde_json::from_slice(&fs::read(golden_dir().join("mcmi_fit.json")).unwrap()).unwrap();
    assert!(json_close(&got, &want));
    let m = manifest(&out);
    assert_eq!(m["exit_code"], 0);
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a[0].as_str().unwrap()).collect();
    assert_eq!(names, ["mcmi_beta_0.2.csv", "mcmi_beta_0.5.csv", "mcmi_beta_1.csv", "mcmi_fit.json"]);
}

#[test]
fn empty_suite_list_writes_only_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut config = ising4(0.0);
    config["suites"] = json!([]);
    let o = run(&["all"], &config, &out);
    assert_eq!(code(&o), 0);
    let entries: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("manifest.json")]);
    assert_eq!(manifest(&out)["suites"], json!([]));
}

#[test]
fn identical_runs_give_byte_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let config = ising4(0.2);
    assert_eq!(code(&run(&["all", "--jobs", "1"], &config, &a)), 0);
    assert_eq!(code(&run(&["all", "--jobs", "4"], &config, &b)), 0);
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert!(fa.len() >= 4);
    assert_eq!(fa, fb);
    assert_eq!(manifest(&a)["config_digest"], manifest(&b)["config_digest"]);
    assert_eq!(manifest(&a)["artifacts"], manifest(&b)["artifacts"]);
}

#[test]
fn seed_override_changes_samples_and_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let config = ising4(0.2);
    assert_eq!(code(&run(&["ineq-check"], &config, &a)), 0);
    assert_eq!(code(&run(&["ineq-check", "--seed-override", "12"], &config, &b)), 0);
    assert_ne!(fs::read(a.join("ineq_verdicts.csv")).unwrap(), fs::read(b.join("ineq_verdicts.csv")).unwrap());
    assert_ne!(manifest(&a)["config_digest"], manifest(&b)["config_digest"]);
    assert_eq!(manifest(&b)["seed"], 12);
}

#[test]
fn schema_violations_exit_with_two_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ising4(0.0);
    config["model"]["couplings"]["J"] = json!("strong");
    let o = run(&["all"], &config, &tmp.path().join("a"));
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("model.couplings.J"), "{err}");

    let mut config = ising4(0.0);
    config["unknown_key"] = json!(1);
    assert_eq!(code(&run(&["all"], &config, &tmp.path().join("b"))), 2);

    let mut config = ising4(0.0);
    config.as_object_mut().unwrap().remove("seed");
    let o = run(&["all"], &config, &tmp.path().join("c"));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let mut config = ising4(0.0);
    config["schema_version"] = json!(2);
    assert_eq!(code(&run(&["all"], &config, &tmp.path().join("d"))), 2);

    let mut config = ising4(0.0);
    config["betas"] = json!([-1.0]);
    assert_eq!(code(&run(&["all"], &config, &tmp.path().join("e"))), 2);
}

#[test]
fn oversized_models_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ising4(0.0);
    config["model"]["L"] = json!(6);
    config["model"]["sites"] = json!((-5..=5).map(|i| vec![i]).collect::<Vec<_>>());
    let o = run(&["mcmi-scan"], &config, &tmp.path().join("a"));
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // The bound calculators need no states and still run.
    config["bounds"] = json!({ "inputs": { "c2": 0.01, "N": 11.0 }, "formulas": ["tc_b2"] });
    assert_eq!(code(&run(&["bounds"], &config, &tmp.path().join("b"))), 0);
}

#[test]
fn corrupted_reference_fails_the_inequality_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = ising4(0.2);
    config["ineq"] = json!({ "samples": 3, "reference": { "kind": "biased-product", "weight": 1e-4 } });
    let out = tmp.path().join("a");
    let o = run(&["ineq-check"], &config, &out);
    assert_eq!(code(&o), 1);
    let m = manifest(&out);
    assert!(m["suites"][0]["failures"].as_u64().unwrap() > 0);
    let csv = fs::read_to_string(out.join("ineq_verdicts.csv")).unwrap();
    assert!(csv.lines().any(|l| l.contains(",weak_at,") && l.contains(",false,")));
    // The same run against the Gibbs state passes.
    config["ineq"] = json!({ "samples": 3 });
    assert_eq!(code(&run(&["ineq-check"], &config, &tmp.path().join("b"))), 0);
}

#[test]
fn gibbs_cache_is_populated_and_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let config = ising4(0.2);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(code(&run_env(&["mcmi-scan"], &config, &a, Some(&cache))), 0);
    let entries = fs::read_dir(&cache).unwrap().count();
    assert_eq!(entries, 2);
    assert_eq!(code(&run_env(&["mcmi-scan"], &config, &b, Some(&cache))), 0);
    assert_eq!(code(&run(&["mcmi-scan"], &config, &c)), 0);
    assert_eq!(csv_files(&a), csv_files(&b));
    assert_eq!(csv_files(&a), csv_files(&c));
}

#[test]
fn bounds_subcommand_emits_every_formula() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let mut config = ising4(0.0);
    config["bounds"] = json!({
        "inputs": {
            "K": 1.0, "xi": 0.8, "g": 3.0, "J": 1.0, "beta": 0.02, "D": 1.0, "N": 100.0, "eps": 0.01,
            "chi0_min": 0.6, "C": 0.3, "mu": 1.0, "d": 2.0, "r": 1.0, "c": 2.0, "L": 50.0,
            "n_cover": 3.0, "max_closure": 5.0, "c2": 0.001, "area": 3.0, "area_closure": 5.0
        },
        "polylog_max_exponent": 4
    });
    assert_eq!(code(&run(&["bounds"], &config, &out)), 0);
    let csv = fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert_eq!(fs::read_to_string(out.join("polylog.csv")).unwrap().lines().count(), 4);
    // A formula whose input is missing is a configuration error.
    config["bounds"]["inputs"].as_object_mut().unwrap().remove("xi");
    let o = run(&["bounds"], &config, &tmp.path().join("b"));
    assert_eq!(code(&o), 2);
}

#[test]
fn coarse_grain_subcommand_reports_the_construction() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let config = ising4(0.0);
    let o = run(&["coarse-grain"], &config, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&fs::read(out.join("coarse_grain_report.json")).unwrap()).unwrap();
    assert_eq!(report["violations"], json!([]));
    let roles = fs::read_to_string(out.join("coarse_grain_roles.csv")).unwrap();
    assert!(roles.lines().count() > 4);
}
