use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn tbsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbsim"))
        .args(args)
        .env("TBSIM_OUT", out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_trials_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("bell_test.toml");
    let o = tbsim(&["simulate", "--config", cfg.to_str().unwrap(), "--trials", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_config_and_bad_override_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tbsim(&["simulate", "--config", "/nonexistent.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let cfg = config("bell_test.toml");
    let o = tbsim(&["simulate", "--config", cfg.to_str().unwrap(), "--override", "noise.nothing=1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bell_run_writes_s_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("bell_test.toml");
    let o = tbsim(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "42"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("results.json"));
    let s = &r["chsh"]["s"];
    assert!(s["value"].as_f64().unwrap() > 1.5);
    assert!(s["sigma"].as_f64().unwrap() > 0.0);

    let m = json(&tmp.path().join("manifest.json"));
    assert_eq!(m["seed"], 42);
    let listed: Vec<String> = m["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap().to_string()).collect();
    for entry in fs::read_dir(tmp.path()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name != "manifest.json" {
            assert!(listed.contains(&name), "{name} missing from manifest");
        }
    }
    let text = fs::read(&cfg).unwrap();
    let digest = m["config_sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert_ne!(text.len(), 0);
    assert!(m["assumptions"].as_array().unwrap().iter().any(|a| a.as_str().unwrap().contains("efficiency")));
}

#[test]
fn same_seed_gives_identical_results() {
    let cfg = config("double_cross_correlation.toml");
    let run = || {
        let tmp = tempfile::tempdir().unwrap();
        let o = tbsim(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "7", "--trials", "100000000"], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(tmp.path().join("results.json")).unwrap(), fs::read(tmp.path().join("counts_single.tsv")).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn phase_sweep_gives_two_curves_and_a_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("time_bin_entanglement.toml");
    let o = tbsim(
        &["sweep", "--config", cfg.to_str().unwrap(), "--phi-w", "0,0.25,0.5,0.75,1,1.25,1.5,1.75", "--phi-r", "0,0.5"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curves = tbsim::analysis::parse_sweep(&fs::read_to_string(tmp.path().join("sweep.tsv")).unwrap()).unwrap();
    assert_eq!(curves.len(), 2);
    assert_eq!(curves[0].e.len(), 8);
    assert!(json(&tmp.path().join("fit.json"))["expected_s"].as_f64().unwrap() > 1.0);
}

#[test]
fn empty_sweep_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("time_bin_entanglement.toml");
    let o = tbsim(&["sweep", "--config", cfg.to_str().unwrap(), "--set", "noise.interferometer_visibility", "--values="], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = tbsim(&["sweep", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_check_passes_and_reports_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tbsim(&["oracle-check", "--circuits", "20"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let o = tbsim(&["oracle-check", "--circuits", "20", "--truncation", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("worst case"));
}

#[test]
fn calibrate_writes_settings_and_a_runnable_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("bell_test.toml");
    let o = tbsim(&["calibrate", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cal = json(&tmp.path().join("calibration.json"));
    assert_eq!(cal["settings"].as_array().unwrap().len(), 4);
    let next = tmp.path().join("bell_calibrated.toml");
    let parsed = tbsim::model::load_config(&next, &[]).unwrap();
    assert!(parsed.chsh_settings.is_some());
}

#[test]
fn rate_budget_lists_factors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("bell_test.toml");
    let o = tbsim(&["rate-budget", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success());
    let r = json(&tmp.path().join("rate_budget.json"));
    let per_hour = r["coincidence_per_hour"].as_f64().unwrap();
    assert!((10.0..=90.0).contains(&per_hour), "{per_hour}");
    assert!(r["factors"].as_array().unwrap().len() >= 8);
}
