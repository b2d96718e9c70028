use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn dimshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimshift"))
        .args(args)
        .env_remove("DIMSHIFT_SEED")
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    dimshift(&args)
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn run_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["--agents", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = csv_files(dir.path());
    assert_eq!(files.len(), 25);
    assert!(files.contains_key("curve_wibl_extra_counterfactual.csv"));
    assert!(files.contains_key("summary.csv"));
    assert!(dir.path().join("manifest.json").is_file());
    assert!(dir.path().join("config.toml").is_file());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 42);
    assert_eq!(manifest["n_agents"], 5);
    assert_eq!(manifest["conditions"].as_array().unwrap().len(), 24);
}

#[test]
fn selections_restrict_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(
        dir.path(),
        &["--agents", "4", "--models", "wibl", "--feedback", "immediate"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<_> = csv_files(dir.path()).into_keys().collect();
    assert_eq!(
        files,
        [
            "curve_wibl_extra_immediate.csv",
            "curve_wibl_intra_immediate.csv",
            "summary.csv"
        ]
    );
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(run_into(a.path(), &["--agents", "6"]).status.success());
    assert!(run_into(b.path(), &["--agents", "6"]).status.success());
    assert!(run_into(c.path(), &["--agents", "6", "--seed", "7"]).status.success());
    assert_eq!(csv_files(a.path()), csv_files(b.path()));
    assert_ne!(csv_files(a.path()), csv_files(c.path()));
}

#[test]
fn seed_flag_overrides_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let env_run = Command::new(env!("CARGO_BIN_EXE_dimshift"))
        .args(["run", "--agents", "3", "--out", a.path().to_str().unwrap()])
        .env("DIMSHIFT_SEED", "11")
        .output()
        .unwrap();
    assert!(env_run.status.success());
    let flag_run = Command::new(env!("CARGO_BIN_EXE_dimshift"))
        .args([
            "run",
            "--agents",
            "3",
            "--seed",
            "11",
            "--out",
            b.path().to_str().unwrap(),
        ])
        .env("DIMSHIFT_SEED", "99")
        .output()
        .unwrap();
    assert!(flag_run.status.success());
    assert_eq!(csv_files(a.path()), csv_files(b.path()));
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");

    std::fs::write(&path, "[frl]\nalpha = 1.5\n").unwrap();
    let out = dimshift(&["run", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("frl.alpha"));

    std::fs::write(&path, "[wibl]\nattention_temprature = 3.0\n").unwrap();
    let out = dimshift(&["run", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("attention_temprature"));

    let out = dimshift(&["run", "--models", "frl,qlearn"]);
    assert!(!out.status.success());
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dimshift(&["run", "--print-config", "--agents", "9"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n_agents = 9"));
    let path = dir.path().join("printed.toml");
    std::fs::write(&path, &text).unwrap();
    let again = dimshift(&["run", "--print-config", "--config", path.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn metrics_summarises_a_run() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_into(dir.path(), &["--agents", "5"]).status.success());

    let out = dimshift(&["metrics", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,feedback,jumpstart_intra,jumpstart_extra,jumpstart_difference,\
         pre_asymptote_intra,pre_asymptote_extra,final_asymptote_intra,final_asymptote_extra"
    );
    assert_eq!(lines.count(), 12);

    let out = dimshift(&["metrics", dir.path().to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 12);
    for row in rows {
        let d = row["jumpstart_difference"].as_f64().unwrap();
        let i = row["jumpstart_intra"].as_f64().unwrap();
        let e = row["jumpstart_extra"].as_f64().unwrap();
        assert!((d - (i - e)).abs() < 1e-12);
    }
}

#[test]
fn metrics_rejects_a_missing_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dimshift(&["metrics", dir.path().join("nope").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
