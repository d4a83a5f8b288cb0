//! End-to-end runs of the `mfgprice` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mfgprice"));
    cmd.env_remove("MFGPRICE_OUT");
    cmd
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn preset_and_config_file_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("preset"), dir.path().join("config"));
    let out = run(bin()
        .args(["fig1", "--particles", "500", "--threads", "1", "--out"])
        .arg(&a));
    assert!(out.status.success(), "{}", text(&out));
    let out = run(bin()
        .arg("run")
        .arg(config("fig1.toml"))
        .args(["--particles", "500", "--threads", "4", "--out"])
        .arg(&b));
    assert!(out.status.success(), "{}", text(&out));
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    assert_eq!(fa.len(), 15);
    assert!(fa == fb, "artifacts differ");
    assert!(fa.iter().any(|(n, _)| n == "path_alpha_0.25_seed_42.csv"));
}

#[test]
fn riccati_blow_up_exits_with_the_explosion_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .arg("run")
        .arg(config("riccati_blowup.toml"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("explodes at t = 4.5"), "{}", text(&out));
}

#[test]
fn empty_alphas_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(config("fig1.toml"))
        .unwrap()
        .replace("alphas = [0.0, 0.1, 0.25, 0.5]", "alphas = []");
    let path = dir.path().join("empty.toml");
    std::fs::write(&path, src).unwrap();
    let out = run(bin().arg("run").arg(&path));
    assert_eq!(out.status.code(), Some(1));
    assert!(
        text(&out).contains("line 4: alphas must not be empty"),
        "{}",
        text(&out)
    );
}

#[test]
fn bad_overrides_are_validation_errors() {
    let out = run(bin().args(["fig1", "--particles", "1"]));
    assert_eq!(out.status.code(), Some(1));
    let out = run(bin().args(["fig1", "--dt-sde", "-0.1"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(
        text(&out).contains("dt_sde must be positive"),
        "{}",
        text(&out)
    );
    let out = run(bin().args(["fig1", "--no-such-flag"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn environment_sets_the_output_directory_and_the_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from_env");
    let out = run(bin()
        .args(["fig1", "--particles", "100", "--seed", "3"])
        .env("MFGPRICE_OUT", &env_dir));
    assert!(out.status.success(), "{}", text(&out));
    assert!(env_dir.join("path_alpha_0_seed_3.csv").exists());

    let flag_dir = dir.path().join("from_flag");
    let out = run(bin()
        .args(["fig1", "--particles", "100", "--seed", "4", "--out"])
        .arg(&flag_dir)
        .env("MFGPRICE_OUT", &env_dir));
    assert!(out.status.success());
    assert!(flag_dir.join("summary.json").exists());
    assert!(!env_dir.join("path_alpha_0_seed_4.csv").exists());
}

#[test]
fn strict_preset_passes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().args(["fig1", "--strict", "--out"]).arg(dir.path()));
    let log = text(&out);
    assert_eq!(out.status.code(), Some(0), "{log}");
    assert_eq!(log.matches("[PASS]").count(), 10, "{log}");
    assert!(dir.path().join("verification.json").exists());
}

#[test]
fn strict_run_fails_when_a_check_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args([
            "fig1",
            "--strict",
            "--dt-sde",
            "0.05",
            "--particles",
            "1000",
            "--out",
        ])
        .arg(dir.path()));
    let log = text(&out);
    assert_eq!(out.status.code(), Some(3), "{log}");
    assert!(log.contains("[FAIL]  6 path-wise clearing"), "{log}");
}

#[test]
fn verify_reports_without_gating_unless_strict() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .arg("verify")
        .arg(config("fig1.toml"))
        .args(["--dt-sde", "0.05", "--particles", "1000", "--out"])
        .arg(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("verification.json")).unwrap();
    assert_eq!(report.matches("\"outcome\"").count(), 10);
    assert!(!dir.path().join("summary.json").exists());
}
