use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMOKE: &str = include_str!("../../core/presets/smoke.toml");

fn snsrom(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snsrom"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

/// Smoke configuration shrunk to a few seconds of work.
fn small_config(dir: &Path, steps: usize, scheme: &str) -> String {
    let text = SMOKE
        .replace("size = 100", "size = 40")
        .replace("n_steps = 200", &format!("n_steps = {steps}"))
        .replace(r#"schemes = ["backward_euler", "forward_euler"]"#, &format!("schemes = [\"{scheme}\"]"))
        .replace("n_basis = [10, 15, 20]", "n_basis = [5, 8]")
        .replace("n_s = 10", "n_s = 5")
        .replace("n_z = 40", "n_z = 16");
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn bench_writes_the_tables_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 40, "backward_euler");
    let out = dir.path().join("out");
    let o = snsrom(&["bench", "--config", &config, "--seed", "3"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    let offline = fs::read_to_string(out.join("offline.csv")).unwrap();
    assert_eq!(errors.lines().next(), Some("method,scheme,n_s,n_basis,n_z,relative_error"));
    assert_eq!(
        offline.lines().next(),
        Some("method,n_basis,total_s,fom_s,residual_s,compression_s,sampling_s,compression_count")
    );
    assert_eq!(errors.lines().count(), 1 + 2 + 4 * 2);
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 3"), "{manifest}");
}

#[test]
fn rom_restricts_to_one_method_and_width() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 40, "backward_euler");
    let out = dir.path().join("out");
    let o = snsrom(&["rom", "--config", &config, "--method", "gnat_sns", "--n_basis", "8"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    let rows: Vec<&str> = errors.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("gnat_sns,be,5,8,16,"), "{}", rows[0]);
}

#[test]
fn fom_and_train_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 20, "backward_euler");
    let out = dir.path().join("out");
    assert_eq!(snsrom(&["fom", "--config", &config], &out).status.code(), Some(0));
    let bin = fs::read(out.join("fom_be.bin")).unwrap();
    assert_eq!(&bin[..6], b"SNSROM");
    assert_eq!(snsrom(&["train", "--config", &config], &out).status.code(), Some(0));
    assert!(out.join("basis_be.bin").exists());
    let plan = fs::read_to_string(out.join("plan_be.csv")).unwrap();
    assert_eq!(plan.lines().next(), Some("index"));
    assert!(plan.lines().skip(1).all(|l| l.parse::<usize>().is_ok()));
}

#[test]
fn failed_rows_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // Five explicit steps leave too few snapshots for the requested widths.
    let config = small_config(dir.path(), 5, "forward_euler");
    let out = dir.path().join("out");
    let o = snsrom(&["bench", "--config", &config], &out);
    assert_eq!(o.status.code(), Some(1));
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(errors.lines().skip(1).any(|l| l.ends_with(",NaN")));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(snsrom(&["bench"], &out).status.code(), Some(2));
    assert_eq!(snsrom(&["bench", "--preset", "missing"], &out).status.code(), Some(2));
    assert_eq!(snsrom(&["bench", "--config", "/nonexistent.toml"], &out).status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, SMOKE.replace("n_z = 40", "n_z = 2")).unwrap();
    assert_eq!(snsrom(&["bench", "--config", bad.to_str().unwrap()], &out).status.code(), Some(2));
    fs::write(&bad, "not = [toml").unwrap();
    assert_eq!(snsrom(&["bench", "--config", bad.to_str().unwrap()], &out).status.code(), Some(2));
    assert_eq!(snsrom(&["rom", "--preset", "smoke", "--method", "nope"], &out).status.code(), Some(2));
    assert_eq!(snsrom(&["frobnicate"], &out).status.code(), Some(2));
}
