//! End-to-end checks of the command-line interface.

use std::fs;
use std::process::Command;

use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphbandits"))
}

#[test]
fn generate_spider_web_edge_list() {
    let out = bin()
        .args([
            "generate",
            "--kind",
            "spider-web",
            "--rings",
            "3",
            "--ring-size",
            "5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 25);
    assert!(text.starts_with("1 2\n"));
}

#[test]
fn generate_writes_files_and_line_graphs() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("line.txt");
    let out = bin()
        .args(["generate", "--kind", "line", "--nodes", "4", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&path).unwrap(), "1 2\n2 3\n3 4\n");
}

#[test]
fn generate_rejects_missing_parameters() {
    let out = bin().args(["generate", "--kind", "line"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("--nodes"), "stderr: {err}");
}

#[test]
fn run_subcommand_executes_a_config() {
    let dir = tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    fs::write(
        &config_path,
        r#"
mode = "pac"
seed = 5
repetitions = 2
epsilon = 0.5
delta = 0.2
noise = "preference_sign"
algorithms = ["nne"]

[graph]
kind = "line"
nodes = 2

[rewards]
scheme = "uniform01"
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
    assert!(out_dir.join("manifest.toml").exists());

    // Repetition override trims the row count.
    let out_dir2 = dir.path().join("out2");
    let out = bin()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--repetitions", "1", "--out"])
        .arg(&out_dir2)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = fs::read_to_string(out_dir2.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1);
}

#[test]
fn mode_mismatch_is_an_error() {
    let dir = tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    fs::write(
        &config_path,
        r#"
mode = "pac"
seed = 5
repetitions = 1
epsilon = 0.5
delta = 0.2
noise = "preference_sign"
algorithms = ["nne"]

[graph]
kind = "line"
nodes = 2
"#,
    )
    .unwrap();
    let out = bin()
        .args(["curve", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("does not match"), "stderr: {err}");
}

#[test]
fn missing_config_fails_with_context() {
    let out = bin()
        .args(["run", "--config", "/nonexistent/exp.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("/nonexistent/exp.toml"), "stderr: {err}");
}
