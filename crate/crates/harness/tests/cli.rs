use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_steepest"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn tempdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("steepest-cli-{name}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn train_toy_config_writes_csv_and_checkpoint() {
    let dir = tempdir("train");
    let out = run(bin()
        .args(["train", "--config"])
        .arg(configs().join("toy.toml"))
        .arg("--output-dir")
        .arg(&dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("run.csv").exists());
    assert!(dir.join("final.ckpt").exists());
    assert!(dir.join("run.svg").exists());

    let diag = json(&run(bin()
        .arg("diagnose")
        .arg("--checkpoint")
        .arg(dir.join("final.ckpt"))
        .arg("--data")
        .arg(configs().join("toy_points.csv"))));
    assert_eq!(diag["margin"]["separated"], true);
    assert!(diag["kkt"]["eps"].as_f64().unwrap() >= 0.0);
    assert_eq!(diag["kkt"]["lambda"].as_array().unwrap().len(), 4);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempdir("env");
    let out = run(bin()
        .args(["train", "--config"])
        .arg(configs().join("toy.toml"))
        .env("STEEPEST_OUTPUT_DIR", &dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("run.csv").exists());
}

#[test]
fn oracle_on_symmetric_pair() {
    let v = json(&run(bin()
        .args(["oracle", "--norm", "l2", "--data"])
        .arg(configs().join("two_points.csv"))));
    assert_eq!(v["gamma_star"].as_f64().unwrap(), 1.0);
    assert_eq!(v["theta_star"], serde_json::json!([1.0, 0.0]));
}

#[test]
fn missing_config_names_the_path() {
    let missing = tempdir("missing").join("nowhere.toml");
    let out = run(bin().args(["train", "--config"]).arg(&missing));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere.toml"), "{err}");
}

#[test]
fn invalid_config_and_usage_errors_exit_nonzero() {
    let dir = tempdir("invalid");
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, "optimizer = \"newton\"\n").unwrap();
    let out = run(bin().args(["train", "--config"]).arg(&cfg));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("newton"));

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert!(!run(bin().args(["train", "--config"]).arg(&cfg)).status.success());

    let out = run(bin().arg("frobnicate"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(!run(bin().args(["oracle", "--bogus-flag"])).status.success());
}

#[test]
fn generate_data_then_oracle_rejects_high_dimension() {
    let dir = tempdir("gen");
    let csv = dir.join("teacher.csv");
    let out = run(bin()
        .args(["generate-data", "--m", "10", "--out"])
        .arg(&csv));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 11);
    let out = run(bin().args(["oracle", "--norm", "l1", "--data"]).arg(&csv));
    assert!(!out.status.success());

    let bin_path = dir.join("teacher.stpd");
    assert!(run(bin().args(["generate-data", "--m", "10", "--out"]).arg(&bin_path)).status.success());
    assert_eq!(&fs::read(&bin_path).unwrap()[..4], b"STPD");
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = tempdir("sweep");
    let out_csv = dir.join("sweep.csv");
    let out = run(bin()
        .args(["sweep", "--config"])
        .arg(configs().join("toy.toml"))
        .args(["--seeds", "1,2", "--alphas", "0.1", "--optimizers", "gd,sd", "--threads", "2", "--out"])
        .arg(&out_csv));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("gd,0.1,1,"));
    assert!(rows[3].starts_with("sd,0.1,2,"));
}

#[test]
fn in_process_entry_point() {
    assert_eq!(steepest_harness::cli::cli_main(["steepest", "--help"]), 0);
    assert_ne!(steepest_harness::cli::cli_main(["steepest"]), 0);
}
