use std::fs;
use std::path::{Path, PathBuf};

use steepest_core::models::init_params;
use steepest_core::{Dataset, LossSpec, Matrix};
use steepest_harness::output::{csv_string, svg_string, CSV_HEADER};
use steepest_harness::training::{invariant_violations, load_data};
use steepest_harness::{run_training, train, ConfigFile, HarnessError, RunConfig, RunLog};

fn tempdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("steepest-train-{name}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn four_points(dir: &Path) {
    fs::write(dir.join("points.csv"), "x1,x2,y\n2,1,1\n1,2,1\n-2,-1,-1\n-1,-2,-1\n").unwrap();
}

fn base(dir: &Path) -> ConfigFile {
    four_points(dir);
    ConfigFile {
        model: "two_layer_relu".into(),
        width: 8,
        init_scale: 0.1,
        optimizer: "gd".into(),
        step_size: 0.05,
        data: "file".into(),
        data_path: Some("points.csv".into()),
        epochs: 5000,
        log_every: Some(50),
        seed: 2,
        output_dir: dir.join("out"),
        ..ConfigFile::default()
    }
}

fn run(file: &ConfigFile, dir: &Path) -> steepest_harness::Result<RunLog> {
    let cfg = file.resolve(dir)?;
    let (tr, te) = load_data(&cfg)?;
    let (model, theta) = init_params::<f64>(&cfg.model.spec(tr.dim()), &cfg.init)?;
    train(&cfg, &model, theta, &tr, te.as_ref())
}

#[test]
fn four_point_gd_run_separates() {
    let dir = tempdir("sep");
    let log = run(&base(&dir), &dir).unwrap();
    let last = log.rows.last().unwrap();
    assert_eq!(last.step, 5000);
    assert_eq!(last.train_acc, 1.0);
    assert!(last.t0_flag);
    let t0 = log.t0.unwrap();
    assert!(log.rows.iter().any(|r| r.step == t0 && r.t0_flag));
    assert!(invariant_violations(&log, LossSpec::Exponential).is_empty());
}

#[test]
fn same_config_gives_identical_csv_bytes() {
    let dir = tempdir("repro");
    let file = base(&dir);
    let a = csv_string(&run(&file, &dir).unwrap());
    let b = csv_string(&run(&file, &dir).unwrap());
    assert_eq!(a, b);
    let mut other = file.clone();
    other.seed = 3;
    assert_ne!(a, csv_string(&run(&other, &dir).unwrap()));
}

#[test]
fn huge_step_diverges() {
    let dir = tempdir("diverge");
    let mut file = base(&dir);
    file.step_size = 1e3;
    match run(&file, &dir) {
        Err(HarnessError::Divergence { .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn csv_header_order() {
    let dir = tempdir("header");
    let text = csv_string(&run(&base(&dir), &dir).unwrap());
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("step,log_loss,train_acc,test_acc,q_min,gamma_1,gamma_2,gamma_inf"));
    assert_eq!(header, CSV_HEADER.join(","));
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').count(), CSV_HEADER.len());
    }
}

#[test]
fn svg_is_well_formed_with_one_polyline_per_metric() {
    let dir = tempdir("svg");
    let log = run(&base(&dir), &dir).unwrap();
    let metrics = ["gamma_2", "soft_margin", "train_acc"];
    let (svg, _) = svg_string(&log, &metrics, false, false);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(lines, metrics.len());
    let legend: Vec<&str> = doc
        .descendants()
        .filter(|n| n.has_tag_name("text"))
        .filter_map(|n| n.text())
        .collect();
    for m in metrics {
        assert!(legend.contains(&m));
    }
}

#[test]
fn log_axis_skips_nonpositive_points_with_warning() {
    let dir = tempdir("svglog");
    let log = run(&base(&dir), &dir).unwrap();
    let (svg, warnings) = svg_string(&log, &["q_min"], true, true);
    roxmltree::Document::parse(&svg).unwrap();
    assert!(warnings.iter().any(|w| w.contains("q_min")), "{warnings:?}");
}

#[test]
fn run_training_writes_outputs() {
    let dir = tempdir("outputs");
    let cfg: RunConfig = base(&dir).resolve(&dir).unwrap();
    let out = run_training(&cfg).unwrap();
    assert!(out.csv_path.exists());
    assert!(out.checkpoint_path.exists());
    assert!(out.svg_path.unwrap().exists());
    let ck = steepest_harness::checkpoint::load_checkpoint(&out.checkpoint_path).unwrap();
    assert_eq!(ck.theta, out.log.theta);
}

#[test]
fn switch_fires_at_first_separated_step() {
    let dir = tempdir("switch");
    let mut file = base(&dir);
    file.switch_to = Some("sd".into());
    let log = run(&file, &dir).unwrap();
    let t0 = log.t0.unwrap();
    assert_eq!(log.switched_at, Some(t0));
    for r in &log.rows {
        let expected = if r.step < t0 { "gd" } else { "sd" };
        assert_eq!(r.optimizer, expected, "step {}", r.step);
    }
}

#[test]
fn sign_descent_stops_at_loss_floor_and_repeats_last_row() {
    let dir = tempdir("floor");
    let mut file = base(&dir);
    file.model = "linear".into();
    file.optimizer = "sd".into();
    file.normalized = true;
    file.loss_floor = -20.0;
    let log = run(&file, &dir).unwrap();
    let floored = log.floored_at.unwrap();
    let after: Vec<_> = log.rows.iter().filter(|r| r.step > floored).collect();
    assert!(!after.is_empty());
    assert_eq!(log.rows.last().unwrap().step, 5000);
    for r in after {
        assert_eq!(r.log_loss, after_floor_loss(&log, floored));
    }
}

fn after_floor_loss(log: &RunLog, floored: u64) -> f64 {
    log.rows.iter().find(|r| r.step == floored).unwrap().log_loss
}

#[test]
fn strict_mode_passes_on_clean_run() {
    let dir = tempdir("strict");
    let mut file = base(&dir);
    file.strict = true;
    let cfg = file.resolve(&dir).unwrap();
    run_training(&cfg).unwrap();
}

#[test]
fn frozen_head_shampoo_runs() {
    let dir = tempdir("shampoo");
    let mut file = base(&dir);
    file.freeze_second_layer = true;
    file.optimizer = "shampoo".into();
    file.shampoo_eps_reg = 1e-12;
    file.step_size = 0.01;
    file.epochs = 500;
    file.log_every = Some(10);
    let log = run(&file, &dir).unwrap();
    assert!(log.rows.iter().all(|r| r.log_loss.is_finite()));
}

#[test]
fn test_accuracy_is_logged_when_test_data_given() {
    let dir = tempdir("testacc");
    let mut file = base(&dir);
    fs::write(dir.join("test.csv"), "x1,x2,y\n3,1,1\n-1,-3,-1\n").unwrap();
    file.test_data_path = Some("test.csv".into());
    let log = run(&file, &dir).unwrap();
    assert_eq!(log.rows.last().unwrap().test_acc, Some(1.0));
}

#[test]
fn nonseparable_data_never_sets_t0() {
    let dir = tempdir("nonsep");
    fs::write(dir.join("points.csv"), "x1,x2,y\n1,1,1\n1,1,-1\n").unwrap();
    let mut file = base(&dir);
    file.epochs = 300;
    file.log_every = Some(10);
    let cfg = file.resolve(&dir).unwrap();
    let tr = Dataset::new(Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]), vec![1.0, -1.0], "").unwrap();
    let (model, theta) = init_params::<f64>(&cfg.model.spec(2), &cfg.init).unwrap();
    let log = train(&cfg, &model, theta, &tr, None).unwrap();
    assert!(log.t0.is_none());
    assert!(log.rows.iter().all(|r| !r.t0_flag && r.kkt_eps.is_none()));
}

