//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use steepest_core::diagnostics::{kkt_residuals, margin_report, KktOptions};
use steepest_core::oracle::{grid_max_margin, DEFAULT_RESOLUTION};
use steepest_core::{LossSpec, NormSpec, Params};

use crate::checkpoint::load_checkpoint;
use crate::config::{ConfigFile, RunConfig};
use crate::dataset_io::{export_csv, load_any, save_dataset};
use crate::error::{HarnessError, Result};
use crate::sweep::{run_sweep, sweep_csv, RunStatus, SweepSpec};
use crate::teacher::{gen_teacher, sample_dataset, TeacherSpec};
use crate::training::run_training;

#[derive(Debug, Parser)]
#[command(name = "steepest", about = "Steepest descent training and implicit-bias diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a teacher-student dataset.
    GenerateData(GenerateArgs),
    /// Train from a config file; writes run.csv, final.ckpt and run.svg.
    Train(TrainArgs),
    /// Margin and KKT diagnostics of a checkpoint on a dataset, as JSON.
    Diagnose(DiagnoseArgs),
    /// Brute-force max-margin direction of a small linear instance, as JSON.
    Oracle(OracleArgs),
    /// Grid of runs over seeds, initialization scales and optimizers.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output file; `.csv` writes text, anything else the binary format.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    active: usize,
    #[arg(long, default_value_t = 1.0)]
    weight_scale: f64,
    #[arg(long, default_value_t = 0)]
    teacher_seed: u64,
    /// Seed of the input sample.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Fail the run if a logged invariant is violated.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Norm of the algorithm whose geometry is measured.
    #[arg(long, default_value = "l2")]
    norm: String,
    #[arg(long, default_value = "exponential")]
    loss: String,
    #[arg(long, default_value_t = 1e-2)]
    subgradient_tol: f64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    norm: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Base config; its seed, init_scale and optimizer are overridden.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    optimizers: Vec<String>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenerateData(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Oracle(a) => oracle(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let teacher = gen_teacher(&TeacherSpec {
        d: a.d,
        k: a.k,
        active_per_neuron: a.active,
        weight_scale: a.weight_scale,
        seed: a.teacher_seed,
    })?;
    let ds = sample_dataset(&teacher, a.m, a.seed)?;
    if has_csv_extension(&a.out) {
        export_csv(&ds, &a.out)?;
    } else {
        save_dataset(&ds, &a.out)?;
    }
    println!("wrote {} examples of dimension {} to {}", ds.len(), ds.dim(), a.out.display());
    Ok(())
}

/// Write to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn has_csv_extension(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    cfg.strict |= a.strict;
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    let out = run_training(&cfg)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let last = out.log.rows.last();
    println!("csv: {}", out.csv_path.display());
    println!("checkpoint: {}", out.checkpoint_path.display());
    if let Some(p) = &out.svg_path {
        println!("svg: {}", p.display());
    }
    match out.log.t0 {
        Some(t) => println!("separated at step {t}"),
        None => println!("not separated"),
    }
    if let Some(r) = last {
        println!(
            "final step {}: log_loss {:.6e}, train_acc {}, gamma {:.6e}",
            r.step, r.log_loss, r.train_acc, r.gamma_algo
        );
    }
    Ok(())
}

fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

fn blocks_json(p: &Params<f64>) -> Value {
    Value::Array(
        p.blocks()
            .iter()
            .map(|b| json!({ "rows": b.rows(), "cols": b.cols(), "data": b.as_slice() }))
            .collect(),
    )
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let data = load_any(&a.data)?;
    let norm: NormSpec = a.norm.parse()?;
    let loss: LossSpec = a.loss.parse()?;
    let m = margin_report(&ck.model, &ck.theta, &data, loss, &norm)?;
    let margin = json!({
        "q_min": m.q_min,
        "gamma": m.gamma,
        "gamma_1": m.gamma_1,
        "gamma_2": m.gamma_2,
        "gamma_inf": m.gamma_inf,
        "gamma_sigma": m.gamma_sigma,
        "soft_margin": m.soft_margin,
        "norm_algo": m.norm_algo,
        "norm_l1": m.norm_l1,
        "norm_l2": m.norm_l2,
        "norm_linf": m.norm_linf,
        "norm_spectral": m.norm_spectral,
        "log_loss": m.log_loss,
        "alignment": opt_num(m.alignment),
        "separated": m.separated,
    });
    let kkt = if m.q_min > 0.0 {
        let opts = KktOptions {
            subgradient_tol: a.subgradient_tol,
        };
        let k = kkt_residuals(&ck.model, &ck.theta, &data, loss, &norm, None, &opts)?;
        json!({
            "log_lambda": k.log_lambda,
            "lambda": k.lambda.iter().map(|v| opt_num(*v)).collect::<Vec<_>>(),
            "eps": k.eps,
            "eps_fixed": k.eps_fixed,
            "delta": k.delta,
            "bregman_gap": k.bregman_gap,
            "alignment": k.alignment,
            "theta_tilde": blocks_json(&k.theta_tilde),
        })
    } else {
        Value::Null
    };
    let out = json!({
        "checkpoint_step": ck.step,
        "norm": norm.to_string(),
        "loss": loss.to_string(),
        "margin": margin,
        "kkt": kkt,
    });
    emit(&format!("{}\n", serde_json::to_string_pretty(&out).expect("json serializes")));
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let data = load_any(&a.data)?;
    let norm: NormSpec = a.norm.parse()?;
    let r = grid_max_margin(&norm, &data, a.resolution)?;
    let out = json!({
        "norm": norm.to_string(),
        "gamma_star": r.gamma_star,
        "theta_star": r.theta_star.to_flat(),
        "resolution": r.resolution,
    });
    emit(&format!("{}\n", serde_json::to_string_pretty(&out).expect("json serializes")));
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| HarnessError::io(&a.config, e))?;
    let base = ConfigFile::parse(&text)?;
    let spec = SweepSpec {
        base,
        base_dir: a.config.parent().unwrap_or(Path::new(".")).to_path_buf(),
        seeds: a.seeds,
        alphas: a.alphas,
        optimizers: a.optimizers,
        threads: a.threads,
    };
    let records = run_sweep(&spec)?;
    for r in &records {
        match &r.status {
            RunStatus::Ok => {}
            RunStatus::Diverged(why) | RunStatus::Failed(why) => {
                eprintln!("{} alpha={} seed={}: {why}", r.optimizer, r.alpha, r.seed)
            }
        }
    }
    let csv = sweep_csv(&records);
    match &a.out {
        Some(p) => fs::write(p, csv).map_err(|e| HarnessError::io(p, e))?,
        None => emit(&csv),
    }
    Ok(())
}
