//! Full-batch training loop with per-step diagnostics.

use std::fs;

use steepest_core::diagnostics::{kkt_residuals_from, margin_report_from, KktOptions};
use steepest_core::losses::loss_subgradient;
use steepest_core::models::init_params;
use steepest_core::{Dataset, Error, LossSpec, Model, NormSpec, Optimizer, OptimizerKind, Params};

use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::config::{DataSource, RunConfig};
use crate::dataset_io::load_any;
use crate::error::{HarnessError, Result};
use crate::idx::load_idx;
use crate::output::{emit_csv, emit_svg};
use crate::teacher::{gen_teacher, sample_dataset};

/// One logged step.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub step: u64,
    pub log_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub q_min: f64,
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub gamma_inf: f64,
    pub gamma_sigma: Option<f64>,
    /// Soft margin in the geometry of the rule in force.
    pub soft_margin: f64,
    pub alignment: Option<f64>,
    pub kkt_eps: Option<f64>,
    pub kkt_delta: Option<f64>,
    pub bregman_gap: Option<f64>,
    pub bregman_bound: Option<f64>,
    pub norm_l1: f64,
    pub norm_l2: f64,
    pub norm_linf: f64,
    pub norm_spec: f64,
    pub t0_flag: bool,
    /// Hard margin in the geometry of the rule in force.
    pub gamma_algo: f64,
    pub norm_algo: f64,
    pub kkt_eps_fixed: Option<f64>,
    pub delta_bound: Option<f64>,
    pub optimizer: String,
}

impl Row {
    /// Numeric column by CSV name.
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "step" => self.step as f64,
            "log_loss" => self.log_loss,
            "train_acc" => self.train_acc,
            "test_acc" => self.test_acc?,
            "q_min" => self.q_min,
            "gamma_1" => self.gamma_1,
            "gamma_2" => self.gamma_2,
            "gamma_inf" => self.gamma_inf,
            "gamma_sigma" => self.gamma_sigma?,
            "soft_margin" => self.soft_margin,
            "alignment" => self.alignment?,
            "kkt_eps" => self.kkt_eps?,
            "kkt_delta" => self.kkt_delta?,
            "bregman_gap" => self.bregman_gap?,
            "bregman_bound" => self.bregman_bound?,
            "norm_l1" => self.norm_l1,
            "norm_l2" => self.norm_l2,
            "norm_linf" => self.norm_linf,
            "norm_spec" => self.norm_spec,
            "t0_flag" => f64::from(u8::from(self.t0_flag)),
            "gamma_algo" => self.gamma_algo,
            "norm_algo" => self.norm_algo,
            "kkt_eps_fixed" => self.kkt_eps_fixed?,
            "delta_bound" => self.delta_bound?,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub rows: Vec<Row>,
    /// First separated step.
    pub t0: Option<u64>,
    pub soft_margin_t0: Option<f64>,
    /// Step at which a switch rule fired.
    pub switched_at: Option<u64>,
    /// Step from which the loss floor stopped the updates.
    pub floored_at: Option<u64>,
    pub model: Model<f64>,
    pub theta: Params<f64>,
    pub num_examples: usize,
    pub step_size: f64,
}

/// Fraction of examples with `y f(x) > 0`; exact zeros count as errors.
pub fn evaluate_accuracy(model: &Model<f64>, theta: &Params<f64>, data: &Dataset<f64>) -> Result<f64> {
    let q = model.output_margins(theta, data)?;
    Ok(q.iter().filter(|&&v| v > 0.0).count() as f64 / q.len() as f64)
}

/// Training and optional test data for a config.
pub fn load_data(config: &RunConfig) -> Result<(Dataset<f64>, Option<Dataset<f64>>)> {
    match &config.data {
        DataSource::Teacher {
            teacher,
            train_size,
            test_size,
            train_seed,
            test_seed,
        } => {
            let t = gen_teacher(teacher)?;
            let train = sample_dataset(&t, *train_size, *train_seed)?;
            let test = if *test_size > 0 {
                Some(sample_dataset(&t, *test_size, *test_seed)?)
            } else {
                None
            };
            Ok((train, test))
        }
        DataSource::File { train, test } => {
            let tr = load_any(train)?;
            let te = test.as_deref().map(load_any).transpose()?;
            Ok((tr, te))
        }
        DataSource::Idx {
            images,
            labels,
            test,
            digit_a,
            digit_b,
            train_size,
            test_size,
        } => {
            let tr = load_idx(images, labels, *digit_a, *digit_b, *train_size)?;
            let te = test
                .as_ref()
                .map(|(i, l)| load_idx(i, l, *digit_a, *digit_b, *test_size))
                .transpose()?;
            Ok((tr, te))
        }
    }
}

fn algo_norm(kind: &OptimizerKind) -> NormSpec {
    kind.geometry().unwrap_or(NormSpec::L2)
}

fn diverged(step: u64, reason: impl Into<String>) -> HarnessError {
    HarnessError::Divergence {
        step,
        reason: reason.into(),
    }
}

/// Train from `theta` on `train` and return the log; writes nothing.
pub fn train(
    config: &RunConfig,
    model: &Model<f64>,
    theta: Params<f64>,
    train: &Dataset<f64>,
    test: Option<&Dataset<f64>>,
) -> Result<RunLog> {
    let mut opt = Optimizer::new(config.optimizer.clone())?;
    let want_sigma = config.diagnostics_norms.contains(&NormSpec::SpectralPerBlock);
    let kkt_opts = KktOptions {
        subgradient_tol: config.kkt_subgradient_tol,
    };
    let mut theta = theta;
    let mut log = RunLog {
        rows: Vec::new(),
        t0: None,
        soft_margin_t0: None,
        switched_at: None,
        floored_at: None,
        model: model.clone(),
        theta: theta.clone(),
        num_examples: train.len(),
        step_size: config.optimizer.step_size,
    };

    let mut step = 0u64;
    loop {
        let grad = loss_subgradient(config.loss, model, &theta, train)?;
        if !grad.log_loss.is_finite() || !grad.scaled.is_finite() {
            return Err(diverged(step, format!("log-loss {}", grad.log_loss)));
        }
        let separated = config.loss.is_separated(grad.log_loss);
        let first_separated = separated && log.t0.is_none();
        if first_separated {
            log.t0 = Some(step);
            if opt.observe_separation(true) {
                log.switched_at = Some(step);
            }
        }
        let floored = grad.log_loss < config.loss_floor;
        if floored && log.floored_at.is_none() {
            log.floored_at = Some(step);
        }

        if step.is_multiple_of(config.log_every) || step == config.epochs || first_separated || floored {
            let norm = algo_norm(opt.kind());
            let mr = margin_report_from(model, &theta, &grad, config.loss, &norm)?;
            if first_separated {
                log.soft_margin_t0 = Some(mr.soft_margin);
            }
            let kkt = if log.t0.is_some() && mr.q_min > 0.0 {
                match kkt_residuals_from(model, &theta, train, &grad, &norm, log.soft_margin_t0, &kkt_opts) {
                    Ok(r) => Some(r),
                    Err(Error::ZeroVector(_)) | Err(Error::NotSeparated { .. }) => None,
                    Err(e) => return Err(e.into()),
                }
            } else {
                None
            };
            log.rows.push(Row {
                step,
                log_loss: mr.log_loss,
                train_acc: accuracy_from_margins(&grad.margins),
                test_acc: test.map(|t| evaluate_accuracy(model, &theta, t)).transpose()?,
                q_min: mr.q_min,
                gamma_1: mr.gamma_1,
                gamma_2: mr.gamma_2,
                gamma_inf: mr.gamma_inf,
                gamma_sigma: want_sigma.then_some(mr.gamma_sigma),
                soft_margin: mr.soft_margin,
                alignment: mr.alignment,
                kkt_eps: kkt.as_ref().map(|k| k.eps),
                kkt_delta: kkt.as_ref().map(|k| k.delta),
                bregman_gap: kkt.as_ref().map(|k| k.bregman_gap),
                bregman_bound: kkt.as_ref().and_then(|k| k.bregman_bound),
                norm_l1: mr.norm_l1,
                norm_l2: mr.norm_l2,
                norm_linf: mr.norm_linf,
                norm_spec: mr.norm_spectral,
                t0_flag: log.t0.is_some(),
                gamma_algo: mr.gamma,
                norm_algo: mr.norm_algo,
                kkt_eps_fixed: kkt.as_ref().map(|k| k.eps_fixed),
                delta_bound: kkt.as_ref().and_then(|k| k.delta_bound),
                optimizer: opt.kind().to_string(),
            });
        }
        if step == config.epochs {
            break;
        }
        if floored {
            // θ no longer changes: repeat the last row on the remaining logged steps.
            let last = log.rows.last().cloned().expect("a row was just logged");
            let mut s = step + 1;
            while s <= config.epochs {
                if s.is_multiple_of(config.log_every) || s == config.epochs {
                    log.rows.push(Row { step: s, ..last.clone() });
                }
                s += 1;
            }
            break;
        }
        theta = match opt.step(&theta, &grad.scaled, grad.log_scale) {
            Ok(t) => t,
            Err(Error::StepOverflow) | Err(Error::NonFinite(_)) => {
                return Err(diverged(step, "parameters overflowed"))
            }
            Err(e) => return Err(e.into()),
        };
        step += 1;
    }
    log.theta = theta;
    Ok(log)
}

fn accuracy_from_margins(q: &[f64]) -> f64 {
    q.iter().filter(|&&v| v > 0.0).count() as f64 / q.len() as f64
}

/// Checks of the logged invariants: the soft/hard margin sandwich (exponential
/// loss), the stationarity-gap bounds, and strictly decreasing loss after
/// separation (until the loss floor freezes the parameters).
pub fn invariant_violations(log: &RunLog, loss: LossSpec) -> Vec<String> {
    let mut out = Vec::new();
    let m = log.num_examples as f64;
    let l = log.model.degree() as i32;
    let mut prev: Option<&Row> = None;
    for row in log.rows.iter().filter(|r| r.t0_flag) {
        if loss == LossSpec::Exponential {
            let lower = row.gamma_algo - m.ln() / row.norm_algo.powi(l);
            let tol = 1e-10 * row.gamma_algo.abs().max(1.0);
            if row.soft_margin < lower - tol || row.soft_margin > row.gamma_algo + tol {
                out.push(format!(
                    "step {}: soft margin {} outside [{lower}, {}]",
                    row.step, row.soft_margin, row.gamma_algo
                ));
            }
        }
        if let (Some(d), Some(b)) = (row.bregman_gap, row.bregman_bound) {
            if d > b + 1e-8 {
                out.push(format!("step {}: stationarity gap {d} above bound {b}", row.step));
            }
        }
        if let (Some(d), Some(b)) = (row.kkt_delta, row.delta_bound) {
            if d > b + 1e-8 {
                out.push(format!("step {}: complementarity {d} above bound {b}", row.step));
            }
        }
        if let Some(p) = prev {
            let frozen = log.floored_at.is_some_and(|f| p.step >= f);
            if !frozen && row.log_loss >= p.log_loss {
                out.push(format!(
                    "step {}: log-loss {} did not decrease from {}",
                    row.step, row.log_loss, p.log_loss
                ));
            }
        }
        prev = Some(row);
    }
    out
}

/// What [`run_training`] produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub log: RunLog,
    pub csv_path: std::path::PathBuf,
    pub checkpoint_path: std::path::PathBuf,
    pub svg_path: Option<std::path::PathBuf>,
    pub warnings: Vec<String>,
}

/// Load data, initialize, train, and write `run.csv`, `final.ckpt` and
/// optionally `run.svg` into the output directory. In strict mode any
/// invariant violation fails the run after the outputs are written.
pub fn run_training(config: &RunConfig) -> Result<RunOutcome> {
    let (train_set, test_set) = load_data(config)?;
    let spec = config.model.spec(train_set.dim());
    let (model, theta) = init_params::<f64>(&spec, &config.init)?;
    let log = train(config, &model, theta, &train_set, test_set.as_ref())?;

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let csv_path = dir.join("run.csv");
    emit_csv(&log, &csv_path)?;
    let checkpoint_path = dir.join("final.ckpt");
    save_checkpoint(
        &checkpoint_path,
        &Checkpoint {
            model: log.model.clone(),
            theta: log.theta.clone(),
            step: log.rows.last().map_or(0, |r| r.step),
        },
    )?;
    let mut warnings = Vec::new();
    let svg_path = match &config.svg {
        Some(opts) => {
            let p = dir.join("run.svg");
            let metrics: Vec<&str> = opts.metrics.iter().map(String::as_str).collect();
            warnings.extend(emit_svg(&log, &metrics, opts.log_x, opts.log_y, &p)?);
            Some(p)
        }
        None => None,
    };
    if config.strict {
        let v = invariant_violations(&log, config.loss);
        if !v.is_empty() {
            return Err(HarnessError::Invariants(v));
        }
    }
    Ok(RunOutcome {
        log,
        csv_path,
        checkpoint_path,
        svg_path,
        warnings,
    })
}
