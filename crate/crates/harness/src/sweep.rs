//! Grids of runs over seeds, initialization scales and optimizers, reduced
//! to one row of final metrics per run.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use steepest_core::models::init_params;

use crate::config::ConfigFile;
use crate::error::{HarnessError, Result};
use crate::training::{load_data, train, Row};

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ConfigFile,
    /// Directory that relative data paths in `base` resolve against.
    pub base_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    /// Optimizer names as in the config file; empty means the base optimizer.
    pub optimizers: Vec<String>,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Diverged(String),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub optimizer: String,
    pub seed: u64,
    pub alpha: f64,
    pub status: RunStatus,
    pub t0: Option<u64>,
    pub last: Option<Row>,
}

impl SweepSpec {
    /// Grid points in manifest order: optimizer, then alpha, then seed.
    pub fn grid(&self) -> Vec<(String, f64, u64)> {
        let opts = if self.optimizers.is_empty() {
            vec![self.base.optimizer.clone()]
        } else {
            self.optimizers.clone()
        };
        let mut out = Vec::new();
        for o in &opts {
            for &a in &self.alphas {
                for &s in &self.seeds {
                    out.push((o.clone(), a, s));
                }
            }
        }
        out
    }
}

fn run_one(spec: &SweepSpec, optimizer: &str, alpha: f64, seed: u64) -> SweepRecord {
    let mut file = spec.base.clone();
    file.optimizer = optimizer.to_string();
    file.init_scale = alpha;
    file.seed = seed;
    let mut rec = SweepRecord {
        optimizer: optimizer.to_string(),
        seed,
        alpha,
        status: RunStatus::Ok,
        t0: None,
        last: None,
    };
    let result = (|| {
        let cfg = file.resolve(&spec.base_dir)?;
        let (tr, te) = load_data(&cfg)?;
        let (model, theta) = init_params::<f64>(&cfg.model.spec(tr.dim()), &cfg.init)?;
        train(&cfg, &model, theta, &tr, te.as_ref())
    })();
    match result {
        Ok(log) => {
            rec.t0 = log.t0;
            rec.last = log.rows.last().cloned();
        }
        Err(HarnessError::Divergence { step, reason }) => {
            rec.status = RunStatus::Diverged(format!("step {step}: {reason}"));
        }
        Err(e) => rec.status = RunStatus::Failed(e.to_string()),
    }
    rec
}

/// Run the grid on up to `threads` workers; records come back in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    if spec.seeds.is_empty() || spec.alphas.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one seed and one alpha".into()));
    }
    let grid = spec.grid();
    let slots: Mutex<Vec<Option<SweepRecord>>> = Mutex::new(vec![None; grid.len()]);
    let next = AtomicUsize::new(0);
    let workers = spec.threads.clamp(1, grid.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((o, a, s)) = grid.get(i) else { break };
                let rec = run_one(spec, o, *a, *s);
                slots.lock().expect("sweep worker panicked")[i] = Some(rec);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("sweep worker panicked")
        .into_iter()
        .map(|r| r.expect("every grid point ran"))
        .collect())
}

pub const SWEEP_HEADER: &str =
    "optimizer,alpha,seed,status,t0,final_step,log_loss,train_acc,test_acc,gamma_1,gamma_2,gamma_inf,soft_margin";

pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in records {
        let status = match &r.status {
            RunStatus::Ok => "ok",
            RunStatus::Diverged(_) => "diverged",
            RunStatus::Failed(_) => "failed",
        };
        let last = r.last.as_ref();
        let fields = [
            r.optimizer.clone(),
            format!("{}", r.alpha),
            r.seed.to_string(),
            status.to_string(),
            r.t0.map(|t| t.to_string()).unwrap_or_default(),
            last.map(|l| l.step.to_string()).unwrap_or_default(),
            f(last.map(|l| l.log_loss)),
            f(last.map(|l| l.train_acc)),
            f(last.and_then(|l| l.test_acc)),
            f(last.map(|l| l.gamma_1)),
            f(last.map(|l| l.gamma_2)),
            f(last.map(|l| l.gamma_inf)),
            f(last.map(|l| l.soft_margin)),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
