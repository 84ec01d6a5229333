//! Run configuration. Files are flat TOML: one key per setting, no tables.
//!
//! Relative data paths resolve against the directory holding the config
//! file; `output_dir` resolves against the working directory and can be
//! overridden with the `STEEPEST_OUTPUT_DIR` environment variable.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steepest_core::{InitScheme, InitSpec, LossSpec, ModelSpec, NormSpec, OptimizerKind, OptimizerSpec};

use crate::error::{HarnessError, Result};
use crate::teacher::TeacherSpec;

pub const OUTPUT_DIR_ENV: &str = "STEEPEST_OUTPUT_DIR";

/// The on-disk key set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    /// `linear` or `two_layer_relu`.
    pub model: String,
    pub width: usize,
    pub freeze_second_layer: bool,
    pub init_scale: f64,
    /// `auto` (coordinate scheme for CD, otherwise paper scheme), `paper` or `coordinate`.
    pub init_scheme: String,
    pub loss: String,
    /// `gd`, `cd`, `sd`, `steepest` (uses `norm`), `adam` or `shampoo`.
    pub optimizer: String,
    pub norm: String,
    pub normalized: bool,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub shampoo_eps_reg: f64,
    /// Optional rule to switch to once the data is separated (same syntax as `optimizer`).
    pub switch_to: Option<String>,
    /// `teacher`, `file` or `idx`.
    pub data: String,
    pub teacher_d: usize,
    pub teacher_k: usize,
    pub teacher_active: usize,
    pub teacher_weight_scale: f64,
    pub teacher_seed: Option<u64>,
    pub train_size: usize,
    pub test_size: usize,
    pub data_seed: Option<u64>,
    pub data_path: Option<PathBuf>,
    pub test_data_path: Option<PathBuf>,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
    pub idx_test_images: Option<PathBuf>,
    pub idx_test_labels: Option<PathBuf>,
    pub digit_a: u8,
    pub digit_b: u8,
    pub epochs: u64,
    pub log_every: Option<u64>,
    pub diagnostics_norms: Vec<String>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub strict: bool,
    pub loss_floor: f64,
    pub kkt_subgradient_tol: f64,
    pub svg: bool,
    pub svg_metrics: Vec<String>,
    pub svg_log_x: bool,
    pub svg_log_y: bool,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            model: "two_layer_relu".into(),
            width: 64,
            freeze_second_layer: false,
            init_scale: 0.01,
            init_scheme: "auto".into(),
            loss: "exponential".into(),
            optimizer: "gd".into(),
            norm: "l2".into(),
            normalized: false,
            step_size: 6e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            shampoo_eps_reg: 0.0,
            switch_to: None,
            data: "teacher".into(),
            teacher_d: 16,
            teacher_k: 4,
            teacher_active: 3,
            teacher_weight_scale: 1.0,
            teacher_seed: None,
            train_size: 64,
            test_size: 2000,
            data_seed: None,
            data_path: None,
            test_data_path: None,
            idx_images: None,
            idx_labels: None,
            idx_test_images: None,
            idx_test_labels: None,
            digit_a: 3,
            digit_b: 6,
            epochs: 20_000,
            log_every: None,
            diagnostics_norms: vec!["l1".into(), "l2".into(), "linf".into()],
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            strict: false,
            loss_floor: -700.0,
            kkt_subgradient_tol: 1e-2,
            svg: true,
            svg_metrics: vec!["gamma_1".into(), "gamma_2".into(), "gamma_inf".into()],
            svg_log_x: true,
            svg_log_y: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Teacher {
        teacher: TeacherSpec,
        train_size: usize,
        test_size: usize,
        train_seed: u64,
        test_seed: u64,
    },
    File {
        train: PathBuf,
        test: Option<PathBuf>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        test: Option<(PathBuf, PathBuf)>,
        digit_a: u8,
        digit_b: u8,
        train_size: usize,
        test_size: usize,
    },
}

/// Width and freezing of the network; the input dimension comes from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Linear,
    TwoLayerRelu { width: usize, freeze_second_layer: bool },
}

impl ModelKind {
    pub fn spec(&self, input_dim: usize) -> ModelSpec {
        match *self {
            ModelKind::Linear => ModelSpec::Linear { input_dim },
            ModelKind::TwoLayerRelu {
                width,
                freeze_second_layer,
            } => ModelSpec::TwoLayerRelu {
                input_dim,
                width,
                freeze_second_layer,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    pub metrics: Vec<String>,
    pub log_x: bool,
    pub log_y: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub init: InitSpec,
    pub loss: LossSpec,
    pub optimizer: OptimizerSpec,
    pub data: DataSource,
    pub epochs: u64,
    pub log_every: u64,
    pub diagnostics_norms: Vec<NormSpec>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub strict: bool,
    pub loss_floor: f64,
    pub kkt_subgradient_tol: f64,
    pub svg: Option<SvgOptions>,
}

fn parse_optimizer(name: &str, file: &ConfigFile) -> Result<OptimizerKind> {
    let steepest = |norm: NormSpec| OptimizerKind::Steepest {
        norm,
        normalized: file.normalized,
    };
    let kind = match name.trim().to_ascii_lowercase().as_str() {
        "gd" => steepest(NormSpec::L2),
        "cd" => steepest(NormSpec::L1),
        "sd" => steepest(NormSpec::Linf),
        "steepest" => steepest(file.norm.parse()?),
        "adam" => OptimizerKind::Adam {
            beta1: file.beta1,
            beta2: file.beta2,
            eps: file.adam_eps,
        },
        "shampoo" => OptimizerKind::Shampoo {
            eps_reg: file.shampoo_eps_reg,
        },
        other => return Err(HarnessError::Config(format!("unknown optimizer `{other}`"))),
    };
    Ok(kind)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn require(p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    p.clone()
        .ok_or_else(|| HarnessError::Config(format!("`{key}` is required for this data source")))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Typed configuration; relative data paths are resolved against `base`.
    pub fn resolve(&self, base: &Path) -> Result<RunConfig> {
        let model = match self.model.trim().to_ascii_lowercase().as_str() {
            "linear" => ModelKind::Linear,
            "two_layer_relu" | "relu" => ModelKind::TwoLayerRelu {
                width: self.width,
                freeze_second_layer: self.freeze_second_layer,
            },
            other => return Err(HarnessError::Config(format!("unknown model `{other}`"))),
        };
        let kind = parse_optimizer(&self.optimizer, self)?;
        let scheme = match self.init_scheme.trim().to_ascii_lowercase().as_str() {
            "auto" => match &kind {
                OptimizerKind::Steepest {
                    norm: NormSpec::L1, ..
                } => InitScheme::CoordinateUniform,
                _ => InitScheme::PaperUniform,
            },
            "paper" => InitScheme::PaperUniform,
            "coordinate" => InitScheme::CoordinateUniform,
            other => return Err(HarnessError::Config(format!("unknown init_scheme `{other}`"))),
        };
        let mut optimizer = OptimizerSpec::new(kind, self.step_size);
        if let Some(to) = &self.switch_to {
            optimizer = optimizer.with_switch(parse_optimizer(to, self)?);
        }
        optimizer.validate()?;

        let seed = self.seed;
        let data = match self.data.trim().to_ascii_lowercase().as_str() {
            "teacher" => {
                let teacher = TeacherSpec {
                    d: self.teacher_d,
                    k: self.teacher_k,
                    active_per_neuron: self.teacher_active,
                    weight_scale: self.teacher_weight_scale,
                    seed: self.teacher_seed.unwrap_or(seed),
                };
                teacher.validate()?;
                let data_seed = self.data_seed.unwrap_or(seed);
                DataSource::Teacher {
                    teacher,
                    train_size: self.train_size,
                    test_size: self.test_size,
                    train_seed: data_seed.wrapping_add(1),
                    test_seed: data_seed.wrapping_add(2),
                }
            }
            "file" => DataSource::File {
                train: resolve(base, &require(&self.data_path, "data_path")?),
                test: self.test_data_path.as_ref().map(|p| resolve(base, p)),
            },
            "idx" => {
                let test = match (&self.idx_test_images, &self.idx_test_labels) {
                    (Some(i), Some(l)) => Some((resolve(base, i), resolve(base, l))),
                    (None, None) => None,
                    _ => {
                        return Err(HarnessError::Config(
                            "idx_test_images and idx_test_labels go together".into(),
                        ))
                    }
                };
                DataSource::Idx {
                    images: resolve(base, &require(&self.idx_images, "idx_images")?),
                    labels: resolve(base, &require(&self.idx_labels, "idx_labels")?),
                    test,
                    digit_a: self.digit_a,
                    digit_b: self.digit_b,
                    train_size: self.train_size,
                    test_size: self.test_size,
                }
            }
            other => return Err(HarnessError::Config(format!("unknown data source `{other}`"))),
        };
        if self.epochs == 0 {
            return Err(HarnessError::Config("epochs must be positive".into()));
        }
        let log_every = self.log_every.unwrap_or((self.epochs / 1000).max(1));
        if log_every == 0 || log_every > self.epochs {
            return Err(HarnessError::Config(format!(
                "log_every must be in 1..={}",
                self.epochs
            )));
        }
        if self.diagnostics_norms.is_empty() {
            return Err(HarnessError::Config("diagnostics_norms must not be empty".into()));
        }
        let diagnostics_norms = self
            .diagnostics_norms
            .iter()
            .map(|s| s.parse::<NormSpec>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if !(self.loss_floor.is_finite() && self.loss_floor < 0.0) {
            return Err(HarnessError::Config("loss_floor must be negative".into()));
        }
        if !(self.kkt_subgradient_tol >= 0.0 && self.kkt_subgradient_tol < 1.0) {
            return Err(HarnessError::Config("kkt_subgradient_tol must be in [0, 1)".into()));
        }
        let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        };
        Ok(RunConfig {
            model,
            init: InitSpec {
                scale: self.init_scale,
                scheme,
                seed: seed.wrapping_add(3),
            },
            loss: self.loss.parse()?,
            optimizer,
            data,
            epochs: self.epochs,
            log_every,
            diagnostics_norms,
            seed,
            output_dir,
            strict: self.strict,
            loss_floor: self.loss_floor,
            kkt_subgradient_tol: self.kkt_subgradient_tol,
            svg: self.svg.then(|| SvgOptions {
                metrics: self.svg_metrics.clone(),
                log_x: self.svg_log_x,
                log_y: self.svg_log_y,
            }),
        })
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        ConfigFile::parse(text)?.resolve(base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::from_toml_str("", Path::new(".")).unwrap();
        assert_eq!(cfg.log_every, 20);
        assert_eq!(cfg.init.scheme, InitScheme::PaperUniform);
        assert_eq!(cfg.diagnostics_norms, vec![NormSpec::L1, NormSpec::L2, NormSpec::Linf]);
    }

    #[test]
    fn coordinate_init_for_cd() {
        let cfg = RunConfig::from_toml_str("optimizer = \"cd\"", Path::new(".")).unwrap();
        assert_eq!(cfg.init.scheme, InitScheme::CoordinateUniform);
    }

    #[test]
    fn switch_rule_parsed() {
        let cfg = RunConfig::from_toml_str("optimizer = \"gd\"\nswitch_to = \"sd\"", Path::new(".")).unwrap();
        let rule = cfg.optimizer.switch.unwrap();
        assert_eq!(
            rule.to,
            OptimizerKind::Steepest {
                norm: NormSpec::Linf,
                normalized: false
            }
        );
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "unknown_key = 1",
            "optimizer = \"lbfgs\"",
            "epochs = 10\nlog_every = 11",
            "diagnostics_norms = []",
            "step_size = -1.0",
            "data = \"file\"",
            "beta1 = 1.0\noptimizer = \"adam\"",
        ] {
            assert!(RunConfig::from_toml_str(text, Path::new(".")).is_err(), "{text}");
        }
    }

    #[test]
    fn relative_paths_follow_config() {
        let cfg = RunConfig::from_toml_str("data = \"file\"\ndata_path = \"d.stpd\"", Path::new("/cfg")).unwrap();
        assert_eq!(
            cfg.data,
            DataSource::File {
                train: PathBuf::from("/cfg/d.stpd"),
                test: None
            }
        );
    }

    #[test]
    fn toml_round_trip() {
        let file = ConfigFile {
            switch_to: Some("cd".into()),
            ..ConfigFile::default()
        };
        assert_eq!(ConfigFile::parse(&file.to_toml()).unwrap(), file);
    }
}
