//! Steepest descent under arbitrary norms for homogeneous binary classifiers,
//! with margin and KKT diagnostics for the implicit bias it induces.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod models;
pub mod norms;
pub mod optimizers;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod scalar;

pub use data::Dataset;
pub use diagnostics::{KktOptions, KktReport, MarginReport};
pub use error::{Error, Result};
pub use linalg::{Matrix, Svd, SymmetricEigen};
pub use losses::{LossGradient, LossSpec};
pub use models::{InitScheme, InitSpec, Model, ModelSpec};
pub use norms::NormSpec;
pub use optimizers::{Optimizer, OptimizerKind, OptimizerSpec, OptimizerState};
pub use oracle::OracleResult;
pub use params::Params;
pub use rng::Rng;
pub use scalar::Scalar;

pub type ParamVector = Params<f64>;
pub type Matrix64 = Matrix<f64>;
pub type Dataset64 = Dataset<f64>;
pub type Model64 = Model<f64>;
