//! Exponentially tailed losses `l(u) = exp(-Φ(u))`, evaluated in the log
//! domain so that training can run far past the point where individual
//! terms underflow.

use std::fmt;
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::params::Params;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LossSpec {
    /// `Φ(u) = u`, i.e. `l(u) = e^{-u}`.
    #[default]
    Exponential,
    /// `Φ(u) = -log log(1 + e^{-u})`, i.e. `l(u) = log(1 + e^{-u})`.
    Logistic,
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossSpec::Exponential => "exponential",
            LossSpec::Logistic => "logistic",
        })
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(LossSpec::Exponential),
            "logistic" => Ok(LossSpec::Logistic),
            other => Err(Error::InvalidModel(format!("unknown loss `{other}`"))),
        }
    }
}

/// Below this `w = e^{-u}` the ratios `log1p(w)/w` and `expm1(w)/w` use
/// their second-order series.
const SERIES_CUTOFF: f64 = 1e-8;

/// `log(1 + w) / w`.
fn log1p_ratio<S: Scalar>(w: S) -> S {
    if w < S::lit(SERIES_CUTOFF) {
        S::one() - w / S::lit(2.0) + w * w / S::lit(3.0)
    } else {
        w.ln_1p() / w
    }
}

/// `(e^w − 1) / w`.
fn expm1_ratio<S: Scalar>(w: S) -> S {
    if w < S::lit(SERIES_CUTOFF) {
        S::one() + w / S::lit(2.0) + w * w / S::lit(6.0)
    } else {
        w.exp_m1() / w
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus<S: Scalar>(z: S) -> S {
    z.max(S::zero()) + (-z.abs()).exp().ln_1p()
}

impl LossSpec {
    /// `Φ(u)`.
    pub fn phi<S: Scalar>(self, u: S) -> S {
        match self {
            LossSpec::Exponential => u,
            LossSpec::Logistic => {
                if u >= S::zero() {
                    // log(1 + e^{-u}) = e^{-u} · r(e^{-u})  ⇒  Φ = u − log r
                    u - log1p_ratio((-u).exp()).ln()
                } else {
                    -softplus(-u).ln()
                }
            }
        }
    }

    /// `log Φ'(u)`.
    pub fn log_phi_prime<S: Scalar>(self, u: S) -> S {
        match self {
            LossSpec::Exponential => S::zero(),
            LossSpec::Logistic => {
                // Φ'(u) = σ(−u) / log(1 + e^{−u})
                if u >= S::zero() {
                    let w = (-u).exp();
                    -w.ln_1p() - log1p_ratio(w).ln()
                } else {
                    -u.exp().ln_1p() - softplus(-u).ln()
                }
            }
        }
    }

    /// `Φ'(u)`.
    pub fn phi_prime<S: Scalar>(self, u: S) -> S {
        self.log_phi_prime(u).exp()
    }

    /// `Φ^{-1}(v)`; both losses map `R` onto `R`, so only non-finite `v` is rejected.
    pub fn phi_inverse<S: Scalar>(self, v: S) -> Result<S> {
        if !v.is_finite() {
            return Err(Error::OutOfRange(v.as_f64()));
        }
        Ok(match self {
            LossSpec::Exponential => v,
            LossSpec::Logistic => {
                // Φ^{-1}(v) = −log(expm1(e^{−v}))
                let w = (-v).exp();
                if v > S::lit(30.0) {
                    v - expm1_ratio(w).ln()
                } else if w > S::lit(30.0) {
                    -w - (-(-w).exp()).ln_1p()
                } else {
                    -w.exp_m1().ln()
                }
            }
        })
    }

    /// `log l(0) = −Φ(0)`: the log-loss below which every example is correctly classified.
    pub fn separation_threshold<S: Scalar>(self) -> S {
        -self.phi(S::zero())
    }

    /// Strict comparison `log L < log l(0)`.
    pub fn is_separated<S: Scalar>(self, log_loss: S) -> bool {
        log_loss < self.separation_threshold()
    }
}

/// `log Σ_i e^{a_i}` with max subtraction; `-inf` for an empty slice.
pub fn log_sum_exp<S: Scalar>(a: &[S]) -> S {
    let m = a.iter().copied().fold(S::neg_infinity(), S::max);
    if !m.is_finite() {
        return m;
    }
    m + a.iter().map(|&x| (x - m).exp()).sum::<S>().ln()
}

/// `log L = log Σ_i e^{−Φ(q_i)}` for output margins `q`.
pub fn log_loss<S: Scalar>(loss: LossSpec, q: &[S]) -> S {
    let terms: Vec<S> = q.iter().map(|&qi| -loss.phi(qi)).collect();
    log_sum_exp(&terms)
}

/// The loss subgradient `g = −Σ_i e^{logw_i} y_i h_i`, stored as
/// `g = e^{log_scale} · scaled` so that it survives underflow of every weight.
#[derive(Debug, Clone)]
pub struct LossGradient<S> {
    pub scaled: Params<S>,
    pub log_scale: S,
    /// `logw_i = −Φ(q_i) + log Φ'(q_i)`.
    pub log_weights: Vec<S>,
    /// `q_i = y_i f(x_i; θ)`.
    pub margins: Vec<S>,
    pub log_loss: S,
}

impl<S: Scalar> LossGradient<S> {
    /// The gradient itself; may underflow to zero late in training.
    pub fn gradient(&self) -> Params<S> {
        self.scaled.scaled(self.log_scale.exp())
    }
}

/// Loss value and subgradient under the model's fixed subgradient selection,
/// accumulated in example order.
pub fn loss_subgradient<S: Scalar>(
    loss: LossSpec,
    model: &Model<S>,
    theta: &Params<S>,
    data: &Dataset<S>,
) -> Result<LossGradient<S>> {
    let margins = model.output_margins(theta, data)?;
    let log_weights: Vec<S> = margins
        .iter()
        .map(|&q| -loss.phi(q) + loss.log_phi_prime(q))
        .collect();
    let log_scale = log_weights.iter().copied().fold(S::neg_infinity(), S::max);
    let coeffs: Vec<S> = log_weights
        .iter()
        .zip(&data.y)
        .map(|(&lw, &y)| -(lw - log_scale).exp() * y)
        .collect();
    let scaled = model.weighted_subgradient_sum(theta, data, &coeffs)?;
    let log_loss = log_loss(loss, &margins);
    Ok(LossGradient {
        scaled,
        log_scale,
        log_weights,
        margins,
        log_loss,
    })
}
