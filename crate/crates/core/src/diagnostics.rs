//! Margins, alignment and approximate-KKT residuals of a parameter vector.
//!
//! The minimum-norm Clarke subgradient that appears in alignment and in the
//! KKT multipliers is replaced by the model's fixed subgradient selection.
//! The two agree away from ReLU kinks, which generic trajectories avoid.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{loss_subgradient, LossGradient, LossSpec};
use crate::models::Model;
use crate::norms::{
    bregman_divergence, dual_norm_value, nearest_subgradient, norm_subgradient, norm_value,
    NormSpec,
};
use crate::params::Params;
use crate::scalar::Scalar;

/// Hard and soft margins of `θ` under several norms.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport<S> {
    pub q_min: S,
    /// `q_min / ||θ||^L` in the algorithm norm.
    pub gamma: S,
    /// ℓ∞-normalized (ℓ1-geometric) margin.
    pub gamma_1: S,
    pub gamma_2: S,
    /// ℓ1-normalized (ℓ∞-geometric) margin.
    pub gamma_inf: S,
    /// Spectral-norm margin.
    pub gamma_sigma: S,
    /// `Φ^{-1}(log 1/L) / ||θ||^L` in the algorithm norm.
    pub soft_margin: S,
    pub norm_algo: S,
    pub norm_l1: S,
    pub norm_l2: S,
    pub norm_linf: S,
    pub norm_spectral: S,
    pub log_loss: S,
    /// `<θ/||θ||, −g/||g||_*>`; `None` when `g` vanishes.
    pub alignment: Option<S>,
    pub separated: bool,
}

/// Approximate-KKT residuals at the feasible rescaling `θ̃ = θ / q_min^{1/L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport<S> {
    pub log_lambda: Vec<S>,
    /// `exp(log_lambda)`; entries that over- or underflow are `None`.
    pub lambda: Vec<Option<S>>,
    /// `||s − ||θ̃|| n||₂` with `n` the subgradient of the tolerance-enlarged
    /// subdifferential closest to `s / ||θ̃||`.
    pub eps: S,
    /// The same residual with the fixed subgradient selection.
    pub eps_fixed: S,
    pub delta: S,
    pub bregman_gap: S,
    pub bregman_bound: Option<S>,
    pub delta_bound: Option<S>,
    pub alignment: S,
    pub theta_tilde: Params<S>,
}

/// Tunables for [`kkt_residuals`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktOptions {
    /// Relative tolerance for near-ties when choosing the subgradient `n`.
    pub subgradient_tol: f64,
}

impl Default for KktOptions {
    fn default() -> Self {
        Self {
            subgradient_tol: 1e-2,
        }
    }
}

/// Strict `log L < log l(0)`.
pub fn detect_separation<S: Scalar>(log_loss: S, loss: LossSpec) -> bool {
    loss.is_separated(log_loss)
}

fn min_of<S: Scalar>(xs: &[S]) -> S {
    xs.iter().copied().fold(S::infinity(), S::min)
}

fn degree<S: Scalar>(model: &Model<S>) -> S {
    S::from_u32(model.degree()).expect("small integer")
}

fn alignment_of<S: Scalar>(norm: &NormSpec, theta: &Params<S>, g_scaled: &Params<S>) -> Result<Option<S>> {
    let gd = dual_norm_value(norm, g_scaled)?;
    if gd == S::zero() {
        return Ok(None);
    }
    let tn = norm_value(norm, theta)?;
    Ok(Some(-theta.dot(g_scaled)? / (tn * gd)))
}

pub fn margin_report<S: Scalar>(
    model: &Model<S>,
    theta: &Params<S>,
    data: &Dataset<S>,
    loss: LossSpec,
    algo_norm: &NormSpec,
) -> Result<MarginReport<S>> {
    let grad = loss_subgradient(loss, model, theta, data)?;
    margin_report_from(model, theta, &grad, loss, algo_norm)
}

/// [`margin_report`] reusing an already computed loss gradient at `θ`.
pub fn margin_report_from<S: Scalar>(
    model: &Model<S>,
    theta: &Params<S>,
    grad: &LossGradient<S>,
    loss: LossSpec,
    algo_norm: &NormSpec,
) -> Result<MarginReport<S>> {
    if theta.is_zero() {
        return Err(Error::ZeroVector("margin of zero parameters"));
    }
    let l = model.degree() as i32;
    let q_min = min_of(&grad.margins);
    let norm_algo = norm_value(algo_norm, theta)?;
    let norm_l1 = norm_value(&NormSpec::L1, theta)?;
    let norm_l2 = norm_value(&NormSpec::L2, theta)?;
    let norm_linf = norm_value(&NormSpec::Linf, theta)?;
    let norm_spectral = norm_value(&NormSpec::SpectralPerBlock, theta)?;
    let soft = loss.phi_inverse(-grad.log_loss)?;
    Ok(MarginReport {
        q_min,
        gamma: q_min / norm_algo.powi(l),
        gamma_1: q_min / norm_linf.powi(l),
        gamma_2: q_min / norm_l2.powi(l),
        gamma_inf: q_min / norm_l1.powi(l),
        gamma_sigma: q_min / norm_spectral.powi(l),
        soft_margin: soft / norm_algo.powi(l),
        norm_algo,
        norm_l1,
        norm_l2,
        norm_linf,
        norm_spectral,
        log_loss: grad.log_loss,
        alignment: alignment_of(algo_norm, theta, &grad.scaled)?,
        separated: detect_separation(grad.log_loss, loss),
    })
}

/// `θ / q_min^{1/L}`, whose smallest output margin is 1.
pub fn scale_to_feasible<S: Scalar>(model: &Model<S>, theta: &Params<S>, data: &Dataset<S>) -> Result<Params<S>> {
    let q_min = min_of(&model.output_margins(theta, data)?);
    if q_min.is_nan() || q_min <= S::zero() {
        return Err(Error::NotSeparated { q_min: q_min.as_f64() });
    }
    let l = degree(model);
    Ok(theta.scaled(S::one() / q_min.powf(S::one() / l)))
}

/// Multipliers, stationarity and complementarity residuals, and the
/// Bregman stationarity gap with its bounds.
///
/// `soft_margin_t0` is the soft margin at the first separated step; without
/// it the bounds are `None`.
pub fn kkt_residuals<S: Scalar>(
    model: &Model<S>,
    theta: &Params<S>,
    data: &Dataset<S>,
    loss: LossSpec,
    algo_norm: &NormSpec,
    soft_margin_t0: Option<S>,
    opts: &KktOptions,
) -> Result<KktReport<S>> {
    let grad = loss_subgradient(loss, model, theta, data)?;
    kkt_residuals_from(model, theta, data, &grad, algo_norm, soft_margin_t0, opts)
}

/// [`kkt_residuals`] reusing an already computed loss gradient at `θ`.
pub fn kkt_residuals_from<S: Scalar>(
    model: &Model<S>,
    theta: &Params<S>,
    data: &Dataset<S>,
    grad: &LossGradient<S>,
    algo_norm: &NormSpec,
    soft_margin_t0: Option<S>,
    opts: &KktOptions,
) -> Result<KktReport<S>> {
    if theta.is_zero() {
        return Err(Error::ZeroVector("KKT residuals of zero parameters"));
    }
    let q_min = min_of(&grad.margins);
    if q_min.is_nan() || q_min <= S::zero() {
        return Err(Error::NotSeparated { q_min: q_min.as_f64() });
    }
    let l = degree(model);
    let two = S::lit(2.0);
    let theta_norm = norm_value(algo_norm, theta)?;
    let g_dual_scaled = dual_norm_value(algo_norm, &grad.scaled)?;
    if g_dual_scaled == S::zero() {
        return Err(Error::ZeroVector("loss gradient"));
    }
    // log ||g||_* = log_scale + log ||scaled||_*
    let log_ratio = theta_norm.ln() - grad.log_scale - g_dual_scaled.ln();
    let log_q = q_min.ln();
    let log_lambda: Vec<S> = grad
        .log_weights
        .iter()
        .map(|&lw| log_ratio + (S::one() - two / l) * log_q + lw)
        .collect();
    let lambda = log_lambda
        .iter()
        .map(|&x| {
            let v = x.exp();
            (v.is_finite() && (v > S::zero() || x == S::neg_infinity())).then_some(v)
        })
        .collect();

    let theta_tilde = theta.scaled(S::one() / q_min.powf(S::one() / l));
    let tilde_norm = norm_value(algo_norm, &theta_tilde)?;

    // s = Σ λ_i y_i h̃_i with h̃_i = q_min^{1/L − 1} h_i
    let shift = (S::one() / l - S::one()) * log_q;
    let coeffs: Vec<S> = log_lambda
        .iter()
        .zip(&data.y)
        .map(|(&ll, &y)| (ll + shift).exp() * y)
        .collect();
    let s = model.weighted_subgradient_sum(theta, data, &coeffs)?;

    let k_fixed = norm_subgradient(algo_norm, &theta_tilde)?.scaled(tilde_norm);
    let eps_fixed = s.sub(&k_fixed)?.l2_norm();
    let target = s.scaled(S::one() / tilde_norm);
    let n = nearest_subgradient(algo_norm, &theta_tilde, &target, S::lit(opts.subgradient_tol))?;
    let eps = s.sub(&n.scaled(tilde_norm))?.l2_norm();

    let delta = grad
        .margins
        .iter()
        .zip(&log_lambda)
        .map(|(&q, &ll)| ll.exp() * (q / q_min - S::one()))
        .sum::<S>();

    let bregman_gap = bregman_divergence(algo_norm, &s, &k_fixed, &theta_tilde)?;
    let alignment = alignment_of(algo_norm, theta, &grad.scaled)?.unwrap_or(S::zero());

    let (bregman_bound, delta_bound) = match soft_margin_t0 {
        Some(g0) if g0 > S::zero() => {
            let g0p = g0.powf(two / l);
            let bb = (S::one() - alignment) / g0p;
            let m = S::from_usize(data.len()).expect("dataset size");
            let log_inv_loss = -grad.log_loss;
            let db = (log_inv_loss > S::zero()).then(|| m / (S::E() * g0p * l * log_inv_loss));
            (Some(bb), db)
        }
        _ => (None, None),
    };

    Ok(KktReport {
        log_lambda,
        lambda,
        eps,
        eps_fixed,
        delta,
        bregman_gap,
        bregman_bound,
        delta_bound,
        alignment,
        theta_tilde,
    })
}
