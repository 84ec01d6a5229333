//! Update rules: raw and normalized steepest descent, Adam, Shampoo, and a
//! one-shot switch from one rule to another once the data is separated.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{psd_inverse_root, Matrix};
use crate::norms::{steepest_direction, unit_steepest_direction, NormSpec};
use crate::params::Params;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerKind {
    Steepest { norm: NormSpec, normalized: bool },
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Shampoo { eps_reg: f64 },
}

impl OptimizerKind {
    pub fn gd() -> Self {
        OptimizerKind::Steepest {
            norm: NormSpec::L2,
            normalized: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerKind::Steepest { norm, .. } => {
                if let NormSpec::ModularMax(inner) = norm {
                    if inner.is_empty() {
                        return Err(Error::InvalidNorm("empty modular norm".into()));
                    }
                }
                Ok(())
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
                    if !(0.0..1.0).contains(b) {
                        return Err(Error::InvalidOptimizer(format!("{name} = {b} not in [0, 1)")));
                    }
                }
                if !(*eps >= 0.0 && eps.is_finite()) {
                    return Err(Error::InvalidOptimizer(format!("eps = {eps} must be >= 0")));
                }
                Ok(())
            }
            OptimizerKind::Shampoo { eps_reg } => {
                if !(*eps_reg >= 0.0 && eps_reg.is_finite()) {
                    return Err(Error::InvalidOptimizer(format!("eps_reg = {eps_reg} must be >= 0")));
                }
                Ok(())
            }
        }
    }

    /// The norm whose geometry this rule follows, when there is one.
    pub fn geometry(&self) -> Option<NormSpec> {
        match self {
            OptimizerKind::Steepest { norm, .. } => Some(norm.clone()),
            OptimizerKind::Adam { .. } => Some(NormSpec::Linf),
            OptimizerKind::Shampoo { .. } => Some(NormSpec::SpectralPerBlock),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizerKind::Steepest { norm, normalized } => {
                let base = match norm {
                    NormSpec::L2 => "gd".to_string(),
                    NormSpec::L1 => "cd".to_string(),
                    NormSpec::Linf => "sd".to_string(),
                    other => other.to_string(),
                };
                if *normalized {
                    write!(f, "normalized-{base}")
                } else {
                    f.write_str(&base)
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                write!(f, "adam(b1={beta1},b2={beta2},eps={eps})")
            }
            OptimizerKind::Shampoo { eps_reg } => write!(f, "shampoo(eps_reg={eps_reg})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Trigger {
    /// The first step at which the training loss is below `l(0)`.
    #[default]
    AtSeparation,
}

/// Switch to another rule on a trigger, keeping the step size.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchRule {
    pub to: OptimizerKind,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub step_size: f64,
    pub switch: Option<SwitchRule>,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, step_size: f64) -> Self {
        Self {
            kind,
            step_size,
            switch: None,
        }
    }

    pub fn with_switch(mut self, to: OptimizerKind) -> Self {
        self.switch = Some(SwitchRule {
            to,
            trigger: Trigger::AtSeparation,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidOptimizer(format!(
                "step size {} must be positive",
                self.step_size
            )));
        }
        self.kind.validate()?;
        if let Some(rule) = &self.switch {
            rule.to.validate()?;
        }
        Ok(())
    }
}

/// Accumulators carried between steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState<S> {
    pub t: u64,
    pub adam_m: Option<Params<S>>,
    pub adam_v: Option<Params<S>>,
    pub shampoo_l: Vec<Matrix<S>>,
    pub shampoo_r: Vec<Matrix<S>>,
    /// Set once a switch rule has fired.
    pub switched: bool,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new() -> Self {
        Self {
            t: 0,
            adam_m: None,
            adam_v: None,
            shampoo_l: Vec::new(),
            shampoo_r: Vec::new(),
            switched: false,
        }
    }

    fn tick(&mut self) -> u64 {
        self.t = self.t.saturating_add(1).min(i64::MAX as u64);
        self.t
    }
}

fn is_frozen(frozen: &[bool], i: usize) -> bool {
    frozen.get(i).copied().unwrap_or(false)
}

fn mask_frozen<S: Scalar>(g: &Params<S>, frozen: &[bool]) -> Params<S> {
    if !frozen.iter().any(|&f| f) {
        return g.clone();
    }
    let mut out = g.clone();
    for (i, b) in out.blocks_mut().iter_mut().enumerate() {
        if is_frozen(frozen, i) {
            b.as_mut_slice().iter_mut().for_each(|v| *v = S::zero());
        }
    }
    out
}

fn finish<S: Scalar>(theta: Params<S>) -> Result<Params<S>> {
    if theta.is_finite() {
        Ok(theta)
    } else {
        Err(Error::StepOverflow)
    }
}

/// `θ + η Δ` with `Δ` the steepest direction for `g`; with `normalized` the
/// direction has unit norm instead of norm `||g||_*`. Blocks flagged in
/// `frozen` never move.
pub fn step_steepest<S: Scalar>(
    theta: &Params<S>,
    g: &Params<S>,
    norm: &NormSpec,
    normalized: bool,
    eta: S,
    frozen: &[bool],
) -> Result<Params<S>> {
    theta.check_same_shape(g)?;
    let g = mask_frozen(g, frozen);
    let delta = if normalized {
        unit_steepest_direction(norm, &g)?.0
    } else {
        steepest_direction(norm, &g)?
    };
    let mut next = theta.clone();
    next.axpy(eta, &delta)?;
    finish(next)
}

/// One Adam step. With `eps = 0`, coordinates where `v̂ = 0` get no update.
#[allow(clippy::too_many_arguments)]
pub fn step_adam<S: Scalar>(
    theta: &Params<S>,
    g: &Params<S>,
    state: &mut OptimizerState<S>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    eta: S,
    frozen: &[bool],
) -> Result<Params<S>> {
    theta.check_same_shape(g)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    let g = mask_frozen(g, frozen);
    let t = state.tick();
    let (b1, b2, eps) = (S::lit(beta1), S::lit(beta2), S::lit(eps));
    let m = state.adam_m.get_or_insert_with(|| g.zeros_like());
    let v = state.adam_v.get_or_insert_with(|| g.zeros_like());
    m.check_same_shape(&g)?;
    v.check_same_shape(&g)?;

    let t_exp = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = S::one() - b1.powi(t_exp);
    let c2 = S::one() - b2.powi(t_exp);
    let mut next = theta.clone();
    let coords = next
        .iter_mut()
        .zip(m.iter_mut())
        .zip(v.iter_mut())
        .zip(g.iter());
    for (((th, mi), vi), &gi) in coords {
        *mi = b1 * *mi + (S::one() - b1) * gi;
        *vi = b2 * *vi + (S::one() - b2) * gi * gi;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        let denom = v_hat.sqrt() + eps;
        if denom > S::zero() {
            *th = *th - eta * (m_hat / denom);
        }
    }
    finish(next)
}

/// One Shampoo step per block: `W ← W − η L^{-1/4} G R^{-1/4}` with
/// `L += G Gᵀ`, `R += Gᵀ G` (both started at `eps_reg · I`).
pub fn step_shampoo<S: Scalar>(
    theta: &Params<S>,
    g: &Params<S>,
    state: &mut OptimizerState<S>,
    eps_reg: f64,
    eta: S,
    frozen: &[bool],
) -> Result<Params<S>> {
    theta.check_same_shape(g)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    state.tick();
    if state.shampoo_l.is_empty() {
        let reg = S::lit(eps_reg);
        for b in g.blocks() {
            state.shampoo_l.push(Matrix::identity(b.rows()).scaled(reg));
            state.shampoo_r.push(Matrix::identity(b.cols()).scaled(reg));
        }
    }
    if state.shampoo_l.len() != g.num_blocks() {
        return Err(Error::BlockCount {
            expected: state.shampoo_l.len(),
            found: g.num_blocks(),
        });
    }
    let mut next = theta.clone();
    for (i, gb) in g.blocks().iter().enumerate() {
        if is_frozen(frozen, i) {
            continue;
        }
        let l = &mut state.shampoo_l[i];
        let r = &mut state.shampoo_r[i];
        accumulate(l, &gb.matmul(&gb.transpose()));
        accumulate(r, &gb.transpose().matmul(gb));
        let update = psd_inverse_root(l, 4)?
            .matmul(gb)
            .matmul(&psd_inverse_root(r, 4)?);
        let w = next.block_mut(i);
        for (wv, &uv) in w.as_mut_slice().iter_mut().zip(update.as_slice()) {
            *wv = *wv - eta * uv;
        }
    }
    finish(next)
}

fn accumulate<S: Scalar>(acc: &mut Matrix<S>, add: &Matrix<S>) {
    for (a, &b) in acc.as_mut_slice().iter_mut().zip(add.as_slice()) {
        *a = *a + b;
    }
}

/// The rule in force after this step. Fires once, on the first separated
/// step, and resets all accumulators when it does.
pub fn apply_switch<S: Scalar>(
    spec: &OptimizerSpec,
    state: &mut OptimizerState<S>,
    separated: bool,
) -> OptimizerSpec {
    match &spec.switch {
        Some(rule) if !state.switched && separated => {
            let t = state.t;
            *state = OptimizerState::new();
            state.t = t;
            state.switched = true;
            OptimizerSpec {
                kind: rule.to.clone(),
                step_size: spec.step_size,
                switch: None,
            }
        }
        _ => spec.clone(),
    }
}

/// A spec together with its state.
#[derive(Debug, Clone)]
pub struct Optimizer<S> {
    spec: OptimizerSpec,
    state: OptimizerState<S>,
    frozen: Vec<bool>,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(spec: OptimizerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            state: OptimizerState::new(),
            frozen: Vec::new(),
        })
    }

    /// Freeze the flagged blocks.
    pub fn with_frozen(mut self, frozen: Vec<bool>) -> Self {
        self.frozen = frozen;
        self
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn state(&self) -> &OptimizerState<S> {
        &self.state
    }

    /// The rule currently in force.
    pub fn kind(&self) -> &OptimizerKind {
        &self.spec.kind
    }

    /// Apply the switch rule for this step; returns true if it fired.
    pub fn observe_separation(&mut self, separated: bool) -> bool {
        let before = self.state.switched;
        self.spec = apply_switch(&self.spec, &mut self.state, separated);
        !before && self.state.switched
    }

    /// One update given the gradient in scaled form `g = e^{log_scale} · scaled`.
    ///
    /// Normalized steepest descent is invariant to the scale, so it uses
    /// `scaled` directly; the other rules see the actual gradient.
    pub fn step(&mut self, theta: &Params<S>, scaled: &Params<S>, log_scale: S) -> Result<Params<S>> {
        if !scaled.is_finite() || log_scale.is_nan() {
            return Err(Error::NonFinite("gradient"));
        }
        let eta = S::lit(self.spec.step_size);
        match &self.spec.kind {
            OptimizerKind::Steepest {
                norm,
                normalized: true,
            } => {
                self.state.tick();
                step_steepest(theta, scaled, norm, true, eta, &self.frozen)
            }
            OptimizerKind::Steepest {
                norm,
                normalized: false,
            } => {
                self.state.tick();
                let norm = norm.clone();
                step_steepest(theta, &self.actual(scaled, log_scale), &norm, false, eta, &self.frozen)
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let (b1, b2, e) = (*beta1, *beta2, *eps);
                let g = self.actual(scaled, log_scale);
                step_adam(theta, &g, &mut self.state, b1, b2, e, eta, &self.frozen)
            }
            OptimizerKind::Shampoo { eps_reg } => {
                let reg = *eps_reg;
                let g = self.actual(scaled, log_scale);
                step_shampoo(theta, &g, &mut self.state, reg, eta, &self.frozen)
            }
        }
    }

    fn actual(&self, scaled: &Params<S>, log_scale: S) -> Params<S> {
        if log_scale == S::neg_infinity() {
            scaled.zeros_like()
        } else {
            scaled.scaled(log_scale.exp())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::dual_norm_value;

    fn v(xs: &[f64]) -> Params<f64> {
        Params::from_vector(xs.to_vec())
    }

    #[test]
    fn steepest_examples() {
        let theta = v(&[1.0, 1.0]);
        let next = step_steepest(&theta, &v(&[3.0, 4.0]), &NormSpec::L2, false, 0.1, &[]).unwrap();
        let d = next.sub(&theta).unwrap().to_flat();
        assert!((d[0] + 0.3).abs() < 1e-15 && (d[1] + 0.4).abs() < 1e-15);

        let next = step_steepest(&theta, &v(&[3.0, -4.0]), &NormSpec::Linf, true, 0.1, &[]).unwrap();
        assert_eq!(next.to_flat(), vec![0.9, 1.1]);

        let next = step_steepest(&theta, &v(&[0.0, 0.0]), &NormSpec::L1, false, 0.1, &[]).unwrap();
        assert_eq!(next, theta);
    }

    #[test]
    fn steepest_rejects_non_finite() {
        let theta = v(&[1.0, 1.0]);
        assert!(step_steepest(&theta, &v(&[f64::NAN, 0.0]), &NormSpec::L2, false, 0.1, &[]).is_err());
    }

    #[test]
    fn frozen_blocks_do_not_move() {
        let theta = Params::new(vec![Matrix::column(vec![1.0, 2.0]), Matrix::column(vec![3.0])]);
        let g = Params::new(vec![Matrix::column(vec![0.5, -1.0]), Matrix::column(vec![7.0])]);
        for norm in [NormSpec::L1, NormSpec::L2, NormSpec::Linf, NormSpec::SpectralPerBlock] {
            let next = step_steepest(&theta, &g, &norm, false, 0.5, &[false, true]).unwrap();
            assert_eq!(next.block(1), theta.block(1));
            assert_ne!(next.block(0), theta.block(0));
        }
    }

    #[test]
    fn adam_without_moments_is_sign_descent() {
        let theta = v(&[0.0, 0.0]);
        let mut st = OptimizerState::new();
        let next = step_adam(&theta, &v(&[0.5, -2.0]), &mut st, 0.0, 0.0, 0.0, 0.1, &[]).unwrap();
        assert_eq!(next.to_flat(), vec![-0.1, 0.1]);
    }

    #[test]
    fn adam_zero_coordinate_stays_put() {
        let theta = v(&[1.0, 1.0]);
        let mut st = OptimizerState::new();
        let next = step_adam(&theta, &v(&[0.0, 3.0]), &mut st, 0.0, 0.0, 0.0, 0.1, &[]).unwrap();
        assert_eq!(next.to_flat(), vec![1.0, 0.9]);
    }

    #[test]
    fn adam_bias_correction() {
        let mut st = OptimizerState::new();
        let theta = v(&[0.0, 0.0]);
        step_adam(&theta, &v(&[1.0, 0.0]), &mut st, 0.9, 0.999, 1e-8, 0.1, &[]).unwrap();
        let m = st.adam_m.as_ref().unwrap().to_flat();
        let m_hat: Vec<f64> = m.iter().map(|x| x / (1.0 - 0.9)).collect();
        assert!((m_hat[0] - 1.0).abs() < 1e-15);
        assert_eq!(m_hat[1], 0.0);
    }

    #[test]
    fn adam_large_eps_is_scaled_gradient() {
        let mut st = OptimizerState::new();
        let theta = v(&[0.0, 0.0]);
        let eta = 0.1;
        let eps = 1e6;
        let next = step_adam(&theta, &v(&[1.0, 1.0]), &mut st, 0.9, 0.999, eps, eta, &[]).unwrap();
        // m̂ = 1, v̂ = 1, update = −η / (1 + ε)
        let expect = -eta / (1.0 + eps);
        for x in next.to_flat() {
            assert!((x - expect).abs() <= 1e-15 * expect.abs());
            assert!((x - (-eta / eps)).abs() <= 1e-6 * eta / eps);
        }
    }

    #[test]
    fn adam_invalid_betas() {
        let k = OptimizerKind::Adam {
            beta1: 1.0,
            beta2: 0.0,
            eps: 0.0,
        };
        assert!(k.validate().is_err());
    }

    #[test]
    fn shampoo_first_step_is_polar_factor() {
        let theta = Params::new(vec![Matrix::zeros(2, 2)]);
        let g = Params::new(vec![Matrix::diag(&[3.0, 1.0])]);
        let mut st = OptimizerState::new();
        let next = step_shampoo(&theta, &g, &mut st, 0.0, 0.5, &[]).unwrap();
        let expect = Matrix::identity(2).scaled(-0.5);
        assert!(next.block(0).sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn shampoo_zero_gradient() {
        let theta = Params::new(vec![Matrix::diag(&[1.0, 2.0])]);
        let g = Params::new(vec![Matrix::zeros(2, 2)]);
        let mut st = OptimizerState::new();
        let next = step_shampoo(&theta, &g, &mut st, 0.0, 0.5, &[]).unwrap();
        assert_eq!(next, theta);
        assert_eq!(st.shampoo_l[0], Matrix::zeros(2, 2));
    }

    #[test]
    fn shampoo_first_step_matches_spectral_steepest() {
        let g = Params::new(vec![Matrix::from_rows(&[
            vec![1.0, 2.0, 0.5],
            vec![-0.3, 0.7, 1.1],
        ])]);
        let theta = g.zeros_like();
        let eta = 0.25;
        let mut st = OptimizerState::new();
        let shampoo = step_shampoo(&theta, &g, &mut st, 0.0, eta, &[]).unwrap();
        let dir = steepest_direction(&NormSpec::SpectralPerBlock, &g).unwrap();
        let nuc = dual_norm_value(&NormSpec::SpectralPerBlock, &g).unwrap();
        let expect = dir.scaled(eta / nuc);
        assert!(shampoo.sub(&expect).unwrap().l2_norm() < 1e-8);
    }

    #[test]
    fn switch_rule() {
        let spec = OptimizerSpec::new(OptimizerKind::gd(), 0.1).with_switch(OptimizerKind::Steepest {
            norm: NormSpec::L1,
            normalized: false,
        });
        let mut st: OptimizerState<f64> = OptimizerState::new();
        st.adam_m = Some(v(&[1.0]));
        let same = apply_switch(&spec, &mut st, false);
        assert_eq!(same, spec);
        let switched = apply_switch(&spec, &mut st, true);
        assert_eq!(
            switched.kind,
            OptimizerKind::Steepest {
                norm: NormSpec::L1,
                normalized: false
            }
        );
        assert_eq!(switched.step_size, 0.1);
        assert!(st.adam_m.is_none());
        assert_eq!(apply_switch(&switched, &mut st, true), switched);

        let plain = OptimizerSpec::new(OptimizerKind::gd(), 0.1);
        assert_eq!(apply_switch(&plain, &mut OptimizerState::<f64>::new(), true), plain);
    }

    #[test]
    fn optimizer_uses_scaled_gradient() {
        let spec = OptimizerSpec::new(OptimizerKind::gd(), 1.0);
        let mut opt = Optimizer::new(spec).unwrap();
        let theta = v(&[0.0, 0.0]);
        let next = opt.step(&theta, &v(&[-1.0, 0.0]), 2f64.ln()).unwrap();
        assert_eq!(next.to_flat(), vec![2.0, 0.0]);
    }
}
