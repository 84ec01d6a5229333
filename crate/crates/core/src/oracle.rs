//! Brute-force max-margin directions for linear models in at most three
//! dimensions, and a KKT certificate built on the residuals.

use crate::data::Dataset;
use crate::diagnostics::{kkt_residuals, KktOptions};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::models::Model;
use crate::norms::{norm_value, NormSpec};
use crate::params::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub gamma_star: f64,
    /// Unit vector in the queried norm.
    pub theta_star: Params<f64>,
    pub resolution: f64,
}

pub const DEFAULT_RESOLUTION: f64 = 1e-3;

/// Maximize `min_i y_i <θ, x_i>` over the unit sphere of `norm` by exhaustive
/// search.
///
/// ℓ1 searches a barycentric grid on each face of the cross-polytope; other
/// norms radially project a grid on the surface of `[-1, 1]^d`, which is
/// exact for ℓ∞. Grid spacing is at most `resolution`. Ties go to the
/// lexicographically smallest `θ`.
pub fn grid_max_margin(norm: &NormSpec, data: &Dataset<f64>, resolution: f64) -> Result<OracleResult> {
    data.validate()?;
    let d = data.dim();
    if d == 0 || d > 3 {
        return Err(Error::OracleDimension { d });
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::OutOfRange(resolution));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |raw: &[f64]| -> Result<()> {
        let p = Params::from_vector(raw.to_vec());
        let n = norm_value(norm, &p)?;
        let theta: Vec<f64> = raw.iter().map(|v| v / n).collect();
        let margin = (0..data.len())
            .map(|i| {
                let (x, y) = data.example(i);
                y * x.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let better = match &best {
            None => true,
            Some((bm, bt)) => margin > *bm || (margin == *bm && lex_less(&theta, bt)),
        };
        if better {
            best = Some((margin, theta));
        }
        Ok(())
    };

    if *norm == NormSpec::L1 {
        let n = (1.0 / resolution).ceil() as usize;
        for signs in 0..(1usize << d) {
            let s: Vec<f64> = (0..d)
                .map(|j| if signs >> j & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            for_each_composition(n, d, |parts| {
                let raw: Vec<f64> = parts
                    .iter()
                    .zip(&s)
                    .map(|(&k, &sg)| sg * k as f64 / n as f64)
                    .collect();
                consider(&raw)
            })?;
        }
    } else {
        let n = (2.0 / resolution).ceil() as usize;
        let tick = |k: usize| -1.0 + 2.0 * k as f64 / n as f64;
        for face in 0..d {
            for side in [-1.0, 1.0] {
                let free: Vec<usize> = (0..d).filter(|&j| j != face).collect();
                let counts = vec![n + 1; free.len()];
                for_each_index(&counts, |idx| {
                    let mut raw = vec![0.0; d];
                    raw[face] = side;
                    for (&j, &k) in free.iter().zip(idx) {
                        raw[j] = tick(k);
                    }
                    consider(&raw)
                })?;
            }
        }
    }

    let (gamma_star, theta) = best.expect("grid is non-empty");
    Ok(OracleResult {
        gamma_star,
        theta_star: Params::from_vector(theta),
        resolution,
    })
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Calls `f` on every `d`-tuple of non-negative integers summing to `n`.
fn for_each_composition(n: usize, d: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn rec(
        left: usize,
        slot: usize,
        parts: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if slot + 1 == parts.len() {
            parts[slot] = left;
            return f(parts);
        }
        for k in 0..=left {
            parts[slot] = k;
            rec(left - k, slot + 1, parts, f)?;
        }
        Ok(())
    }
    let mut parts = vec![0; d];
    rec(n, 0, &mut parts, &mut f)
}

/// Calls `f` on every index tuple below `counts`, last index fastest.
fn for_each_index(counts: &[usize], mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let mut idx = vec![0; counts.len()];
    loop {
        f(&idx)?;
        let mut j = counts.len();
        loop {
            if j == 0 {
                return Ok(());
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// True iff the stationarity and complementarity residuals at the feasible
/// rescaling of `θ` are within tolerance, using the exact subdifferential.
pub fn certify_kkt(
    model: &Model<f64>,
    theta: &Params<f64>,
    data: &Dataset<f64>,
    algo_norm: &NormSpec,
    tol_eps: f64,
    tol_delta: f64,
) -> Result<bool> {
    let opts = KktOptions { subgradient_tol: 0.0 };
    let r = kkt_residuals(model, theta, data, LossSpec::Exponential, algo_norm, None, &opts)?;
    Ok(r.eps <= tol_eps && r.delta <= tol_delta)
}
