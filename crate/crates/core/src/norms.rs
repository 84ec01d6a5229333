//! Norm geometry: norm and dual-norm values, steepest-descent directions and
//! norm subgradients for every algorithm norm.
//!
//! `L1`, `L2` and `Linf` act on the flat coordinate view. `SpectralPerBlock`
//! is the max over blocks of the largest singular value, and `ModularMax`
//! is the max over blocks of a per-block norm. Both composites share the
//! duality rules of a max of norms: the dual is the sum of block duals and
//! the unit steepest direction is assembled block by block.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, thin_svd, Matrix};
use crate::params::Params;
use crate::scalar::Scalar;

/// Declarative description of an algorithm norm.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NormSpec {
    L1,
    L2,
    Linf,
    SpectralPerBlock,
    /// One non-composite norm per parameter block, combined by a max.
    ModularMax(Vec<NormSpec>),
}

/// Norm acting on a single block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Atom {
    L1,
    L2,
    Linf,
    Spectral,
}

enum Layout {
    Flat(Atom),
    PerBlock(Vec<Atom>),
}

impl NormSpec {
    /// Checks that this spec can be applied to parameters with `num_blocks` blocks.
    pub fn validate(&self, num_blocks: usize) -> Result<()> {
        self.layout(num_blocks).map(|_| ())
    }

    fn layout(&self, num_blocks: usize) -> Result<Layout> {
        Ok(match self {
            NormSpec::L1 => Layout::Flat(Atom::L1),
            NormSpec::L2 => Layout::Flat(Atom::L2),
            NormSpec::Linf => Layout::Flat(Atom::Linf),
            NormSpec::SpectralPerBlock => Layout::PerBlock(vec![Atom::Spectral; num_blocks]),
            NormSpec::ModularMax(inner) => {
                if inner.len() != num_blocks {
                    return Err(Error::InvalidNorm(format!(
                        "modular norm lists {} block norms for {} blocks",
                        inner.len(),
                        num_blocks
                    )));
                }
                let atoms = inner
                    .iter()
                    .map(|n| match n {
                        NormSpec::L1 => Ok(Atom::L1),
                        NormSpec::L2 => Ok(Atom::L2),
                        NormSpec::Linf => Ok(Atom::Linf),
                        NormSpec::SpectralPerBlock => Ok(Atom::Spectral),
                        NormSpec::ModularMax(_) => Err(Error::InvalidNorm(
                            "modular norms cannot be nested".to_string(),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Layout::PerBlock(atoms)
            }
        })
    }

    /// Short stable name used in logs and config files.
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSpec::L1 => f.write_str("l1"),
            NormSpec::L2 => f.write_str("l2"),
            NormSpec::Linf => f.write_str("linf"),
            NormSpec::SpectralPerBlock => f.write_str("spectral"),
            NormSpec::ModularMax(inner) => {
                f.write_str("modular(")?;
                for (i, n) in inner.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{n}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    /// Parses `l1`, `l2`, `linf`, `spectral` or `modular(l2,linf,...)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "l1" | "cd" => return Ok(NormSpec::L1),
            "l2" | "gd" => return Ok(NormSpec::L2),
            "linf" | "sd" => return Ok(NormSpec::Linf),
            "spectral" => return Ok(NormSpec::SpectralPerBlock),
            _ => {}
        }
        if let Some(body) = t.strip_prefix("modular(").and_then(|r| r.strip_suffix(')')) {
            let inner = body
                .split(',')
                .map(|p| p.parse::<NormSpec>())
                .collect::<Result<Vec<_>>>()?;
            if inner.iter().any(|n| matches!(n, NormSpec::ModularMax(_))) {
                return Err(Error::InvalidNorm("modular norms cannot be nested".into()));
            }
            return Ok(NormSpec::ModularMax(inner));
        }
        Err(Error::InvalidNorm(format!("unknown norm `{s}`")))
    }
}

fn flat_matrix<S: Scalar>(v: &Params<S>) -> Matrix<S> {
    Matrix::column(v.to_flat())
}

fn unflatten<S: Scalar>(like: &Params<S>, m: Matrix<S>) -> Params<S> {
    Params::from_flat(&like.shapes(), m.as_slice()).expect("flat length preserved")
}

/// Lowest index achieving the maximum of `key`.
fn argmax_by<S: Scalar>(values: impl Iterator<Item = S>) -> Option<(usize, S)> {
    let mut best: Option<(usize, S)> = None;
    for (i, v) in values.enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

impl Atom {
    fn value<S: Scalar>(self, m: &Matrix<S>) -> Result<S> {
        let xs = m.as_slice();
        Ok(match self {
            Atom::L1 => xs.iter().map(|v| v.abs()).sum(),
            Atom::L2 => xs.iter().map(|&v| v * v).sum::<S>().sqrt(),
            Atom::Linf => m.max_abs(),
            Atom::Spectral => thin_svd(m)?.sigma.first().copied().unwrap_or(S::zero()),
        })
    }

    fn dual<S: Scalar>(self, m: &Matrix<S>) -> Result<S> {
        let xs = m.as_slice();
        Ok(match self {
            Atom::L1 => m.max_abs(),
            Atom::L2 => xs.iter().map(|&v| v * v).sum::<S>().sqrt(),
            Atom::Linf => xs.iter().map(|v| v.abs()).sum(),
            Atom::Spectral => thin_svd(m)?.sigma.iter().copied().sum(),
        })
    }

    /// Unit-norm minimizer of `<d, g>` and the dual value `||g||_*`.
    fn unit_direction<S: Scalar>(self, g: &Matrix<S>) -> Result<(Matrix<S>, S)> {
        let (r, c) = g.shape();
        let mut d = Matrix::zeros(r, c);
        let dual = match self {
            Atom::L1 => {
                if let Some((j, gmax)) = argmax_by(g.as_slice().iter().map(|v| v.abs())) {
                    if gmax > S::zero() {
                        d.as_mut_slice()[j] = -g.as_slice()[j].sign0();
                    }
                    gmax
                } else {
                    S::zero()
                }
            }
            Atom::L2 => {
                let n = self.dual(g)?;
                if n > S::zero() {
                    d = g.scaled(-S::one() / n);
                }
                n
            }
            Atom::Linf => {
                for (di, &gi) in d.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *di = -gi.sign0();
                }
                g.as_slice().iter().map(|v| v.abs()).sum()
            }
            Atom::Spectral => {
                let svd = thin_svd(g)?;
                if svd.rank() > 0 {
                    d = svd.polar().scaled(-S::one());
                }
                svd.sigma.iter().copied().sum()
            }
        };
        Ok((d, dual))
    }

    fn subgradient<S: Scalar>(self, theta: &Matrix<S>) -> Result<Matrix<S>> {
        let (r, c) = theta.shape();
        let xs = theta.as_slice();
        Ok(match self {
            Atom::L1 => Matrix::from_vec(r, c, xs.iter().map(|v| v.sign0()).collect()),
            Atom::L2 => theta.scaled(S::one() / self.value(theta)?),
            Atom::Linf => {
                let mut n = Matrix::zeros(r, c);
                if let Some((j, _)) = argmax_by(xs.iter().map(|v| v.abs())) {
                    n.as_mut_slice()[j] = xs[j].sign0();
                }
                n
            }
            Atom::Spectral => {
                let svd = thin_svd(theta)?;
                let u1 = svd.u.col_to_vec(0);
                let v1 = svd.v.col_to_vec(0);
                let mut n = Matrix::zeros(r, c);
                for i in 0..r {
                    for j in 0..c {
                        n[(i, j)] = u1[i] * v1[j];
                    }
                }
                n
            }
        })
    }
}

fn per_block_values<S: Scalar>(atoms: &[Atom], v: &Params<S>) -> Result<Vec<S>> {
    atoms
        .iter()
        .zip(v.blocks())
        .map(|(a, b)| a.value(b))
        .collect()
}

fn check_finite<S: Scalar>(v: &Params<S>, what: &'static str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `||v||` under `spec`.
pub fn norm_value<S: Scalar>(spec: &NormSpec, v: &Params<S>) -> Result<S> {
    match spec.layout(v.num_blocks())? {
        Layout::Flat(a) => a.value(&flat_matrix(v)),
        Layout::PerBlock(atoms) => Ok(per_block_values(&atoms, v)?
            .into_iter()
            .fold(S::zero(), S::max)),
    }
}

/// Dual norm `||g||_*` of `spec`.
pub fn dual_norm_value<S: Scalar>(spec: &NormSpec, g: &Params<S>) -> Result<S> {
    match spec.layout(g.num_blocks())? {
        Layout::Flat(a) => a.dual(&flat_matrix(g)),
        Layout::PerBlock(atoms) => atoms
            .iter()
            .zip(g.blocks())
            .map(|(a, b)| a.dual(b))
            .sum(),
    }
}

/// Unit steepest direction `d` (`||d|| = 1`, `<d, g> = -||g||_*`) together with `||g||_*`.
///
/// Returns a zero direction and zero dual value when `g = 0`.
pub fn unit_steepest_direction<S: Scalar>(spec: &NormSpec, g: &Params<S>) -> Result<(Params<S>, S)> {
    check_finite(g, "gradient")?;
    match spec.layout(g.num_blocks())? {
        Layout::Flat(a) => {
            let (d, dual) = a.unit_direction(&flat_matrix(g))?;
            Ok((unflatten(g, d), dual))
        }
        Layout::PerBlock(atoms) => {
            let mut dual = S::zero();
            let mut blocks = Vec::with_capacity(atoms.len());
            for (a, b) in atoms.iter().zip(g.blocks()) {
                let (d, db) = a.unit_direction(b)?;
                dual = dual + db;
                blocks.push(d);
            }
            Ok((Params::new(blocks), dual))
        }
    }
}

/// Steepest-descent step direction `argmin_{||u|| <= ||g||_*} <u, g>`.
///
/// Satisfies `||Δ|| = ||g||_*` and `<Δ, g> = -||g||_*^2`.
pub fn steepest_direction<S: Scalar>(spec: &NormSpec, g: &Params<S>) -> Result<Params<S>> {
    if *spec == NormSpec::L2 {
        check_finite(g, "gradient")?;
        return Ok(g.scaled(-S::one()));
    }
    let (mut d, dual) = unit_steepest_direction(spec, g)?;
    d.scale_mut(dual);
    Ok(d)
}

/// A deterministic element `n` of the norm subdifferential at `theta`:
/// `<n, theta> = ||theta||` and `||n||_* <= 1`.
///
/// Ties between coordinates or blocks go to the lowest index.
pub fn norm_subgradient<S: Scalar>(spec: &NormSpec, theta: &Params<S>) -> Result<Params<S>> {
    check_finite(theta, "parameters")?;
    if theta.is_zero() {
        return Err(Error::ZeroVector("norm subgradient"));
    }
    match spec.layout(theta.num_blocks())? {
        Layout::Flat(a) => Ok(unflatten(theta, a.subgradient(&flat_matrix(theta))?)),
        Layout::PerBlock(atoms) => {
            let values = per_block_values(&atoms, theta)?;
            let (k, _) = argmax_by(values.into_iter()).expect("at least one block");
            let mut out = theta.zeros_like();
            *out.block_mut(k) = atoms[k].subgradient(theta.block(k))?;
            Ok(out)
        }
    }
}

/// Generalized Bregman divergence of `½||·||_*²` with subgradient choice `m`:
/// `½||y||_*² − ½||z||_*² − <m, y − z>`.
///
/// For norms whose dual square is not strictly convex this can be negative.
pub fn bregman_divergence<S: Scalar>(
    spec: &NormSpec,
    y: &Params<S>,
    z: &Params<S>,
    m: &Params<S>,
) -> Result<S> {
    y.check_same_shape(z)?;
    y.check_same_shape(m)?;
    let half = S::lit(0.5);
    let ny = dual_norm_value(spec, y)?;
    let nz = dual_norm_value(spec, z)?;
    let diff = y.sub(z)?;
    Ok(half * ny * ny - half * nz * nz - m.dot(&diff)?)
}

// ---------------------------------------------------------------------------
// Approximate subdifferentials
// ---------------------------------------------------------------------------

/// Euclidean projection of `v` onto the probability simplex.
fn project_simplex<S: Scalar>(v: &[S]) -> Vec<S> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumsum = S::zero();
    let mut shift = S::zero();
    for (i, &u) in sorted.iter().enumerate() {
        cumsum = cumsum + u;
        let t = (cumsum - S::one()) / S::from_usize(i + 1).expect("index");
        if u - t > S::zero() {
            shift = t;
        }
    }
    v.iter().map(|&x| (x - shift).max(S::zero())).collect()
}

/// Enlarged subdifferential of one block norm at `theta`.
///
/// Near-ties within relative tolerance `tol` are treated as exact ties: ℓ1
/// coordinates with `|θ_j| <= tol·||θ||∞` count as zero, ℓ∞ coordinates with
/// `|θ_j| >= (1 − tol)·||θ||∞` count as maximal and singular values within
/// `(1 − tol)·σ₁` span the top singular subspace.
enum AtomFace<S> {
    Point(Matrix<S>),
    Box { fixed: Vec<Option<S>>, shape: (usize, usize) },
    Simplex { active: Vec<(usize, S)>, shape: (usize, usize) },
    Spectraplex { u: Matrix<S>, v: Matrix<S> },
}

impl<S: Scalar> AtomFace<S> {
    fn new(atom: Atom, theta: &Matrix<S>, tol: S) -> Result<Self> {
        let xs = theta.as_slice();
        let shape = theta.shape();
        let vmax = theta.max_abs();
        Ok(match atom {
            Atom::L2 => AtomFace::Point(atom.subgradient(theta)?),
            Atom::L1 => AtomFace::Box {
                fixed: xs
                    .iter()
                    .map(|&x| if x.abs() <= tol * vmax { None } else { Some(x.sign0()) })
                    .collect(),
                shape,
            },
            Atom::Linf => AtomFace::Simplex {
                active: xs
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| x.abs() >= (S::one() - tol) * vmax)
                    .map(|(j, x)| (j, x.sign0()))
                    .collect(),
                shape,
            },
            Atom::Spectral => {
                let svd = thin_svd(theta)?;
                let s1 = svd.sigma[0];
                let k = svd
                    .sigma
                    .iter()
                    .take_while(|&&s| s >= (S::one() - tol) * s1)
                    .count();
                let take = |m: &Matrix<S>| {
                    let mut out = Matrix::zeros(m.rows(), k);
                    for r in 0..m.rows() {
                        for c in 0..k {
                            out[(r, c)] = m[(r, c)];
                        }
                    }
                    out
                };
                AtomFace::Spectraplex {
                    u: take(&svd.u),
                    v: take(&svd.v),
                }
            }
        })
    }

    /// Euclidean projection of `t` onto the face.
    fn project(&self, t: &Matrix<S>) -> Result<Matrix<S>> {
        Ok(match self {
            AtomFace::Point(p) => p.clone(),
            AtomFace::Box { fixed, shape } => Matrix::from_vec(
                shape.0,
                shape.1,
                fixed
                    .iter()
                    .zip(t.as_slice())
                    .map(|(f, &x)| f.unwrap_or_else(|| x.max(-S::one()).min(S::one())))
                    .collect(),
            ),
            AtomFace::Simplex { active, shape } => {
                let coords: Vec<S> = active.iter().map(|&(j, s)| t.as_slice()[j] * s).collect();
                let w = project_simplex(&coords);
                let mut out = Matrix::zeros(shape.0, shape.1);
                for (&(j, s), wj) in active.iter().zip(w) {
                    out.as_mut_slice()[j] = s * wj;
                }
                out
            }
            AtomFace::Spectraplex { u, v } => {
                let p = u.transpose().matmul(t).matmul(v);
                let sym = symmetrize(&p);
                let eig = symmetric_eigen(&sym)?;
                let w = project_simplex(&eig.values);
                let core = SpectralWeights { eig: &eig, w: &w }.rebuild();
                u.matmul(&core).matmul(&v.transpose())
            }
        })
    }

    /// Minimizer of `<grad, n>` over the face.
    fn linear_minimizer(&self, grad: &Matrix<S>) -> Result<Matrix<S>> {
        Ok(match self {
            AtomFace::Point(p) => p.clone(),
            AtomFace::Box { fixed, shape } => Matrix::from_vec(
                shape.0,
                shape.1,
                fixed
                    .iter()
                    .zip(grad.as_slice())
                    .map(|(f, &g)| f.unwrap_or_else(|| -g.sign0()))
                    .collect(),
            ),
            AtomFace::Simplex { active, shape } => {
                let (best, _) = argmax_by(active.iter().map(|&(j, s)| -grad.as_slice()[j] * s))
                    .expect("nonempty active set");
                let (j, s) = active[best];
                let mut out = Matrix::zeros(shape.0, shape.1);
                out.as_mut_slice()[j] = s;
                out
            }
            AtomFace::Spectraplex { u, v } => {
                let p = symmetrize(&u.transpose().matmul(grad).matmul(v));
                let eig = symmetric_eigen(&p)?;
                let k = eig.values.len();
                let z = eig.vectors.col_to_vec(k - 1);
                let mut zz = Matrix::zeros(k, k);
                for i in 0..k {
                    for j in 0..k {
                        zz[(i, j)] = z[i] * z[j];
                    }
                }
                u.matmul(&zz).matmul(&v.transpose())
            }
        })
    }
}

struct SpectralWeights<'a, S> {
    eig: &'a crate::linalg::SymmetricEigen<S>,
    w: &'a [S],
}

impl<S: Scalar> SpectralWeights<'_, S> {
    fn rebuild(&self) -> Matrix<S> {
        let n = self.w.len();
        let mut out = Matrix::zeros(n, n);
        for (k, &wk) in self.w.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] =
                        out[(i, j)] + wk * self.eig.vectors[(i, k)] * self.eig.vectors[(j, k)];
                }
            }
        }
        out
    }
}

fn symmetrize<S: Scalar>(p: &Matrix<S>) -> Matrix<S> {
    let half = S::lit(0.5);
    let mut s = p.clone();
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            s[(i, j)] = half * (p[(i, j)] + p[(j, i)]);
        }
    }
    s
}

const FRANK_WOLFE_ITERS: usize = 2000;

/// Element of the tolerance-enlarged subdifferential `∂_tol ||theta||` closest
/// (in ℓ2) to `target`.
///
/// With `tol = 0` the set is the exact subdifferential; positive tolerances
/// treat near-ties as ties, which is how finite-time iterates approach the
/// non-smooth points of ℓ1, ℓ∞ and spectral geometries. Composite norms with
/// several near-maximal blocks are handled by Frank–Wolfe with exact line
/// search over the convex hull of the block faces.
pub fn nearest_subgradient<S: Scalar>(
    spec: &NormSpec,
    theta: &Params<S>,
    target: &Params<S>,
    tol: S,
) -> Result<Params<S>> {
    check_finite(theta, "parameters")?;
    theta.check_same_shape(target)?;
    if theta.is_zero() {
        return Err(Error::ZeroVector("norm subgradient"));
    }
    match spec.layout(theta.num_blocks())? {
        Layout::Flat(a) => {
            let face = AtomFace::new(a, &flat_matrix(theta), tol)?;
            Ok(unflatten(theta, face.project(&flat_matrix(target))?))
        }
        Layout::PerBlock(atoms) => {
            let values = per_block_values(&atoms, theta)?;
            let vmax = values.iter().copied().fold(S::zero(), S::max);
            let active: Vec<usize> = (0..values.len())
                .filter(|&b| values[b] >= (S::one() - tol) * vmax && values[b] > S::zero())
                .collect();
            let faces = active
                .iter()
                .map(|&b| AtomFace::new(atoms[b], theta.block(b), tol))
                .collect::<Result<Vec<_>>>()?;
            if active.len() == 1 {
                let mut out = theta.zeros_like();
                *out.block_mut(active[0]) = faces[0].project(target.block(active[0]))?;
                return Ok(out);
            }
            // Frank–Wolfe on ½||n − target||² over conv(∪ faces).
            let mut n = theta.zeros_like();
            *n.block_mut(active[0]) = faces[0].project(target.block(active[0]))?;
            for _ in 0..FRANK_WOLFE_ITERS {
                let grad = n.sub(target)?;
                let mut best: Option<(S, usize, Matrix<S>)> = None;
                for (f, &b) in faces.iter().zip(&active) {
                    let vtx = f.linear_minimizer(grad.block(b))?;
                    let score: S = vtx
                        .as_slice()
                        .iter()
                        .zip(grad.block(b).as_slice())
                        .map(|(&x, &g)| x * g)
                        .sum();
                    if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                        best = Some((score, b, vtx));
                    }
                }
                let (_, b, vtx) = best.expect("nonempty faces");
                let mut vertex = theta.zeros_like();
                *vertex.block_mut(b) = vtx;
                let dir = vertex.sub(&n)?;
                let denom = dir.dot(&dir)?;
                if denom <= S::zero() {
                    break;
                }
                let step = (-grad.dot(&dir)? / denom).max(S::zero()).min(S::one());
                if step <= S::epsilon() {
                    break;
                }
                n.axpy(step, &dir)?;
            }
            Ok(n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Params<f64> {
        Params::from_vector(xs.to_vec())
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn norm_values() {
        assert_eq!(norm_value(&NormSpec::L1, &v(&[3.0, -4.0])).unwrap(), 7.0);
        let d = Params::new(vec![Matrix::diag(&[2.0, 1.0])]);
        assert!(close(norm_value(&NormSpec::SpectralPerBlock, &d).unwrap(), 2.0));
        let blocks = Params::new(vec![
            Matrix::column(vec![3.0, 4.0]),
            Matrix::column(vec![-5.0, 1.0]),
        ]);
        let modular = NormSpec::ModularMax(vec![NormSpec::L2, NormSpec::Linf]);
        assert_eq!(norm_value(&modular, &blocks).unwrap(), 5.0);
    }

    #[test]
    fn dual_values() {
        assert_eq!(dual_norm_value(&NormSpec::L1, &v(&[3.0, -4.0])).unwrap(), 4.0);
        let d = Params::new(vec![Matrix::diag(&[2.0, 1.0])]);
        assert!(close(dual_norm_value(&NormSpec::SpectralPerBlock, &d).unwrap(), 3.0));
        let blocks = Params::new(vec![
            Matrix::column(vec![3.0, 4.0]),
            Matrix::column(vec![0.0, 0.0]),
        ]);
        let modular = NormSpec::ModularMax(vec![NormSpec::L2, NormSpec::L2]);
        assert_eq!(dual_norm_value(&modular, &blocks).unwrap(), 5.0);
    }

    #[test]
    fn steepest_closed_forms() {
        let g = v(&[3.0, 4.0]);
        assert_eq!(steepest_direction(&NormSpec::L2, &g).unwrap().to_flat(), vec![-3.0, -4.0]);

        let g = v(&[3.0, -4.0]);
        let cd = steepest_direction(&NormSpec::L1, &g).unwrap();
        assert_eq!(cd.to_flat(), vec![0.0, 4.0]);
        assert_eq!(cd.dot(&g).unwrap(), -16.0);

        let sd = steepest_direction(&NormSpec::Linf, &g).unwrap();
        assert_eq!(sd.to_flat(), vec![-7.0, 7.0]);
        assert_eq!(sd.dot(&g).unwrap(), -49.0);

        let gm = Params::new(vec![Matrix::diag(&[2.0, 1.0])]);
        let sp = steepest_direction(&NormSpec::SpectralPerBlock, &gm).unwrap();
        let expect = Matrix::diag(&[-3.0, -3.0]);
        assert!(sp.block(0).sub(&expect).max_abs() < 1e-12);
        assert!(close(norm_value(&NormSpec::SpectralPerBlock, &sp).unwrap(), 3.0));
    }

    #[test]
    fn zero_gradient_gives_zero_direction() {
        for spec in [NormSpec::L1, NormSpec::L2, NormSpec::Linf, NormSpec::SpectralPerBlock] {
            let d = steepest_direction(&spec, &v(&[0.0, 0.0, 0.0])).unwrap();
            assert!(d.is_zero(), "{spec}");
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        assert_eq!(
            steepest_direction(&NormSpec::L2, &v(&[f64::NAN])),
            Err(Error::NonFinite("gradient"))
        );
    }

    #[test]
    fn subgradient_closed_forms() {
        let n = norm_subgradient(&NormSpec::L2, &v(&[3.0, 4.0])).unwrap();
        assert!(close(n.to_flat()[0], 0.6) && close(n.to_flat()[1], 0.8));
        let th = v(&[3.0, -4.0, 0.0]);
        let n = norm_subgradient(&NormSpec::L1, &th).unwrap();
        assert_eq!(n.to_flat(), vec![1.0, -1.0, 0.0]);
        assert_eq!(n.dot(&th).unwrap(), 7.0);
        let th = v(&[3.0, -4.0]);
        let n = norm_subgradient(&NormSpec::Linf, &th).unwrap();
        assert_eq!(n.to_flat(), vec![0.0, -1.0]);
        assert_eq!(n.dot(&th).unwrap(), 4.0);
    }

    #[test]
    fn linf_subgradient_ties_go_to_lowest_index() {
        let n = norm_subgradient(&NormSpec::Linf, &v(&[2.0, -2.0])).unwrap();
        assert_eq!(n.to_flat(), vec![1.0, 0.0]);
        let th = Params::new(vec![Matrix::column(vec![1.0]), Matrix::column(vec![-1.0])]);
        let spec = NormSpec::ModularMax(vec![NormSpec::L2, NormSpec::L2]);
        let n = norm_subgradient(&spec, &th).unwrap();
        assert_eq!(n.to_flat(), vec![1.0, 0.0]);
    }

    #[test]
    fn subgradient_at_zero_is_an_error() {
        assert_eq!(
            norm_subgradient(&NormSpec::L2, &v(&[0.0, 0.0])),
            Err(Error::ZeroVector("norm subgradient"))
        );
    }

    #[test]
    fn modular_validation() {
        let th = v(&[1.0]);
        let wrong_len = NormSpec::ModularMax(vec![NormSpec::L2, NormSpec::L2]);
        assert!(matches!(norm_value(&wrong_len, &th), Err(Error::InvalidNorm(_))));
        let nested = NormSpec::ModularMax(vec![NormSpec::ModularMax(vec![NormSpec::L2])]);
        assert!(matches!(norm_value(&nested, &th), Err(Error::InvalidNorm(_))));
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["l1", "l2", "linf", "spectral", "modular(spectral,l2)"] {
            let n: NormSpec = s.parse().unwrap();
            assert_eq!(n.to_string(), s);
        }
        assert!("modular(modular(l2))".parse::<NormSpec>().is_err());
        assert!("l3".parse::<NormSpec>().is_err());
    }

    #[test]
    fn bregman_examples() {
        let y = v(&[0.0, 1.0]);
        let z = v(&[1.0, 0.0]);
        assert_eq!(bregman_divergence(&NormSpec::L2, &y, &z, &z).unwrap(), 1.0);
        assert_eq!(bregman_divergence(&NormSpec::L1, &y, &y, &z).unwrap(), 0.0);
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for x in &p {
            assert!(close(*x, 1.0 / 3.0));
        }
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn nearest_subgradient_with_zero_tolerance_is_exact() {
        let th = v(&[3.0, -4.0, 0.0]);
        let t = v(&[0.2, 0.3, 0.4]);
        let n = nearest_subgradient(&NormSpec::L1, &th, &t, 0.0).unwrap();
        assert_eq!(n.to_flat(), vec![1.0, -1.0, 0.4]);
        let n = nearest_subgradient(&NormSpec::Linf, &th, &t, 0.0).unwrap();
        assert_eq!(n.to_flat(), vec![0.0, -1.0, 0.0]);
    }

    #[test]
    fn nearest_subgradient_uses_near_ties() {
        let th = v(&[1.0, -0.999, 0.1]);
        let t = v(&[0.5, -0.5, 0.0]);
        let n = nearest_subgradient(&NormSpec::Linf, &th, &t, 1e-2).unwrap();
        assert!(close(n.to_flat()[0], 0.5) && close(n.to_flat()[1], -0.5));
        assert_eq!(n.to_flat()[2], 0.0);
    }

    #[test]
    fn composite_frank_wolfe_projection() {
        // Two tied blocks under a max of ℓ2 norms: the subdifferential is the
        // segment between the two block unit vectors.
        let th = Params::new(vec![Matrix::column(vec![1.0, 0.0]), Matrix::column(vec![0.0, 1.0])]);
        let t = Params::new(vec![Matrix::column(vec![0.5, 0.0]), Matrix::column(vec![0.0, 0.5])]);
        let spec = NormSpec::ModularMax(vec![NormSpec::L2, NormSpec::L2]);
        let n = nearest_subgradient(&spec, &th, &t, 1e-3).unwrap();
        let err = n.sub(&t).unwrap().l2_norm();
        assert!(err < 1e-6, "err {err}");
    }
}
