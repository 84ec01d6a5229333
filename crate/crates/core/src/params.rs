use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Block-structured parameter vector.
///
/// Each block is a dense matrix (vectors are `n x 1`). The flat view visits
/// blocks in order and each block in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<S> {
    blocks: Vec<Matrix<S>>,
}

impl<S: Scalar> Params<S> {
    pub fn new(blocks: Vec<Matrix<S>>) -> Self {
        Self { blocks }
    }

    /// A single column-vector block.
    pub fn from_vector(values: Vec<S>) -> Self {
        Self::new(vec![Matrix::column(values)])
    }

    pub fn zeros(shapes: &[(usize, usize)]) -> Self {
        Self::new(shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect())
    }

    /// Rebuilds a parameter vector from block shapes and flat coordinates.
    pub fn from_flat(shapes: &[(usize, usize)], flat: &[S]) -> Result<Self> {
        let total: usize = shapes.iter().map(|&(r, c)| r * c).sum();
        if total != flat.len() {
            return Err(Error::ShapeMismatch {
                block: 0,
                expected: (total, 1),
                found: (flat.len(), 1),
            });
        }
        let mut offset = 0;
        let blocks = shapes
            .iter()
            .map(|&(r, c)| {
                let m = Matrix::from_vec(r, c, flat[offset..offset + r * c].to_vec());
                offset += r * c;
                m
            })
            .collect();
        Ok(Self { blocks })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shapes())
    }

    #[inline]
    pub fn blocks(&self) -> &[Matrix<S>] {
        &self.blocks
    }

    #[inline]
    pub fn blocks_mut(&mut self) -> &mut [Matrix<S>] {
        &mut self.blocks
    }

    #[inline]
    pub fn block(&self, i: usize) -> &Matrix<S> {
        &self.blocks[i]
    }

    #[inline]
    pub fn block_mut(&mut self, i: usize) -> &mut Matrix<S> {
        &mut self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<Matrix<S>> {
        self.blocks
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(Matrix::shape).collect()
    }

    /// Flat length `p`.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(Matrix::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> + '_ {
        self.blocks.iter().flat_map(|b| b.as_slice().iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut S> + '_ {
        self.blocks.iter_mut().flat_map(|b| b.as_mut_slice().iter_mut())
    }

    pub fn to_flat(&self) -> Vec<S> {
        self.iter().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|&v| v == S::zero())
    }

    /// Errors naming the first block whose shape differs from `other`.
    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::BlockCount {
                expected: self.blocks.len(),
                found: other.blocks.len(),
            });
        }
        for (i, (a, b)) in self.blocks.iter().zip(&other.blocks).enumerate() {
            if a.shape() != b.shape() {
                return Err(Error::ShapeMismatch {
                    block: i,
                    expected: a.shape(),
                    found: b.shape(),
                });
            }
        }
        Ok(())
    }

    pub fn check_shapes(&self, shapes: &[(usize, usize)]) -> Result<()> {
        if self.blocks.len() != shapes.len() {
            return Err(Error::BlockCount {
                expected: shapes.len(),
                found: self.blocks.len(),
            });
        }
        for (i, (b, &s)) in self.blocks.iter().zip(shapes).enumerate() {
            if b.shape() != s {
                return Err(Error::ShapeMismatch {
                    block: i,
                    expected: s,
                    found: b.shape(),
                });
            }
        }
        Ok(())
    }

    /// Euclidean inner product over the flat view.
    pub fn dot(&self, other: &Self) -> Result<S> {
        self.check_same_shape(other)?;
        Ok(self.iter().zip(other.iter()).map(|(&a, &b)| a * b).sum())
    }

    pub fn l2_norm(&self) -> S {
        self.iter().map(|&v| v * v).sum::<S>().sqrt()
    }

    pub fn scaled(&self, s: S) -> Self {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: S) {
        for v in self.iter_mut() {
            *v = *v * s;
        }
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: S, x: &Self) -> Result<()> {
        self.check_same_shape(x)?;
        for (a, &b) in self.iter_mut().zip(x.iter()) {
            *a = *a + alpha * b;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(S::one(), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-S::one(), other)?;
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        let mut out = self.clone();
        for v in out.iter_mut() {
            *v = f(*v);
        }
        out
    }

    /// Converts every coordinate to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Params<T> {
        Params::new(
            self.blocks
                .iter()
                .map(|b| {
                    let (r, c) = b.shape();
                    Matrix::from_vec(r, c, b.as_slice().iter().map(|&v| T::lit(v.as_f64())).collect())
                })
                .collect(),
        )
    }
}
