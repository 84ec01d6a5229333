use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Labeled binary classification examples, one row of `x` per example.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    pub x: Matrix<S>,
    /// Labels in `{-1, +1}`.
    pub y: Vec<S>,
    /// Free-form provenance (teacher seed, file digest, ...).
    pub meta: String,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(x: Matrix<S>, y: Vec<S>, meta: impl Into<String>) -> Result<Self> {
        let ds = Self {
            x,
            y,
            meta: meta.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn from_rows(rows: &[Vec<S>], y: Vec<S>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows), y, "")
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.is_empty() {
            return Err(Error::EmptyData);
        }
        if self.x.rows() != self.y.len() {
            return Err(Error::ShapeMismatch {
                block: 0,
                expected: (self.y.len(), self.x.cols()),
                found: self.x.shape(),
            });
        }
        if !self.x.is_finite() {
            return Err(Error::NonFinite("dataset features"));
        }
        if self.y.iter().any(|&l| l != S::one() && l != -S::one()) {
            return Err(Error::InvalidModel("labels must be +1 or -1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    #[inline]
    pub fn example(&self, i: usize) -> (&[S], S) {
        (self.x.row(i), self.y[i])
    }
}
