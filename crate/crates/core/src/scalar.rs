use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar the numerical core is written against: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + Sum + 'static
{
    /// Converts an `f64` literal, panicking only for values the type cannot hold.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative cutoff under which singular values / eigenvalues are treated as zero.
    #[inline]
    fn rank_tolerance() -> Self {
        Self::lit(1e-12).max(Self::epsilon())
    }

    /// `sign` with `sign(0) = 0` (and `sign(NaN) = NaN`).
    #[inline]
    fn sign0(self) -> Self {
        if self > Self::zero() {
            Self::one()
        } else if self < Self::zero() {
            -Self::one()
        } else {
            self
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
