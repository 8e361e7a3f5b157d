//! Numeric traits the analytics are written against.
//!
//! Measures, statistics and the RIPA pipeline are generic over [`Scalar`]
//! (implemented for `f32` and `f64`). Savitzky-Golay kernel construction only
//! needs field arithmetic, so it is generic over [`Field`], which is also
//! satisfied by exact rationals such as `num_rational::Ratio<i64>`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, Signed};

/// Real scalar used by the streaming measures.
pub trait Scalar:
    Float + Signed + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal or wire value into `Self`.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Ordered field with exact zero test, enough to solve the normal equations of
/// a polynomial least-squares fit.
pub trait Field: Num + Signed + FromPrimitive + Clone + PartialOrd + Debug {
    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer representable in field")
    }
}

impl<T> Field for T where T: Num + Signed + FromPrimitive + Clone + PartialOrd + Debug {}
