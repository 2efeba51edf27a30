//! Floating point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the iteration machinery is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Norms at or below this are treated as an exact zero when normalizing.
    fn zero_tol() -> Self;

    /// Converts an `f64` literal, saturating to the nearest representable value.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }
}

impl Scalar for f64 {
    fn zero_tol() -> Self {
        1e-300
    }
}

impl Scalar for f32 {
    fn zero_tol() -> Self {
        1e-36
    }
}

pub(crate) fn two<T: Scalar>() -> T {
    T::one() + T::one()
}

pub(crate) fn half<T: Scalar>() -> T {
    T::one() / two::<T>()
}
