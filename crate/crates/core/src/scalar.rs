//! The floating-point abstraction every numerical routine in the crate is generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable for geometry, quadrature, assembly and the sparse direct solve.
///
/// Implemented for `f32` and `f64`. The `faer` bound is what lets the linear algebra
/// backend factorize matrices of the same type the assembly produced.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + faer::traits::RealField
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or table entry.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Point or vector in the plane.
pub type Point2<T> = [T; 2];

#[inline]
pub(crate) fn sub<T: Scalar>(a: Point2<T>, b: Point2<T>) -> Point2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: Point2<T>, b: Point2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm<T: Scalar>(a: Point2<T>) -> T {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn dist<T: Scalar>(a: Point2<T>, b: Point2<T>) -> T {
    norm(sub(a, b))
}

#[inline]
pub(crate) fn cross<T: Scalar>(a: Point2<T>, b: Point2<T>) -> T {
    a[0] * b[1] - a[1] * b[0]
}
