//! Scalar abstraction shared by every numeric module.
//!
//! All matrix math is written against [`Real`], implemented for `f32` and
//! `f64`. Complex entries are `Complex<R>`.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::str::FromStr;

/// Real floating-point scalar usable by the simulator.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + FromStr + Default + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `R`.
pub type Cx<R> = Complex<R>;
/// Dense complex matrix.
pub type CMat<R> = DMatrix<Cx<R>>;
/// Dense complex column vector.
pub type CVec<R> = DVector<Cx<R>>;

/// Converts an `f64` literal into `R`.
#[inline]
pub fn lit<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts `R` back to `f64` for reporting.
#[inline]
pub fn to_f64<R: Real>(x: R) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}

#[inline]
pub fn cx<R: Real>(re: f64, im: f64) -> Cx<R> {
    Complex::new(lit(re), lit(im))
}

/// Squared modulus `|z|^2`.
#[inline]
pub fn abs2<R: Real>(z: Cx<R>) -> R {
    z.re * z.re + z.im * z.im
}
