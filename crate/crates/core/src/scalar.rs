//! Scalar abstraction shared by the numerical modules.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar used throughout the physics code: `f32` or `f64`.
///
/// Everything needed comes from [`RealField`] (transcendentals, constants,
/// ordering) plus lossless-enough conversion from and to `f64` literals.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}

/// Numerical tolerance `base`, widened to `1000 * epsilon` for scalar types
/// too coarse to honour it (i.e. `f32`).
pub fn tol<T: Real>(base: f64) -> T {
    let eps = to_f64(T::default_epsilon());
    lit(base.max(1e3 * eps))
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// `exp(-i * phase)`.
#[inline]
pub fn phasor<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), -phase.sin())
}
