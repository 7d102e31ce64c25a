use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::Real;

/// Scalar arithmetic shared by plain numbers and tape variables.
///
/// Jet coefficients and PDE residual formulas are written once against this
/// trait; instantiating them with [`Real`] evaluates, instantiating them with
/// [`Var`](super::Var) records on a tape for a later reverse sweep.
pub trait JetScalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<Real, Output = Self>
    + Sub<Real, Output = Self>
    + Mul<Real, Output = Self>
    + Div<Real, Output = Self>
{
    fn value(&self) -> Real;
    /// A constant living in the same context as `self`.
    fn lift(&self, c: Real) -> Self;
    fn tanh(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, p: Real) -> Self;

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl JetScalar for Real {
    #[inline]
    fn value(&self) -> Real {
        *self
    }
    #[inline]
    fn lift(&self, c: Real) -> Self {
        c
    }
    #[inline]
    fn tanh(&self) -> Self {
        Real::tanh(*self)
    }
    #[inline]
    fn sin(&self) -> Self {
        Real::sin(*self)
    }
    #[inline]
    fn cos(&self) -> Self {
        Real::cos(*self)
    }
    #[inline]
    fn exp(&self) -> Self {
        Real::exp(*self)
    }
    #[inline]
    fn ln(&self) -> Self {
        Real::ln(*self)
    }
    #[inline]
    fn sqrt(&self) -> Self {
        Real::sqrt(*self)
    }
    #[inline]
    fn recip(&self) -> Self {
        Real::recip(*self)
    }
    #[inline]
    fn powi(&self, n: i32) -> Self {
        Real::powi(*self, n)
    }
    #[inline]
    fn powf(&self, p: Real) -> Self {
        Real::powf(*self, p)
    }
}
