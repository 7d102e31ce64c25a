//! Second-order forward-mode jets over the input coordinates.
//!
//! A jet carries a value, all first partials `∂/∂X₁ … ∂/∂X_d, ∂/∂t` and the
//! diagonal spatial second partials `∂²/∂X_j²`. Mixed second partials are not
//! tracked. The coefficient type is generic so the same propagation runs on
//! plain numbers or on tape variables.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::JetScalar;
use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet<S> {
    pub value: S,
    /// `d + 1` entries; the last one is the time derivative.
    pub first: Vec<S>,
    /// `d` entries, spatial coordinates only.
    pub second: Vec<S>,
}

/// Output of the network (or any jet evaluation) at one space-time point.
pub type InputJet = Jet<Real>;

impl<S: JetScalar> Jet<S> {
    /// Constant jet over `spatial_dim` spatial coordinates.
    pub fn constant(value: S, spatial_dim: usize) -> Self {
        let zero = value.lift(0.0);
        Self {
            value,
            first: vec![zero.clone(); spatial_dim + 1],
            second: vec![zero; spatial_dim],
        }
    }

    /// Jet of the input coordinate `index` (time is `index == spatial_dim`).
    pub fn coordinate(value: S, index: usize, spatial_dim: usize) -> Self {
        let mut jet = Self::constant(value, spatial_dim);
        jet.first[index] = jet.value.lift(1.0);
        jet
    }

    pub fn spatial_dim(&self) -> usize {
        self.second.len()
    }

    /// Time derivative.
    pub fn dt(&self) -> &S {
        &self.first[self.spatial_dim()]
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value`.
    pub fn chain(&self, f0: S, f1: S, f2: S) -> Self {
        let first = self.first.iter().map(|a| f1.clone() * a.clone()).collect();
        let second = self
            .second
            .iter()
            .zip(&self.first)
            .map(|(ajj, aj)| f1.clone() * ajj.clone() + f2.clone() * aj.square())
            .collect();
        Self {
            value: f0,
            first,
            second,
        }
    }

    pub fn tanh(&self) -> Self {
        let t = self.value.tanh();
        let s = (t.square() - 1.0) * -1.0;
        let f2 = t.clone() * s.clone() * -2.0;
        self.chain(t, s, f2)
    }

    pub fn sin(&self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(s.clone(), c, -s)
    }

    pub fn cos(&self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.chain(c.clone(), -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e.clone(), e.clone(), e)
    }

    pub fn recip(&self) -> Self {
        let r = self.value.recip();
        let r2 = r.square();
        let f2 = r2.clone() * r.clone() * 2.0;
        self.chain(r, -r2, f2)
    }

    pub fn powf(&self, p: Real) -> Self {
        let f0 = self.value.powf(p);
        let f1 = if p == 0.0 {
            self.value.lift(0.0)
        } else {
            self.value.powf(p - 1.0) * p
        };
        let f2 = if p == 0.0 || p == 1.0 {
            self.value.lift(0.0)
        } else {
            self.value.powf(p - 2.0) * (p * (p - 1.0))
        };
        self.chain(f0, f1, f2)
    }

    pub fn powi(&self, n: i32) -> Self {
        let f0 = self.value.powi(n);
        let f1 = if n == 0 {
            self.value.lift(0.0)
        } else {
            self.value.powi(n - 1) * n as Real
        };
        let f2 = if n == 0 || n == 1 {
            self.value.lift(0.0)
        } else {
            self.value.powi(n - 2) * (n * (n - 1)) as Real
        };
        self.chain(f0, f1, f2)
    }

    /// `Σ w_k x_k + b` over jets.
    pub fn affine(weights: &[S], inputs: &[Jet<S>], bias: S) -> Self {
        assert_eq!(weights.len(), inputs.len(), "affine arity mismatch");
        assert!(!inputs.is_empty(), "affine over no inputs");
        let mut acc = inputs[0].scale(&weights[0]);
        for (w, x) in weights.iter().zip(inputs).skip(1) {
            acc = acc + x.scale(w);
        }
        acc.value = acc.value + bias;
        acc
    }

    pub fn scale(&self, c: &S) -> Self {
        self.map(|a| a.clone() * c.clone())
    }

    fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Self {
            value: f(&self.value),
            first: self.first.iter().map(&f).collect(),
            second: self.second.iter().map(&f).collect(),
        }
    }

    fn zip_with(self, rhs: Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!(self.first.len(), rhs.first.len(), "jet dimension mismatch");
        Self {
            value: f(self.value, rhs.value),
            first: self.first.into_iter().zip(rhs.first).map(|(a, b)| f(a, b)).collect(),
            second: self.second.into_iter().zip(rhs.second).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

impl InputJet {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.first.iter().all(|v| v.is_finite()) && self.second.iter().all(|v| v.is_finite())
    }
}

impl<S: JetScalar> Add for Jet<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<S: JetScalar> Sub for Jet<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<S: JetScalar> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.first.len(), rhs.first.len(), "jet dimension mismatch");
        let a = &self;
        let b = &rhs;
        let first = a
            .first
            .iter()
            .zip(&b.first)
            .map(|(ak, bk)| a.value.clone() * bk.clone() + b.value.clone() * ak.clone())
            .collect();
        let second = (0..a.second.len())
            .map(|j| {
                a.value.clone() * b.second[j].clone()
                    + a.first[j].clone() * b.first[j].clone() * 2.0
                    + b.value.clone() * a.second[j].clone()
            })
            .collect();
        Self {
            value: a.value.clone() * b.value.clone(),
            first,
            second,
        }
    }
}

impl<S: JetScalar> Div for Jet<S> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<S: JetScalar> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|a| -a.clone())
    }
}

impl<S: JetScalar> Add<Real> for Jet<S> {
    type Output = Self;
    fn add(mut self, rhs: Real) -> Self {
        self.value = self.value + rhs;
        self
    }
}

impl<S: JetScalar> Sub<Real> for Jet<S> {
    type Output = Self;
    fn sub(mut self, rhs: Real) -> Self {
        self.value = self.value - rhs;
        self
    }
}

impl<S: JetScalar> Mul<Real> for Jet<S> {
    type Output = Self;
    fn mul(self, rhs: Real) -> Self {
        self.map(|a| a.clone() * rhs)
    }
}

impl<S: JetScalar> Div<Real> for Jet<S> {
    type Output = Self;
    fn div(self, rhs: Real) -> Self {
        self.map(|a| a.clone() / rhs)
    }
}
