//! Scalar abstraction shared by the plain `f64` evaluation path and the
//! gradient-recording [`Var`](crate::tape::Var) path.
//!
//! Every model, payoff kernel and oracle that participates in meta-gradient
//! computation is written once against [`Real`]. Instantiated with `f64` it is
//! the fast forward path; instantiated with `Var` it records onto a tape. Both
//! instantiations perform the same floating point operations in the same
//! order, so recorded values are bitwise equal to the plain evaluation.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn relu(self) -> Self;
    fn leaky_relu(self, slope: f64) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::cst(0.0)
    }

    #[inline]
    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }

    /// Sequential sum, left to right.
    fn sum(xs: &[Self]) -> Self {
        let mut acc = Self::zero();
        for &x in xs {
            acc += x;
        }
        acc
    }

    /// Sequential dot product, left to right.
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = Self::zero();
        for (&x, &y) in a.iter().zip(b) {
            acc += x * y;
        }
        acc
    }

    /// `Σ w_i x_i` with constant weights.
    fn weighted_sum(weights: &[f64], xs: &[Self]) -> Self {
        debug_assert_eq!(weights.len(), xs.len());
        let mut acc = Self::zero();
        for (&w, &x) in weights.iter().zip(xs) {
            acc += x * Self::cst(w);
        }
        acc
    }
}

#[inline]
pub(crate) fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn leaky_relu(self, slope: f64) -> Self {
        if self > 0.0 {
            self
        } else {
            self * slope
        }
    }
}

/// Numerically stable softmax. The max shift is treated as a constant, which
/// leaves both the value and the derivative unchanged.
pub fn softmax<R: Real>(logits: &[R]) -> Vec<R> {
    let shift = logits
        .iter()
        .map(|x| x.value())
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = R::cst(shift);
    let exps: Vec<R> = logits.iter().map(|&x| (x - shift).exp()).collect();
    let total = R::sum(&exps);
    exps.into_iter().map(|e| e / total).collect()
}

pub fn values<R: Real>(xs: &[R]) -> Vec<f64> {
    xs.iter().map(|x| x.value()).collect()
}

pub fn constants<R: Real>(xs: &[f64]) -> Vec<R> {
    xs.iter().map(|&x| R::cst(x)).collect()
}

pub fn l2_norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}
