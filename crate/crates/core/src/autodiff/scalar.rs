use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use super::dual::CrossDual;
use super::elementary::Elementary;
use crate::error::{Error, Result};

/// Numbers a model or test function can be evaluated with: plain reals or
/// [`CrossDual`]s.
///
/// Every operation computes the value slot of a `CrossDual` with exactly
/// the same floating-point steps as the `f64` implementation, so plain
/// evaluation and the value coefficient of a dual evaluation agree bit for
/// bit.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn value(&self) -> f64;

    /// A constant compatible with `self`.
    fn lift(&self, c: f64) -> Self;

    fn scale(&self, c: f64) -> Self;

    fn add_const(&self, c: f64) -> Self;

    fn apply(&self, f: Elementary) -> Result<Self>;

    fn try_div(&self, rhs: &Self) -> Result<Self>;

    /// `bias + Σ w_i x_i`. `inputs` must be non-empty.
    fn affine(weights: &[f64], inputs: &[Self], bias: f64) -> Self;

    fn exp(&self) -> Result<Self> {
        self.apply(Elementary::Exp)
    }
    fn ln(&self) -> Result<Self> {
        self.apply(Elementary::Ln)
    }
    fn sin(&self) -> Result<Self> {
        self.apply(Elementary::Sin)
    }
    fn cos(&self) -> Result<Self> {
        self.apply(Elementary::Cos)
    }
    fn sqrt(&self) -> Result<Self> {
        self.apply(Elementary::Sqrt)
    }
    fn abs(&self) -> Result<Self> {
        self.apply(Elementary::Abs)
    }
    fn erf(&self) -> Result<Self> {
        self.apply(Elementary::Erf)
    }
    fn recip(&self) -> Result<Self> {
        self.apply(Elementary::Recip)
    }
    fn powf(&self, a: f64) -> Result<Self> {
        self.apply(Elementary::Power(a))
    }
    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
    /// `c^self` for a positive constant base, as `exp(self · ln c)`.
    fn exp_base(&self, base: f64) -> Result<Self> {
        if base <= 0.0 {
            return Err(Error::Domain {
                function: "power",
                value: base,
            });
        }
        self.scale(base.ln()).exp()
    }
    /// `self^exponent` with both operands variable, as `exp(exponent · ln self)`.
    fn pow(&self, exponent: &Self) -> Result<Self> {
        (exponent.clone() * self.ln()?).exp()
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn scale(&self, c: f64) -> Self {
        c * self
    }
    fn add_const(&self, c: f64) -> Self {
        self + c
    }
    fn apply(&self, f: Elementary) -> Result<Self> {
        f.value(*self)
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 {
            return Err(Error::Singularity);
        }
        Ok(self * rhs.apply(Elementary::Recip)?)
    }
    fn affine(weights: &[f64], inputs: &[Self], bias: f64) -> Self {
        let mut acc = bias;
        for (w, x) in weights.iter().zip(inputs) {
            acc += w * x;
        }
        acc
    }
}

impl Scalar for CrossDual {
    fn value(&self) -> f64 {
        CrossDual::value(self)
    }
    fn lift(&self, c: f64) -> Self {
        CrossDual::lift(self, c)
    }
    fn scale(&self, c: f64) -> Self {
        CrossDual::scale(self, c)
    }
    fn add_const(&self, c: f64) -> Self {
        CrossDual::add_const(self, c)
    }
    fn apply(&self, f: Elementary) -> Result<Self> {
        self.compose(f)
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        CrossDual::try_div(self, rhs)
    }
    fn affine(weights: &[f64], inputs: &[Self], bias: f64) -> Self {
        CrossDual::affine(weights, inputs, bias)
    }
}

/// A real function of a vector that can be evaluated over any [`Scalar`].
pub trait ScalarFn: Sync {
    fn input_dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S>;
}

impl<T: ScalarFn> ScalarFn for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        (**self).eval(x)
    }
}
