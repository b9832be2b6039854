use std::f64::consts::PI;

use super::series::{Series, LEN};
use crate::error::{Error, Result};

/// Margin keeping `asin`/`acos` arguments strictly inside `(-1, 1)`.
const UNIT_CLAMP: f64 = 1e-9;

/// Univariate elementary functions with derivative tables up to the
/// autodiff capacity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementary {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Sec,
    Sinh,
    Cosh,
    Tanh,
    Asin,
    Acos,
    Atan,
    Sqrt,
    /// `|x|`; the derivative at 0 is taken to be 0.
    Abs,
    Erf,
    /// `x^a` for a constant exponent.
    Power(f64),
    Recip,
    Sigmoid,
    Softplus,
    /// `max(x, c)`; derivative 0 at the kink.
    MaxConst(f64),
}

impl Elementary {
    pub fn name(&self) -> &'static str {
        match self {
            Elementary::Exp => "exp",
            Elementary::Ln => "log",
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
            Elementary::Tan => "tan",
            Elementary::Sec => "sec",
            Elementary::Sinh => "sinh",
            Elementary::Cosh => "cosh",
            Elementary::Tanh => "tanh",
            Elementary::Asin => "arcsin",
            Elementary::Acos => "arccos",
            Elementary::Atan => "arctan",
            Elementary::Sqrt => "sqrt",
            Elementary::Abs => "abs",
            Elementary::Erf => "erf",
            Elementary::Power(_) => "power",
            Elementary::Recip => "reciprocal",
            Elementary::Sigmoid => "sigmoid",
            Elementary::Softplus => "softplus",
            Elementary::MaxConst(_) => "max",
        }
    }

    /// Function value only; identical to `table(x)[0]`.
    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.table(x, 0)?[0])
    }

    /// `k`-th ordinary derivative at `x`.
    pub fn derivs(&self, k: usize, x: f64) -> Result<f64> {
        if k >= LEN {
            return Err(Error::Capacity {
                requested: k,
                capacity: LEN - 1,
            });
        }
        Ok(self.table(x, k)?[k])
    }

    /// Derivatives `u^(k)(x)` for `k = 0..=order`; entries above `order`
    /// are unspecified.
    pub(crate) fn table(&self, x: f64, order: usize) -> Result<[f64; LEN]> {
        let domain = |value: f64| Error::Domain {
            function: self.name(),
            value,
        };
        if !x.is_finite() {
            return Err(domain(x));
        }
        let mut d = [0.0; LEN];
        match *self {
            Elementary::Exp => {
                let e = x.exp();
                if !e.is_finite() {
                    return Err(domain(x));
                }
                d = [e; LEN];
            }
            Elementary::Ln => {
                if x <= 0.0 {
                    return Err(domain(x));
                }
                d[0] = x.ln();
                // u^(k) = (-1)^(k-1) (k-1)! / x^k
                let mut fact = 1.0;
                let mut pow = x;
                for k in 1..=order {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    d[k] = sign * fact / pow;
                    fact *= k as f64;
                    pow *= x;
                }
            }
            Elementary::Sin | Elementary::Cos => {
                let (s, c) = x.sin_cos();
                let cycle = [s, c, -s, -c];
                let shift = if *self == Elementary::Sin { 0 } else { 1 };
                for (k, v) in d.iter_mut().enumerate() {
                    *v = cycle[(k + shift) % 4];
                }
            }
            Elementary::Sinh | Elementary::Cosh => {
                let (sh, ch) = (x.sinh(), x.cosh());
                if !ch.is_finite() {
                    return Err(domain(x));
                }
                let cycle = [sh, ch];
                let shift = if *self == Elementary::Sinh { 0 } else { 1 };
                for (k, v) in d.iter_mut().enumerate() {
                    *v = cycle[(k + shift) % 2];
                }
            }
            Elementary::Tan => {
                if x.cos() == 0.0 {
                    return Err(domain(x));
                }
                d = Series::riccati(x.tan(), 1.0, 0.0, 1.0).derivatives();
            }
            Elementary::Sec => {
                let c = x.cos();
                if c == 0.0 {
                    return Err(domain(x));
                }
                // sec' = sec tan
                let tan = Series::riccati(x.tan(), 1.0, 0.0, 1.0);
                let mut b = [0.0; LEN];
                b[0] = 1.0 / c;
                for n in 0..LEN - 1 {
                    let mut acc = 0.0;
                    for i in 0..=n {
                        acc += b[i] * tan.0[n - i];
                    }
                    b[n + 1] = acc / (n + 1) as f64;
                }
                d = Series(b).derivatives();
            }
            Elementary::Tanh => {
                d = Series::riccati(x.tanh(), 1.0, 0.0, -1.0).derivatives();
            }
            Elementary::Sigmoid => {
                d = Series::riccati(sigmoid(x), 0.0, 1.0, -1.0).derivatives();
            }
            Elementary::Softplus => {
                let s = Series::riccati(sigmoid(x), 0.0, 1.0, -1.0);
                d = s.integrate(softplus(x)).derivatives();
            }
            Elementary::Atan => {
                let v = Series::variable(x);
                let slope = v.mul(&v).add_const(1.0).recip();
                d = slope.integrate(x.atan()).derivatives();
            }
            Elementary::Asin | Elementary::Acos => {
                if x.abs() > 1.0 {
                    return Err(domain(x));
                }
                let xc = x.clamp(-1.0 + UNIT_CLAMP, 1.0 - UNIT_CLAMP);
                let v = Series::variable(xc);
                let slope = v.mul(&v).scale(-1.0).add_const(1.0).sqrt().recip();
                d = if *self == Elementary::Asin {
                    slope.integrate(xc.asin()).derivatives()
                } else {
                    slope.scale(-1.0).integrate(xc.acos()).derivatives()
                };
            }
            Elementary::Erf => {
                let v = Series::variable(x);
                let gauss = v.mul(&v).scale(-1.0).exp().scale(2.0 / PI.sqrt());
                d = gauss.integrate(libm::erf(x)).derivatives();
            }
            Elementary::Sqrt => return Elementary::Power(0.5).table(x, order),
            Elementary::Recip => {
                if x == 0.0 {
                    return Err(Error::Singularity);
                }
                return Elementary::Power(-1.0).table(x, order);
            }
            Elementary::Power(a) => {
                let integral = a.fract() == 0.0;
                if x < 0.0 && !integral {
                    return Err(domain(x));
                }
                if x == 0.0 {
                    // finite only while the running exponent stays non-negative
                    let blows_up = (0..=order).any(|k| {
                        let e = a - k as f64;
                        e < 0.0 && !(integral && a >= 0.0 && a < k as f64)
                    });
                    if blows_up {
                        return Err(domain(x));
                    }
                }
                let mut falling = 1.0;
                for k in 0..=order {
                    d[k] = if falling == 0.0 {
                        0.0
                    } else {
                        falling * x.powf(a - k as f64)
                    };
                    falling *= a - k as f64;
                }
            }
            Elementary::Abs => {
                d[0] = x.abs();
                d[1] = if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
            Elementary::MaxConst(c) => {
                d[0] = x.max(c);
                d[1] = if x > c { 1.0 } else { 0.0 };
            }
        }
        if d[..=order.min(LEN - 1)].iter().any(|v| !v.is_finite()) {
            return Err(domain(x));
        }
        Ok(d)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}
