//! Truncated univariate power series in `h` around an expansion point.
//!
//! Used to build the derivative tables of the elementary functions: the
//! `k`-th derivative of `u` at `x0` is `k!` times the `h^k` coefficient of
//! `u(x0 + h)`.

use super::MAX_TAGS;

pub(crate) const LEN: usize = MAX_TAGS + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Series(pub [f64; LEN]);

impl Series {
    /// The identity `x0 + h`.
    pub fn variable(x0: f64) -> Self {
        let mut a = [0.0; LEN];
        a[0] = x0;
        a[1] = 1.0;
        Series(a)
    }

    pub fn mul(&self, other: &Series) -> Series {
        let mut out = [0.0; LEN];
        for (n, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..=n {
                acc += self.0[i] * other.0[n - i];
            }
            *slot = acc;
        }
        Series(out)
    }

    pub fn scale(&self, c: f64) -> Series {
        Series(self.0.map(|v| v * c))
    }

    pub fn add_const(&self, c: f64) -> Series {
        let mut a = self.0;
        a[0] += c;
        Series(a)
    }

    pub fn recip(&self) -> Series {
        let a = &self.0;
        let mut r = [0.0; LEN];
        r[0] = 1.0 / a[0];
        for n in 1..LEN {
            let mut acc = 0.0;
            for i in 1..=n {
                acc += a[i] * r[n - i];
            }
            r[n] = -acc * r[0];
        }
        Series(r)
    }

    pub fn sqrt(&self) -> Series {
        let a = &self.0;
        let mut s = [0.0; LEN];
        s[0] = a[0].sqrt();
        for n in 1..LEN {
            let mut acc = a[n];
            for i in 1..n {
                acc -= s[i] * s[n - i];
            }
            s[n] = acc / (2.0 * s[0]);
        }
        Series(s)
    }

    pub fn exp(&self) -> Series {
        let a = &self.0;
        let mut e = [0.0; LEN];
        e[0] = a[0].exp();
        for n in 1..LEN {
            let mut acc = 0.0;
            for i in 1..=n {
                acc += i as f64 * a[i] * e[n - i];
            }
            e[n] = acc / n as f64;
        }
        Series(e)
    }

    /// Antiderivative with the given constant term.
    pub fn integrate(&self, c0: f64) -> Series {
        let mut out = [0.0; LEN];
        out[0] = c0;
        for n in 1..LEN {
            out[n] = self.0[n - 1] / n as f64;
        }
        Series(out)
    }

    /// Solution of `y' = p(y)` for a quadratic `p(y) = c0 + c1 y + c2 y^2`
    /// with `y(0) = y0`.
    pub fn riccati(y0: f64, c0: f64, c1: f64, c2: f64) -> Series {
        let mut y = [0.0; LEN];
        y[0] = y0;
        for n in 0..LEN - 1 {
            let mut sq = 0.0;
            for i in 0..=n {
                sq += y[i] * y[n - i];
            }
            let konst = if n == 0 { c0 } else { 0.0 };
            y[n + 1] = (konst + c1 * y[n] + c2 * sq) / (n + 1) as f64;
        }
        Series(y)
    }

    /// Ordinary derivatives `u^(k)(x0)` for `k = 0..LEN`.
    pub fn derivatives(&self) -> [f64; LEN] {
        let mut out = self.0;
        let mut fact = 1.0;
        for (k, v) in out.iter_mut().enumerate().skip(1) {
            fact *= k as f64;
            *v *= fact;
        }
        out
    }
}
