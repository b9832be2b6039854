use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::elementary::Elementary;
use super::partitions::partitions_of;
use super::MAX_TAGS;
use crate::error::{Error, Result};

/// A value together with every cross partial over a set of tagged
/// directions.
///
/// `coeffs[mask]` holds the mixed derivative with respect to the tags whose
/// positions are set in `mask`; `coeffs[0]` is the plain value. Each tag is
/// differentiated at most once, so the coefficients live on the subset
/// lattice of the tags and arithmetic is nilpotent in every tag.
#[derive(Clone, PartialEq)]
pub struct CrossDual {
    tags: Arc<[u32]>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for CrossDual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CrossDual")
            .field("tags", &&*self.tags)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

fn check_tags(tags: &[u32]) -> Result<()> {
    if tags.len() > MAX_TAGS {
        return Err(Error::Capacity {
            requested: tags.len(),
            capacity: MAX_TAGS,
        });
    }
    for (i, t) in tags.iter().enumerate() {
        if tags[..i].contains(t) {
            return Err(Error::Config(format!("tag {t} appears twice")));
        }
    }
    Ok(())
}

impl CrossDual {
    pub fn constant(tags: Arc<[u32]>, value: f64) -> Result<Self> {
        check_tags(&tags)?;
        let mut coeffs = vec![0.0; 1 << tags.len()];
        coeffs[0] = value;
        Ok(CrossDual { tags, coeffs })
    }

    /// Seeds `point` so that each index listed in `vars` becomes a tagged
    /// variable (tag = index) and every other entry a constant.
    pub fn seed(point: &[f64], vars: &[usize]) -> Result<Vec<CrossDual>> {
        let tags: Vec<u32> = vars.iter().map(|&v| v as u32).collect();
        check_tags(&tags)?;
        if let Some(&bad) = vars.iter().find(|&&v| v >= point.len()) {
            return Err(Error::Index {
                index: bad,
                len: point.len(),
            });
        }
        let tags: Arc<[u32]> = tags.into();
        let size = 1 << tags.len();
        Ok(point
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut coeffs = vec![0.0; size];
                coeffs[0] = x;
                if let Some(pos) = vars.iter().position(|&v| v == i) {
                    coeffs[1 << pos] = 1.0;
                }
                CrossDual {
                    tags: tags.clone(),
                    coeffs,
                }
            })
            .collect())
    }

    /// Seeds `point + Σ_t ε_t · directions[t]`, one tag per direction.
    /// The full-lattice coefficient of any function of the result is the
    /// mixed directional derivative along all directions.
    pub fn seed_directions(point: &[f64], directions: &[Vec<f64>]) -> Result<Vec<CrossDual>> {
        let tags: Vec<u32> = (0..directions.len() as u32).collect();
        check_tags(&tags)?;
        for d in directions {
            if d.len() != point.len() {
                return Err(Error::Shape(format!(
                    "direction of length {} for a point of length {}",
                    d.len(),
                    point.len()
                )));
            }
        }
        let tags: Arc<[u32]> = tags.into();
        let size = 1 << tags.len();
        Ok(point
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut coeffs = vec![0.0; size];
                coeffs[0] = x;
                for (t, d) in directions.iter().enumerate() {
                    coeffs[1 << t] = d[i];
                }
                CrossDual {
                    tags: tags.clone(),
                    coeffs,
                }
            })
            .collect())
    }

    pub fn tags(&self) -> &[u32] {
        &self.tags
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficient of the full tag set: the highest cross partial carried.
    pub fn top(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    /// Coefficient for the subset of tags named in `tags` (any order).
    pub fn coeff_for(&self, tags: &[u32]) -> Option<f64> {
        self.mask_of(tags).map(|m| self.coeffs[m])
    }

    pub fn mask_of(&self, tags: &[u32]) -> Option<usize> {
        let mut mask = 0;
        for t in tags {
            let pos = self.tags.iter().position(|x| x == t)?;
            mask |= 1 << pos;
        }
        Some(mask)
    }

    /// A constant sharing this number's tags.
    pub fn lift(&self, value: f64) -> CrossDual {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        CrossDual {
            tags: self.tags.clone(),
            coeffs,
        }
    }

    fn same_tags(&self, other: &CrossDual) -> Result<()> {
        if Arc::ptr_eq(&self.tags, &other.tags) || self.tags == other.tags {
            Ok(())
        } else {
            Err(Error::TagMismatch {
                left: self.tags.to_vec(),
                right: other.tags.to_vec(),
            })
        }
    }

    pub fn try_add(&self, other: &CrossDual) -> Result<CrossDual> {
        self.same_tags(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &CrossDual) -> Result<CrossDual> {
        self.same_tags(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    /// Leibniz rule on the subset lattice:
    /// `(ab)[S] = Σ_{A ⊆ S} a[A] · b[S \ A]`.
    pub fn try_mul(&self, other: &CrossDual) -> Result<CrossDual> {
        self.same_tags(other)?;
        let a = &self.coeffs;
        let b = &other.coeffs;
        let mut out = vec![0.0; a.len()];
        for (s, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut sub = s;
            loop {
                acc += a[sub] * b[s ^ sub];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & s;
            }
            *slot = acc;
        }
        Ok(CrossDual {
            tags: self.tags.clone(),
            coeffs: out,
        })
    }

    pub fn try_div(&self, other: &CrossDual) -> Result<CrossDual> {
        self.same_tags(other)?;
        if other.value() == 0.0 {
            return Err(Error::Singularity);
        }
        self.try_mul(&other.compose(Elementary::Recip)?)
    }

    /// `u ∘ self` by Faà di Bruno restricted to cross partials:
    /// `(u∘g)[S] = Σ_{π partition of S} u^(|π|)(g[∅]) Π_{B∈π} g[B]`.
    pub fn compose(&self, u: Elementary) -> Result<CrossDual> {
        let t = self.tags.len();
        let d = u.table(self.value(), t)?;
        let g = &self.coeffs;
        let mut out = vec![0.0; g.len()];
        out[0] = d[0];
        for (mask, slot) in out.iter_mut().enumerate().skip(1) {
            let mut acc = 0.0;
            for p in partitions_of(mask) {
                let k = p.len();
                if d[k] == 0.0 {
                    continue;
                }
                let mut prod = d[k];
                for &b in p.iter() {
                    prod *= g[b];
                }
                acc += prod;
            }
            *slot = acc;
        }
        Ok(CrossDual {
            tags: self.tags.clone(),
            coeffs: out,
        })
    }

    pub fn scale(&self, c: f64) -> CrossDual {
        CrossDual {
            tags: self.tags.clone(),
            coeffs: self.coeffs.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add_const(&self, c: f64) -> CrossDual {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    fn zip(&self, other: &CrossDual, f: impl Fn(f64, f64) -> f64) -> CrossDual {
        CrossDual {
            tags: self.tags.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `bias + Σ w_i x_i`, accumulated in input order.
    pub(crate) fn affine(weights: &[f64], inputs: &[CrossDual], bias: f64) -> CrossDual {
        let first = &inputs[0];
        let mut coeffs = vec![0.0; first.coeffs.len()];
        coeffs[0] = bias;
        for (w, x) in weights.iter().zip(inputs) {
            for (acc, v) in coeffs.iter_mut().zip(&x.coeffs) {
                *acc += w * v;
            }
        }
        CrossDual {
            tags: first.tags.clone(),
            coeffs,
        }
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $try:ident) => {
        impl $trait for CrossDual {
            type Output = CrossDual;
            fn $method(self, rhs: CrossDual) -> CrossDual {
                (&self).$method(&rhs)
            }
        }

        impl<'a> $trait<&'a CrossDual> for &'a CrossDual {
            type Output = CrossDual;
            /// Panics on mismatched tag sets; use the `try_` form to recover.
            fn $method(self, rhs: &'a CrossDual) -> CrossDual {
                match self.$try(rhs) {
                    Ok(v) => v,
                    Err(e) => panic!("{e}"),
                }
            }
        }
    };
}

binary_op!(Add, add, try_add);
binary_op!(Sub, sub, try_sub);
binary_op!(Mul, mul, try_mul);

impl Neg for CrossDual {
    type Output = CrossDual;
    fn neg(mut self) -> CrossDual {
        for v in &mut self.coeffs {
            *v = -*v;
        }
        self
    }
}
