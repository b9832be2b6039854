//! The ten-function synthetic interaction benchmark with samplers and
//! analytic ground truth.
//!
//! Formulas and comments use 1-based variable names `x1..x10`; code indices
//! and every emitted interaction set are 0-based (`x1` is column 0).

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Elementary, Scalar, ScalarFn};
use crate::error::{Error, Result};
use crate::model::Dataset;

pub const ARITY: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FunctionId {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
}

impl FunctionId {
    pub const ALL: [FunctionId; 10] = [
        FunctionId::F1,
        FunctionId::F2,
        FunctionId::F3,
        FunctionId::F4,
        FunctionId::F5,
        FunctionId::F6,
        FunctionId::F7,
        FunctionId::F8,
        FunctionId::F9,
        FunctionId::F10,
    ];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    /// Parses a comma-separated list where `Fa..Fb` denotes a range.
    pub fn parse_list(s: &str) -> Result<Vec<FunctionId>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let (a, b): (FunctionId, FunctionId) = (a.parse()?, b.parse()?);
                out.extend(FunctionId::ALL.iter().filter(|f| **f >= a && **f <= b));
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("empty function list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.number())
    }
}

impl FromStr for FunctionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let n: usize = s
            .trim()
            .trim_start_matches(['F', 'f'])
            .parse()
            .map_err(|_| Error::Config(format!("unknown function `{s}`")))?;
        FunctionId::ALL
            .get(n.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown function `{s}`")))
    }
}

/// A sampling interval with optionally open ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub const fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }
    pub const fn open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_open: true,
            hi_open: true,
        }
    }
    pub const fn left_open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_open: true,
            hi_open: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_open { x < self.hi } else { x <= self.hi };
        above && below
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let x = rng.gen_range(self.lo..self.hi);
            if self.contains(x) {
                return x;
            }
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

/// Maximal interacting variable sets of a function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub maximal_sets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

impl GroundTruth {
    pub fn new(maximal_sets: Vec<Vec<usize>>) -> Self {
        GroundTruth {
            maximal_sets,
            order: None,
        }
    }

    /// Restricts [`Self::interactions`] to one order.
    pub fn with_order(mut self, order: usize) -> Self {
        self.order = Some(order);
        self
    }

    /// A set is a true interaction when some maximal set contains it.
    pub fn contains(&self, set: &[usize]) -> bool {
        set.len() >= 2
            && self.order.map_or(true, |o| o == set.len())
            && self
                .maximal_sets
                .iter()
                .any(|m| set.iter().all(|v| m.contains(v)))
    }

    /// Every true interaction of the given size, sorted.
    pub fn interactions(&self, size: usize) -> BTreeSet<Vec<usize>> {
        let mut out = BTreeSet::new();
        if self.order.is_some_and(|o| o != size) || size < 2 {
            return out;
        }
        for m in &self.maximal_sets {
            for sub in combinations(m, size) {
                out.insert(sub);
            }
        }
        out
    }

    /// Pairs `(i, j)` with `i < j` contained in some maximal set.
    pub fn pairs(&self) -> BTreeSet<(usize, usize)> {
        GroundTruth::new(self.maximal_sets.clone())
            .interactions(2)
            .into_iter()
            .map(|p| (p[0], p[1]))
            .collect()
    }
}

/// Size-`k` subsets of a sorted slice, in lexicographic order.
pub fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - current.len() {
                break;
            }
            current.push(items[i]);
            rec(items, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(&sorted, k, 0, &mut current, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthFunction {
    pub id: FunctionId,
    pub domain: [Interval; ARITY],
}

const UNIT: Interval = Interval::closed(-1.0, 1.0);

impl SynthFunction {
    pub fn new(id: FunctionId) -> Self {
        let mut domain = [UNIT; ARITY];
        match id {
            FunctionId::F1 => {
                // x3+x5 > 0 for the log, x7/x8 > 0 for the root, x10 ≠ 0
                domain[0] = Interval::left_open(0.0, 1.0);
                domain[1] = Interval::left_open(0.0, 1.0);
                for j in [2, 4, 6, 7, 8, 9] {
                    domain[j] = Interval::left_open(0.1, 1.0);
                }
                domain[3] = Interval::open(-1.0, 1.0);
            }
            FunctionId::F8 | FunctionId::F10 => domain[9] = Interval::open(-1.0, 1.0),
            _ => {}
        }
        SynthFunction { id, domain }
    }

    pub fn all() -> Vec<SynthFunction> {
        FunctionId::ALL.iter().map(|&id| SynthFunction::new(id)).collect()
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != ARITY {
            return Err(Error::Shape(format!("{} takes {ARITY} inputs, got {}", self.id, x.len())));
        }
        for (j, (&v, iv)) in x.iter().zip(&self.domain).enumerate() {
            if !iv.contains(v) {
                return Err(Error::OutOfDomain {
                    variable: j + 1,
                    value: v,
                    bound: iv.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn eval_real(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }

    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.domain.iter().map(|iv| iv.sample(rng)).collect()
    }

    /// `n` i.i.d. rows drawn uniformly from the domain table, with targets.
    pub fn sample_dataset(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n * ARITY);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let row = self.sample_point(&mut rng);
            ys.push(self.eval_real(&row)?);
            xs.extend(row);
        }
        Dataset::new(
            Array2::from_shape_vec((n, ARITY), xs).expect("shape"),
            Array2::from_shape_vec((n, 1), ys).expect("shape"),
        )
    }

    /// Maximal sets whose cross partials are not identically zero.
    pub fn ground_truth(&self) -> GroundTruth {
        // 1-based sets as read off the formula terms, converted below.
        let sets: &[&[usize]] = match self.id {
            // π^{x1x2}√(2x3) → {1,2,3}; log(x3+x5) → {3,5};
            // (x9/x10)√(x7/x8) → {7,8,9,10}; x2x7 → {2,7}; arcsin(x4) alone.
            FunctionId::F1 | FunctionId::F2 => &[&[1, 2, 3], &[3, 5], &[7, 8, 9, 10], &[2, 7]],
            // exp|x1−x2| → {1,2}; |x2x3| → {2,3}; |x3|^{2|x4|} → {3,4};
            // log(x4²+x5²+x7²+x8²) → {4,5,7,8}; x9 and 1/(1+x10²) are additive.
            FunctionId::F3 => &[&[1, 2], &[2, 3], &[3, 4], &[4, 5, 7, 8]],
            // F3 plus (x1x4)² → {1,4}.
            FunctionId::F4 => &[&[1, 2], &[2, 3], &[3, 4], &[4, 5, 7, 8], &[1, 4]],
            // 1/(1+x1²+x2²+x3²) → {1,2,3}; √|x4+x5| → {4,5}; x8x9x10 → {8,9,10}.
            // |x6+x7| is piecewise linear: its cross partial vanishes off the kink.
            FunctionId::F5 => &[&[1, 2, 3], &[4, 5], &[8, 9, 10]],
            // exp(|x1x2|+1) → {1,2}; exp(|x3+x4|+1) → {3,4};
            // cos(x5+x6−x8) → {5,6,8}; √(x8²+x9²+x10²) → {8,9,10}.
            FunctionId::F6 => &[&[1, 2], &[3, 4], &[5, 6, 8], &[8, 9, 10]],
            // (atan x1 + atan x2)² → {1,2}; max(x3x4+x6, 0) → {3,4} only, since
            // it is linear in x6 wherever it is differentiable;
            // 1/(1+(x4x5x6x7x8)²) → {4,5,6,7,8}; (|x7|/(1+|x9|))⁵ → {7,9}.
            FunctionId::F7 => &[&[1, 2], &[3, 4], &[4, 5, 6, 7, 8], &[7, 9]],
            // x1x2 → {1,2}; 2^{x3+x5+x6} → {3,5,6}; 2^{x3+x4+x5+x7} → {3,4,5,7};
            // sin(x7 sin(x8+x9)) → {7,8,9}; arccos(0.9x10) alone.
            FunctionId::F8 => &[&[1, 2], &[3, 5, 6], &[3, 4, 5, 7], &[7, 8, 9]],
            // tanh(x1x2+x3x4)√|x5| → {1,2,3,4,5}; exp(x5+x6) → {5,6};
            // log((x6x7x8)²+1) → {6,7,8}; x9x10 → {9,10}.
            FunctionId::F9 => &[&[1, 2, 3, 4, 5], &[5, 6], &[6, 7, 8], &[9, 10]],
            // sinh(x1+x2) → {1,2}; arccos(tanh(x3+x5+x7)) → {3,5,7};
            // cos(x4+x5) → {4,5}; sec(x7x9) → {7,9}.
            FunctionId::F10 => &[&[1, 2], &[3, 5, 7], &[4, 5], &[7, 9]],
        };
        GroundTruth::new(
            sets.iter()
                .map(|s| s.iter().map(|v| v - 1).collect())
                .collect(),
        )
    }

    pub fn pairwise_truth(&self) -> BTreeSet<(usize, usize)> {
        self.ground_truth().pairs()
    }
}

fn sum<S: Scalar>(terms: impl IntoIterator<Item = S>) -> S {
    let mut it = terms.into_iter();
    let first = it.next().expect("non-empty sum");
    it.fold(first, |acc, t| acc + t)
}

fn prod<S: Scalar>(factors: &[&S]) -> S {
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = acc * (*f).clone();
    }
    acc
}

impl ScalarFn for SynthFunction {
    fn input_dim(&self) -> usize {
        ARITY
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let values: Vec<f64> = x.iter().map(Scalar::value).collect();
        self.check_domain(&values)?;
        // 1-based accessor to keep the formulas readable
        let v = |i: usize| &x[i - 1];
        let out = match self.id {
            FunctionId::F1 => {
                let t1 = prod(&[v(1), v(2)]).exp_base(PI)? * v(3).scale(2.0).sqrt()?;
                let t2 = v(4).apply(Elementary::Asin)?;
                let t3 = (v(3).clone() + v(5).clone()).ln()?;
                let t4 = v(9).try_div(v(10))? * v(7).try_div(v(8))?.sqrt()?;
                let t5 = prod(&[v(2), v(7)]);
                t1 - t2 + t3 - t4 - t5
            }
            FunctionId::F2 => {
                let t1 = prod(&[v(1), v(2)]).exp_base(PI)? * v(3).abs()?.scale(2.0).sqrt()?;
                let t2 = v(4).scale(0.5).apply(Elementary::Asin)?;
                let t3 = (v(3).clone() + v(5).clone()).abs()?.add_const(1.0).ln()?;
                let root = v(7).abs()?.try_div(&v(8).abs()?.add_const(1.0))?.sqrt()?;
                let t4 = v(9).try_div(&v(10).abs()?.add_const(1.0))? * root;
                let t5 = prod(&[v(2), v(7)]);
                t1 - t2 + t3 + t4 - t5
            }
            FunctionId::F3 | FunctionId::F4 => {
                let t1 = (v(1).clone() - v(2).clone()).abs()?.exp()?;
                let t2 = prod(&[v(2), v(3)]).abs()?;
                let t3 = v(3).abs()?.pow(&v(4).abs()?.scale(2.0))?;
                let t4 = sum([v(4).square(), v(5).square(), v(7).square(), v(8).square()]).ln()?;
                let t5 = v(9).clone();
                let t6 = v(10).square().add_const(1.0).recip()?;
                let base = t1 + t2 - t3 + t4 + t5 + t6;
                if self.id == FunctionId::F4 {
                    base + prod(&[v(1), v(4)]).square()
                } else {
                    base
                }
            }
            FunctionId::F5 => {
                let t1 = sum([v(1).square(), v(2).square(), v(3).square()])
                    .add_const(1.0)
                    .recip()?;
                let t2 = (v(4).clone() + v(5).clone()).abs()?.sqrt()?;
                let t3 = (v(6).clone() + v(7).clone()).abs()?;
                let t4 = prod(&[v(8), v(9), v(10)]);
                t1 + t2 + t3 + t4
            }
            FunctionId::F6 => {
                let t1 = prod(&[v(1), v(2)]).abs()?.add_const(1.0).exp()?;
                let t2 = (v(3).clone() + v(4).clone()).abs()?.add_const(1.0).exp()?;
                let t3 = (v(5).clone() + v(6).clone() - v(8).clone()).cos()?;
                let t4 = sum([v(8).square(), v(9).square(), v(10).square()]).sqrt()?;
                t1 - t2 + t3 + t4
            }
            FunctionId::F7 => {
                let atan = |s: &S| s.apply(Elementary::Atan);
                let t1 = (atan(v(1))? + atan(v(2))?).square();
                let t2 = (prod(&[v(3), v(4)]) + v(6).clone()).apply(Elementary::MaxConst(0.0))?;
                let t3 = prod(&[v(4), v(5), v(6), v(7), v(8)])
                    .square()
                    .add_const(1.0)
                    .recip()?;
                let t4 = v(7)
                    .abs()?
                    .try_div(&v(9).abs()?.add_const(1.0))?
                    .powf(5.0)?;
                let t5 = sum((1..=ARITY).map(|i| v(i).clone()));
                t1 + t2 - t3 + t4 + t5
            }
            FunctionId::F8 => {
                let t1 = prod(&[v(1), v(2)]);
                let t2 = sum([v(3).clone(), v(5).clone(), v(6).clone()]).exp_base(2.0)?;
                let t3 = sum([v(3).clone(), v(4).clone(), v(5).clone(), v(7).clone()]).exp_base(2.0)?;
                let t4 = (v(7).clone() * (v(8).clone() + v(9).clone()).sin()?).sin()?;
                let t5 = v(10).scale(0.9).apply(Elementary::Acos)?;
                t1 + t2 + t3 + t4 + t5
            }
            FunctionId::F9 => {
                let inner = prod(&[v(1), v(2)]) + prod(&[v(3), v(4)]);
                let t1 = inner.apply(Elementary::Tanh)? * v(5).abs()?.sqrt()?;
                let t2 = (v(5).clone() + v(6).clone()).exp()?;
                let t3 = prod(&[v(6), v(7), v(8)]).square().add_const(1.0).ln()?;
                let t4 = prod(&[v(9), v(10)]);
                let t5 = v(10).abs()?.add_const(1.0).recip()?;
                t1 + t2 + t3 + t4 + t5
            }
            FunctionId::F10 => {
                let t1 = (v(1).clone() + v(2).clone()).apply(Elementary::Sinh)?;
                let t2 = sum([v(3).clone(), v(5).clone(), v(7).clone()])
                    .apply(Elementary::Tanh)?
                    .apply(Elementary::Acos)?;
                let t3 = (v(4).clone() + v(5).clone()).cos()?;
                let t4 = prod(&[v(7), v(9)]).apply(Elementary::Sec)?;
                t1 + t2 + t3 + t4
            }
        };
        Ok(out)
    }
}
