//! Global, higher-order interaction detection from cross partials at a few
//! representative samples, with top-k subsampling above the exhaustive
//! orders.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{CrossDual, Scalar, ScalarFn, MAX_TAGS};
use crate::error::{Error, Result};
use crate::model::{softmax, Dataset, Mlp};
use crate::synth::combinations;

/// Bins used to locate the mode of continuous values.
pub const MODE_BINS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representative {
    Mean,
    Median,
    Min,
    Max,
    Mode,
    Random,
}

impl Representative {
    pub const ALL: [Representative; 6] = [
        Representative::Mean,
        Representative::Median,
        Representative::Min,
        Representative::Max,
        Representative::Mode,
        Representative::Random,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Representative::Mean => "Mean",
            Representative::Median => "Med",
            Representative::Min => "Min",
            Representative::Max => "Max",
            Representative::Mode => "Mode",
            Representative::Random => "Rand",
        }
    }

    pub fn default_set() -> Vec<Representative> {
        vec![
            Representative::Mean,
            Representative::Min,
            Representative::Mode,
            Representative::Random,
        ]
    }

    pub fn parse_list(s: &str) -> Result<Vec<Representative>> {
        let mut out: Vec<Representative> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Representative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Representative::Mean => "mean",
            Representative::Median => "median",
            Representative::Min => "min",
            Representative::Max => "max",
            Representative::Mode => "mode",
            Representative::Random => "random",
        };
        f.write_str(s)
    }
}

impl FromStr for Representative {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "mean" => Representative::Mean,
            "median" | "med" => Representative::Median,
            "min" => Representative::Min,
            "max" => Representative::Max,
            "mode" => Representative::Mode,
            "random" | "rand" => Representative::Random,
            _ => return Err(Error::Config(format!("unknown representative `{s}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Median,
    Min,
    Max,
    Mode,
}

impl Aggregate {
    pub const ALL: [Aggregate; 5] = [
        Aggregate::Mean,
        Aggregate::Median,
        Aggregate::Min,
        Aggregate::Max,
        Aggregate::Mode,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Aggregate::Mean => "Mean",
            Aggregate::Median => "Med",
            Aggregate::Min => "Min",
            Aggregate::Max => "Max",
            Aggregate::Mode => "Mode",
        }
    }

    /// Aggregate of a non-empty slice.
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            }
            Aggregate::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregate::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Mode => histogram_mode(values),
        }
    }
}

impl FromStr for Aggregate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "mean" => Aggregate::Mean,
            "median" | "med" => Aggregate::Median,
            "min" => Aggregate::Min,
            "max" => Aggregate::Max,
            "mode" => Aggregate::Mode,
            _ => return Err(Error::Config(format!("unknown aggregation `{s}`"))),
        })
    }
}

/// Midpoint of the most populated of [`MODE_BINS`] equal-width bins over
/// the observed range; the leftmost bin wins ties.
pub fn histogram_mode(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return lo;
    }
    let width = (hi - lo) / MODE_BINS as f64;
    let mut counts = [0usize; MODE_BINS];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(MODE_BINS - 1);
        counts[b] += 1;
    }
    let mut best = 0;
    for (b, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = b;
        }
    }
    lo + (best as f64 + 0.5) * width
}

/// Which output of a model is explained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Task {
    /// Single regression output; strengths are squared cross partials.
    Regression,
    /// One class of a softmax classifier.
    Classification {
        class_index: usize,
        /// Differentiate the class logit instead of the class probability.
        #[serde(default)]
        logit: bool,
        /// Square the cross partials instead of keeping their sign.
        #[serde(default)]
        square: bool,
    },
}

impl Task {
    pub fn squares(self) -> bool {
        match self {
            Task::Regression => true,
            Task::Classification { square, .. } => square,
        }
    }

    fn transform(self, raw: f64) -> f64 {
        if self.squares() {
            raw * raw
        } else {
            raw
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TnidConfig {
    pub max_order: usize,
    pub full_order: usize,
    pub top_k: usize,
    pub representatives: Vec<Representative>,
    pub aggregation: Aggregate,
    pub task: Task,
    pub seed: u64,
}

impl Default for TnidConfig {
    fn default() -> Self {
        TnidConfig {
            max_order: 5,
            full_order: 2,
            top_k: 10,
            representatives: Representative::default_set(),
            aggregation: Aggregate::Mean,
            task: Task::Regression,
            seed: 0,
        }
    }
}

impl TnidConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2 <= self.full_order && self.full_order <= self.max_order && self.max_order <= MAX_TAGS) {
            return Err(Error::Config(format!(
                "need 2 <= full_order ({}) <= max_order ({}) <= {MAX_TAGS}",
                self.full_order, self.max_order
            )));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self.representatives.is_empty() {
            return Err(Error::Config("no representative samples requested".into()));
        }
        Ok(())
    }
}

/// A dataset row standing in for an aggregate of the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSample {
    pub label: Representative,
    pub row_index: usize,
    #[serde(skip)]
    pub row: Vec<f64>,
}

/// Rows nearest (L2) to per-feature aggregates of `data`; ties go to the
/// lowest row index. `Random` draws a row uniformly with `seed`.
pub fn representative_samples(
    data: &Dataset,
    labels: &[Representative],
    seed: u64,
) -> Result<Vec<RepresentativeSample>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let columns: Vec<Vec<f64>> = data.features.columns().into_iter().map(|c| c.to_vec()).collect();
    labels
        .iter()
        .map(|&label| {
            let target: Vec<f64> = match label {
                Representative::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let row_index = rng.gen_range(0..n);
                    return Ok(RepresentativeSample {
                        label,
                        row_index,
                        row: data.row(row_index),
                    });
                }
                Representative::Mean => columns.iter().map(|c| Aggregate::Mean.apply(c)).collect(),
                Representative::Median => columns.iter().map(|c| Aggregate::Median.apply(c)).collect(),
                Representative::Min => columns.iter().map(|c| Aggregate::Min.apply(c)).collect(),
                Representative::Max => columns.iter().map(|c| Aggregate::Max.apply(c)).collect(),
                Representative::Mode => columns.iter().map(|c| histogram_mode(c)).collect(),
            };
            let mut best = (f64::INFINITY, 0);
            for (i, row) in data.features.rows().into_iter().enumerate() {
                let d: f64 = row.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, i);
                }
            }
            Ok(RepresentativeSample {
                label,
                row_index: best.1,
                row: data.row(best.1),
            })
        })
        .collect()
}

/// A trained network seen as the scalar function being explained.
pub struct ModelOutput<'a> {
    pub model: &'a Mlp,
    pub task: Task,
}

impl<'a> ModelOutput<'a> {
    pub fn new(model: &'a Mlp, task: Task) -> Result<Self> {
        match task {
            Task::Regression if model.output_dim() != 1 => {
                return Err(Error::Config(format!(
                    "regression needs one output, model has {}",
                    model.output_dim()
                )))
            }
            Task::Classification { class_index, .. } if class_index >= model.output_dim() => {
                return Err(Error::Index {
                    index: class_index,
                    len: model.output_dim(),
                })
            }
            _ => {}
        }
        Ok(ModelOutput { model, task })
    }

    /// Whether mixed partials of order two and above can be nonzero.
    pub fn is_twice_differentiable(&self) -> bool {
        self.model.config.activation.is_smooth()
            || matches!(self.task, Task::Classification { logit: false, .. })
    }
}

impl ScalarFn for ModelOutput<'_> {
    fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let out = self.model.forward(x)?;
        match self.task {
            Task::Regression => Ok(out[0].clone()),
            Task::Classification {
                class_index, logit, ..
            } => {
                if logit {
                    Ok(out[class_index].clone())
                } else {
                    Ok(softmax(&out)?.swap_remove(class_index))
                }
            }
        }
    }
}

/// Tag budget for one lattice evaluation of candidates of size `size`.
fn lattice_width(size: usize) -> usize {
    (size + 1).max(4).min(MAX_TAGS).max(size)
}

/// Packs same-size candidates into lattices: a candidate joins the current
/// group while the union of tagged variables fits the width.
fn plan_lattices(candidates: &[Vec<usize>]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let Some(size) = candidates.first().map(Vec::len) else {
        return Vec::new();
    };
    let width = lattice_width(size);
    let mut taken = vec![false; candidates.len()];
    let mut groups = Vec::new();
    for start in 0..candidates.len() {
        if taken[start] {
            continue;
        }
        let mut vars: BTreeSet<usize> = candidates[start].iter().copied().collect();
        let mut members = vec![start];
        taken[start] = true;
        for (c, cand) in candidates.iter().enumerate().skip(start + 1) {
            if taken[c] {
                continue;
            }
            let extra = cand.iter().filter(|v| !vars.contains(v)).count();
            if vars.len() + extra <= width {
                vars.extend(cand.iter().copied());
                members.push(c);
                taken[c] = true;
            }
        }
        groups.push((vars.into_iter().collect(), members));
    }
    groups
}

fn eval_lattice<F: ScalarFn>(
    f: &F,
    sample: &[f64],
    vars: &[usize],
    members: &[Vec<usize>],
) -> Result<Vec<f64>> {
    let seeded = CrossDual::seed(sample, vars)?;
    let out = f.eval(&seeded)?;
    Ok(members
        .iter()
        .map(|set| {
            let tags: Vec<u32> = set.iter().map(|&v| v as u32).collect();
            out.coeff_for(&tags).expect("candidate inside its lattice")
        })
        .collect())
}

/// Cross partials of `f` at `sample` for each candidate subset, sharing
/// one lattice evaluation between candidates whose variables overlap.
pub fn local_ies<F: ScalarFn>(
    f: &F,
    sample: &[f64],
    candidates: &[Vec<usize>],
) -> Result<BTreeMap<Vec<usize>, f64>> {
    let (values, failures) = local_ies_lenient(f, sample, candidates)?;
    if let Some(e) = failures.into_iter().next() {
        return Err(e);
    }
    Ok(values)
}

/// Like [`local_ies`], but candidates whose evaluation hits a domain or
/// singularity error are left out and the errors returned.
fn local_ies_lenient<F: ScalarFn>(
    f: &F,
    sample: &[f64],
    candidates: &[Vec<usize>],
) -> Result<(BTreeMap<Vec<usize>, f64>, Vec<Error>)> {
    for c in candidates {
        if c.len() > MAX_TAGS {
            return Err(Error::Capacity {
                requested: c.len(),
                capacity: MAX_TAGS,
            });
        }
        if let Some(&bad) = c.iter().find(|&&v| v >= sample.len()) {
            return Err(Error::Index {
                index: bad,
                len: sample.len(),
            });
        }
    }
    let mut by_size: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for c in candidates {
        let mut s = c.clone();
        s.sort_unstable();
        by_size.entry(s.len()).or_default().push(s);
    }
    let mut values = BTreeMap::new();
    let mut failures = Vec::new();
    for (_, sets) in by_size {
        let groups = plan_lattices(&sets);
        let results: Vec<Result<Vec<f64>>> = groups
            .par_iter()
            .map(|(vars, members)| {
                let member_sets: Vec<Vec<usize>> = members.iter().map(|&m| sets[m].clone()).collect();
                eval_lattice(f, sample, vars, &member_sets)
            })
            .collect();
        for ((_, members), res) in groups.iter().zip(results) {
            match res {
                Ok(vals) => {
                    for (&m, v) in members.iter().zip(vals) {
                        values.insert(sets[m].clone(), v);
                    }
                }
                Err(e @ (Error::Domain { .. } | Error::Singularity | Error::OutOfDomain { .. })) => {
                    failures.push(e)
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok((values, failures))
}

/// Raw local cross partials at one representative, following the
/// exhaustive-then-subsampled candidate schedule.
#[derive(Clone, Debug)]
pub struct LocalEffects {
    pub sample: RepresentativeSample,
    pub values: BTreeMap<Vec<usize>, f64>,
    /// For each order above the exhaustive ones, the top-k subsets of the
    /// previous order that were extended.
    pub parents: BTreeMap<usize, Vec<Vec<usize>>>,
}

/// Top `k` subsets of one size by `|value|`, ties broken lexicographically.
pub fn top_k_of_order(values: &BTreeMap<Vec<usize>, f64>, order: usize, k: usize) -> Vec<Vec<usize>> {
    let mut of_order: Vec<(&Vec<usize>, f64)> = values
        .iter()
        .filter(|(s, _)| s.len() == order)
        .map(|(s, v)| (s, f64::abs(*v)))
        .collect();
    // BTreeMap iteration is lexicographic; a stable sort keeps that for ties
    of_order.sort_by(|a, b| b.1.total_cmp(&a.1));
    of_order.into_iter().take(k).map(|(s, _)| s.clone()).collect()
}

/// Single-variable extensions of each parent, deduplicated and sorted.
pub fn extend_parents(parents: &[Vec<usize>], n_vars: usize) -> Vec<Vec<usize>> {
    let mut out = BTreeSet::new();
    for p in parents {
        for j in (0..n_vars).filter(|j| !p.contains(j)) {
            let mut s = p.clone();
            s.push(j);
            s.sort_unstable();
            out.insert(s);
        }
    }
    out.into_iter().collect()
}

pub fn local_schedule<F: ScalarFn>(f: &F, sample: RepresentativeSample, cfg: &TnidConfig) -> Result<LocalEffects> {
    let p = f.input_dim();
    let mut values = BTreeMap::new();
    let mut parents = BTreeMap::new();
    let record = |found: (BTreeMap<Vec<usize>, f64>, Vec<Error>), values: &mut BTreeMap<Vec<usize>, f64>| {
        for e in found.1 {
            log::warn!("{} representative (row {}) dropped for some subsets: {e}", sample.label, sample.row_index);
        }
        values.extend(found.0);
    };
    let all: Vec<usize> = (0..p).collect();
    for order in 2..=cfg.full_order.min(p) {
        let candidates = combinations(&all, order);
        record(local_ies_lenient(f, &sample.row, &candidates)?, &mut values);
    }
    for order in cfg.full_order + 1..=cfg.max_order.min(p) {
        let top = top_k_of_order(&values, order - 1, cfg.top_k);
        let candidates = extend_parents(&top, p);
        parents.insert(order, top);
        record(local_ies_lenient(f, &sample.row, &candidates)?, &mut values);
    }
    Ok(LocalEffects {
        sample,
        values,
        parents,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedSet {
    pub set: Vec<usize>,
    pub strength: f64,
    /// Raw local cross partial per representative, `None` where the
    /// representative never evaluated this subset.
    #[serde(skip)]
    pub per_representative: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRanking {
    pub config: TnidConfig,
    pub representatives: Vec<RepresentativeSample>,
    /// Subsets per order, by decreasing `|strength|`.
    pub orders: BTreeMap<usize, Vec<RankedSet>>,
    /// Per representative (same order as `representatives`), the parents
    /// extended at each subsampled order.
    pub parents: Vec<BTreeMap<usize, Vec<Vec<usize>>>>,
}

#[derive(Serialize)]
struct RankingJson<'a> {
    config: &'a TnidConfig,
    orders: BTreeMap<String, &'a Vec<RankedSet>>,
    representatives: &'a Vec<RepresentativeSample>,
}

impl InteractionRanking {
    pub fn order(&self, order: usize) -> &[RankedSet] {
        self.orders.get(&order).map_or(&[], Vec::as_slice)
    }

    pub fn scores(&self, order: usize) -> BTreeMap<Vec<usize>, f64> {
        self.order(order)
            .iter()
            .map(|r| (r.set.clone(), r.strength))
            .collect()
    }

    /// Leading `k` subsets of an order.
    pub fn top(&self, order: usize, k: usize) -> Vec<Vec<usize>> {
        self.order(order).iter().take(k).map(|r| r.set.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = RankingJson {
            config: &self.config,
            orders: self.orders.iter().map(|(k, v)| (k.to_string(), v)).collect(),
            representatives: &self.representatives,
        };
        serde_json::to_string_pretty(&doc).expect("ranking serializes")
    }

    /// Subsets at a subsampled order that were not generated from a top-k
    /// parent of the same representative. Recomputed from the retained raw
    /// values, so an empty result certifies the candidate schedule.
    pub fn subsampling_violations(&self) -> Vec<(usize, Vec<usize>)> {
        let cfg = &self.config;
        let mut bad = Vec::new();
        for (j, _) in self.representatives.iter().enumerate() {
            let mut raw = BTreeMap::new();
            for ranked in self.orders.values().flatten() {
                if let Some(Some(v)) = ranked.per_representative.get(j) {
                    raw.insert(ranked.set.clone(), *v);
                }
            }
            for order in cfg.full_order + 1..=cfg.max_order {
                let top = top_k_of_order(&raw, order - 1, cfg.top_k);
                for set in raw.keys().filter(|s| s.len() == order) {
                    let has_parent = top.iter().any(|p| p.iter().all(|v| set.contains(v)));
                    if !has_parent {
                        bad.push((j, set.clone()));
                    }
                }
            }
        }
        bad
    }
}

/// Combines local effects of the given representatives into a ranking.
pub fn aggregate_effects(locals: &[&LocalEffects], cfg: &TnidConfig) -> InteractionRanking {
    let mut union: BTreeSet<&Vec<usize>> = BTreeSet::new();
    for l in locals {
        union.extend(l.values.keys());
    }
    let mut orders: BTreeMap<usize, Vec<RankedSet>> = BTreeMap::new();
    for set in union {
        let per: Vec<Option<f64>> = locals.iter().map(|l| l.values.get(set).copied()).collect();
        let transformed: Vec<f64> = per.iter().flatten().map(|&v| cfg.task.transform(v)).collect();
        orders.entry(set.len()).or_default().push(RankedSet {
            set: set.clone(),
            strength: cfg.aggregation.apply(&transformed),
            per_representative: per,
        });
    }
    for list in orders.values_mut() {
        // entries arrive in lexicographic order; stable sort keeps it on ties
        list.sort_by(|a, b| f64::abs(b.strength).total_cmp(&f64::abs(a.strength)));
    }
    InteractionRanking {
        config: cfg.clone(),
        representatives: locals.iter().map(|l| l.sample.clone()).collect(),
        orders,
        parents: locals.iter().map(|l| l.parents.clone()).collect(),
    }
}

fn check_inputs<F: ScalarFn>(f: &F, data: &Dataset, cfg: &TnidConfig) -> Result<()> {
    cfg.validate()?;
    if data.n_features() != f.input_dim() {
        return Err(Error::Shape(format!(
            "data has {} features, function takes {}",
            data.n_features(),
            f.input_dim()
        )));
    }
    Ok(())
}

/// Local effects at each requested representative, computed in parallel
/// and returned in the order requested.
pub fn local_effects<F: ScalarFn>(
    f: &F,
    data: &Dataset,
    labels: &[Representative],
    cfg: &TnidConfig,
) -> Result<Vec<LocalEffects>> {
    let reps = representative_samples(data, labels, cfg.seed)?;
    reps.into_par_iter()
        .map(|r| local_schedule(f, r, cfg))
        .collect()
}

/// Interaction detection on any differentiable function.
pub fn detect<F: ScalarFn>(f: &F, data: &Dataset, cfg: &TnidConfig) -> Result<InteractionRanking> {
    check_inputs(f, data, cfg)?;
    let locals = local_effects(f, data, &cfg.representatives, cfg)?;
    let refs: Vec<&LocalEffects> = locals.iter().collect();
    Ok(aggregate_effects(&refs, cfg))
}

/// Interaction detection on a trained network. Raw data is scaled with the
/// network's stored normalization first.
pub fn detect_model(model: &Mlp, data: &Dataset, cfg: &TnidConfig) -> Result<InteractionRanking> {
    let f = ModelOutput::new(model, cfg.task)?;
    if !f.is_twice_differentiable() {
        return Err(Error::Activation(
            "piecewise-linear network output has zero mixed partials; train with GELU".into(),
        ));
    }
    let data = match (&model.normalization, data.normalized) {
        (Some(stats), false) => data.normalize_with(stats)?,
        _ => data.clone(),
    };
    detect(&f, &data, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub representatives: Vec<Representative>,
    pub aggregation: Aggregate,
    pub score: Option<f64>,
}

/// `"‹Agg› Of ‹Samples›"`, e.g. `"Mean Of Mean-Min-Mode-Rand"`.
pub fn sweep_label(agg: Aggregate, reps: &[Representative]) -> String {
    let mut sorted = reps.to_vec();
    sorted.sort();
    let names: Vec<&str> = sorted.iter().map(|r| r.short_name()).collect();
    format!("{} Of {}", agg.short_name(), names.join("-"))
}

/// Scores every non-empty subset of representatives under every
/// aggregation with `eval`, best first. Each representative's local
/// effects are computed once and shared by all rows.
pub fn aggregation_sweep<F, E>(f: &F, data: &Dataset, base: &TnidConfig, eval: E) -> Result<Vec<SweepRow>>
where
    F: ScalarFn,
    E: Fn(&InteractionRanking) -> Option<f64> + Sync,
{
    check_inputs(f, data, base)?;
    let locals = local_effects(f, data, &Representative::ALL, base)?;
    let mut jobs = Vec::new();
    for mask in 1usize..1 << Representative::ALL.len() {
        let reps: Vec<Representative> = Representative::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, r)| *r)
            .collect();
        for agg in Aggregate::ALL {
            jobs.push((mask, reps.clone(), agg));
        }
    }
    let mut rows: Vec<SweepRow> = jobs
        .into_par_iter()
        .map(|(mask, reps, agg)| {
            let chosen: Vec<&LocalEffects> = locals
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, l)| l)
                .collect();
            let cfg = TnidConfig {
                representatives: reps.clone(),
                aggregation: agg,
                ..base.clone()
            };
            let ranking = aggregate_effects(&chosen, &cfg);
            SweepRow {
                label: sweep_label(agg, &reps),
                representatives: reps,
                aggregation: agg,
                score: eval(&ranking),
            }
        })
        .collect();
    rows.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}
