//! AUC scoring of interaction rankings against known ground truth.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{train, Mlp, MlpConfig, TrainConfig, TrainingReport};
use crate::synth::{combinations, FunctionId, GroundTruth, SynthFunction, ARITY};
use crate::tnid::{detect, detect_model, InteractionRanking, TnidConfig};

/// ROC AUC of `scores` as a classifier of `labels`, counting each tied
/// positive/negative pair as one half.
pub fn auc_from_labels(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::UndefinedAuc(format!("non-finite score {bad}")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc(format!("{pos} positives and {neg} negatives")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over runs of equal scores
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        rank_sum += mid * order[start..end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// AUC over the scored universe; every positive must be scored.
pub fn auc(scores: &BTreeMap<Vec<usize>, f64>, positives: &BTreeSet<Vec<usize>>) -> Result<f64> {
    if let Some(missing) = positives.iter().find(|p| !scores.contains_key(*p)) {
        return Err(Error::UndefinedAuc(format!("positive {missing:?} has no score")));
    }
    let (values, labels): (Vec<f64>, Vec<bool>) = scores.iter().map(|(s, &v)| (v, positives.contains(s))).unzip();
    auc_from_labels(&values, &labels)
}

/// `|strength|` of every pair of `p` variables, zero for pairs the ranking
/// never scored.
pub fn pair_scores(ranking: &InteractionRanking, p: usize) -> BTreeMap<Vec<usize>, f64> {
    let scored = ranking.scores(2);
    let all: Vec<usize> = (0..p).collect();
    combinations(&all, 2)
        .into_iter()
        .map(|pair| {
            let v = scored.get(&pair).map_or(0.0, |v| v.abs());
            (pair, v)
        })
        .collect()
}

pub fn pairwise_auc(ranking: &InteractionRanking, truth: &GroundTruth, p: usize) -> Result<f64> {
    auc(&pair_scores(ranking, p), &truth.interactions(2))
}

/// Mean over orders of the AUC among each order's scored subsets; orders
/// where the AUC is undefined are skipped.
pub fn mean_auc_across_orders(ranking: &InteractionRanking, truth: &GroundTruth, p: usize) -> Option<f64> {
    let mut aucs = Vec::new();
    for (&order, list) in &ranking.orders {
        let result = if order == 2 {
            pairwise_auc(ranking, truth, p)
        } else {
            let scores: BTreeMap<Vec<usize>, f64> = list.iter().map(|r| (r.set.clone(), r.strength.abs())).collect();
            let positives = scores.keys().filter(|s| truth.contains(s)).cloned().collect();
            auc(&scores, &positives)
        };
        if let Ok(a) = result {
            aucs.push(a);
        }
    }
    (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// AUCs of two rankings at one order against the true members of the union
/// of their top-`k` lists. Each detector is scored over its own candidates
/// plus the union, unscored union members counting as zero.
pub fn relative_higher_order(
    a: &InteractionRanking,
    b: &InteractionRanking,
    order: usize,
    k: usize,
    truth: &GroundTruth,
) -> Result<(f64, f64)> {
    let union: BTreeSet<Vec<usize>> = a.top(order, k).into_iter().chain(b.top(order, k)).collect();
    if union.is_empty() {
        return Err(Error::UndefinedAuc(format!("no order-{order} subsets in either ranking")));
    }
    let positives: BTreeSet<Vec<usize>> = union.iter().filter(|s| truth.contains(s)).cloned().collect();
    let score = |r: &InteractionRanking| {
        let mut scores: BTreeMap<Vec<usize>, f64> = r.order(order).iter().map(|s| (s.set.clone(), s.strength.abs())).collect();
        for s in &union {
            scores.entry(s.clone()).or_insert(0.0);
        }
        auc(&scores, &positives)
    };
    Ok((score(a)?, score(b)?))
}

/// Pairwise AUC of detection run on the exact function instead of a model.
pub fn oracle_pairwise_auc(f: &SynthFunction, samples: usize, seed: u64, cfg: &TnidConfig) -> Result<f64> {
    let data = f.sample_dataset(samples, seed)?;
    let cfg = TnidConfig {
        max_order: 2,
        full_order: 2,
        seed,
        ..cfg.clone()
    };
    let ranking = detect(f, &data, &cfg)?;
    pairwise_auc(&ranking, &f.ground_truth(), ARITY)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub functions: Vec<FunctionId>,
    pub trials: usize,
    pub samples: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub tnid: TnidConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            functions: FunctionId::ALL.to_vec(),
            trials: 3,
            samples: 10_000,
            seed: 0,
            hidden: MlpConfig::DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig::default(),
            tnid: TnidConfig::default(),
        }
    }
}

impl SuiteConfig {
    /// Seed for data, weights and representatives of one trial.
    pub fn trial_seed(&self, id: FunctionId, trial: usize) -> u64 {
        self.seed
            .wrapping_mul(1_000_003)
            .wrapping_add(id.number() as u64 * 1_000)
            .wrapping_add(trial as u64)
    }
}

/// One trained model and its detection result.
#[derive(Clone, Debug)]
pub struct Trial {
    pub function: FunctionId,
    pub trial: usize,
    pub seed: u64,
    pub model: Mlp,
    pub report: TrainingReport,
    pub ranking: InteractionRanking,
    pub pairwise_auc: f64,
    pub subsampling_violations: usize,
}

pub fn run_trial(cfg: &SuiteConfig, id: FunctionId, trial: usize) -> Result<Trial> {
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let seed = cfg.trial_seed(id, trial);
    let f = SynthFunction::new(id);
    let data = f.sample_dataset(cfg.samples, seed)?.normalize(false)?;
    let mlp = MlpConfig {
        hidden: cfg.hidden.clone(),
        seed,
        ..MlpConfig::new(ARITY, 1)
    };
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let (model, report) = train(&data, &mlp, &train_cfg)?;
    let tnid = TnidConfig {
        seed,
        ..cfg.tnid.clone()
    };
    let ranking = detect_model(&model, &data, &tnid)?;
    let pairwise_auc = pairwise_auc(&ranking, &f.ground_truth(), ARITY)?;
    let subsampling_violations = ranking.subsampling_violations().len();
    log::info!(
        "{id} trial {trial}: {} epochs, val loss {:.3e}, pairwise AUC {pairwise_auc:.4}",
        report.stopped_epoch,
        report.best_val_loss()
    );
    Ok(Trial {
        function: id,
        trial,
        seed,
        model,
        report,
        ranking,
        pairwise_auc,
        subsampling_violations,
    })
}

/// Every (function, trial) pair, in parallel, ordered by function then trial.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<Trial>> {
    let jobs: Vec<(FunctionId, usize)> = cfg
        .functions
        .iter()
        .flat_map(|&id| (0..cfg.trials).map(move |t| (id, t)))
        .collect();
    jobs.into_par_iter().map(|(id, t)| run_trial(cfg, id, t)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucRow {
    pub function: FunctionId,
    pub aucs: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub order: usize,
    pub rows: Vec<AucRow>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl AucReport {
    pub fn from_trials(trials: &[Trial]) -> AucReport {
        let mut by_fn: BTreeMap<FunctionId, Vec<f64>> = BTreeMap::new();
        for t in trials {
            by_fn.entry(t.function).or_default().push(t.pairwise_auc);
        }
        let rows = by_fn
            .into_iter()
            .map(|(function, aucs)| {
                let (mean, std) = mean_std(&aucs);
                AucRow {
                    function,
                    aucs,
                    mean,
                    std,
                }
            })
            .collect();
        AucReport { order: 2, rows }
    }

    /// Mean of the per-function mean AUCs.
    pub fn average(&self) -> f64 {
        self.rows.iter().map(|r| r.mean).sum::<f64>() / self.rows.len() as f64
    }

    pub fn row(&self, id: FunctionId) -> Option<&AucRow> {
        self.rows.iter().find(|r| r.function == id)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,mean_auc,std\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.6},{:.6}\n", r.function, r.mean, r.std));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &a) in scores.iter().enumerate() {
            for (j, &b) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += if a > b {
                        1.0
                    } else if a == b {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_from_labels(&[3.0, 2.0, 1.0, 0.0], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc_from_labels(&[1.0; 4], &[true, false, true, false]).unwrap(), 0.5);
        let by_hand = auc_from_labels(&[3.0, 2.0, 1.0], &[true, false, true]).unwrap();
        assert_eq!(by_hand, 0.5);
        assert_eq!(by_hand, brute(&[3.0, 2.0, 1.0], &[true, false, true]));
        assert!(matches!(auc_from_labels(&[1.0, 2.0], &[true, true]), Err(Error::UndefinedAuc(_))));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..=50).prop_flat_map(|n| {
            (
                prop::collection::vec((-5i32..5).prop_map(|v| v as f64 * 0.5), n),
                prop::collection::vec(any::<bool>(), n),
            )
                .prop_filter("needs both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn auc_matches_pair_count((scores, labels) in instance()) {
            let fast = auc_from_labels(&scores, &labels).unwrap();
            prop_assert!((fast - brute(&scores, &labels)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
        }

        #[test]
        fn auc_is_rank_invariant((scores, labels) in instance()) {
            let mapped: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
            prop_assert_eq!(auc_from_labels(&scores, &labels).unwrap(), auc_from_labels(&mapped, &labels).unwrap());
        }

        #[test]
        fn negation_complements(n in 2usize..40, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            labels[0] = true;
            labels[1] = false;
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let sum = auc_from_labels(&scores, &labels).unwrap() + auc_from_labels(&neg, &labels).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_pipeline_is_perfect() {
        // F7's {3,4} term is gated by x3*x4 + x6 > 0, which only the max
        // representative reliably reaches
        let cfg = TnidConfig {
            representatives: crate::tnid::Representative::ALL.to_vec(),
            ..TnidConfig::default()
        };
        for f in SynthFunction::all() {
            let a = oracle_pairwise_auc(&f, 500, 3, &cfg).unwrap();
            assert_eq!(a, 1.0, "{}", f.id);
        }
    }

    #[test]
    fn relative_protocol() {
        let f = SynthFunction::new(FunctionId::F8);
        let data = f.sample_dataset(300, 4).unwrap();
        let cfg = TnidConfig {
            max_order: 3,
            ..TnidConfig::default()
        };
        let r = detect(&f, &data, &cfg).unwrap();
        let (a, b) = relative_higher_order(&r, &r, 3, 10, &f.ground_truth()).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.5);
    }

    #[test]
    fn report_csv() {
        let report = AucReport {
            order: 2,
            rows: vec![AucRow {
                function: FunctionId::F8,
                aucs: vec![1.0, 0.5],
                mean: 0.75,
                std: 0.25,
            }],
        };
        assert_eq!(report.to_csv(), "id,mean_auc,std\nF8,0.750000,0.250000\n");
        assert_eq!(mean_std(&[1.0, 0.5]), (0.75, 0.25));
    }
}
