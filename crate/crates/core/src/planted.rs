//! Planted-pair experiment for interaction saliences: the label of a grid
//! of Gaussian feature vectors depends only on the inner product of one
//! seeded pair, and Hessian-CAM should single that pair out.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::sigmoid;
use crate::cam::{hessian_cam, top_interactions, CamOptions, FeatureGrid, SalienceTensor};
use crate::error::Result;
use crate::model::{train, Dataset, Mlp, MlpConfig, TrainConfig};
use crate::tnid::{ModelOutput, Task};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n: usize,
    pub d: usize,
    pub layout: (usize, usize),
    pub samples: usize,
    pub hidden: Vec<usize>,
    /// Fresh grids whose saliences are averaged per seed.
    pub eval_grids: usize,
    pub train: TrainConfig,
    pub cam: CamOptions,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n: 9,
            d: 4,
            layout: (3, 3),
            samples: 4000,
            hidden: vec![64, 32],
            eval_grids: 8,
            train: TrainConfig::default(),
            cam: CamOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedOutcome {
    pub seed: u64,
    pub planted: [usize; 2],
    pub top: [usize; 2],
    pub val_loss: f64,
    pub salience: SalienceTensor,
}

impl PlantedOutcome {
    pub fn hit(&self) -> bool {
        self.top == self.planted
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub planted: [usize; 2],
    pub top: [usize; 2],
    pub hit: bool,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedReport {
    pub hit_rate: f64,
    pub hits: usize,
    pub seeds: Vec<SeedSummary>,
}

pub fn planted_pair(n: usize, seed: u64) -> [usize; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair = sample(&mut rng, n, 2).into_vec();
    pair.sort_unstable();
    [pair[0], pair[1]]
}

fn gaussian_grid(cfg: &PlantedConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..cfg.n * cfg.d).map(|_| StandardNormal.sample(rng)).collect()
}

fn label(cfg: &PlantedConfig, flat: &[f64], [a, b]: [usize; 2]) -> f64 {
    let dot: f64 = (0..cfg.d).map(|p| flat[a * cfg.d + p] * flat[b * cfg.d + p]).sum();
    sigmoid(dot)
}

/// Flattened grids with their planted-pair labels.
pub fn planted_dataset(cfg: &PlantedConfig, pair: [usize; 2], seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(cfg.samples * cfg.n * cfg.d);
    let mut y = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let g = gaussian_grid(cfg, &mut rng);
        y.push(label(cfg, &g, pair));
        x.extend(g);
    }
    let features = Array2::from_shape_vec((cfg.samples, cfg.n * cfg.d), x).expect("sized above");
    let targets = Array2::from_shape_vec((cfg.samples, 1), y).expect("sized above");
    Dataset::new(features, targets)
}

/// Mean salience over `cfg.eval_grids` fresh grids, computed on the
/// network's normalized inputs.
pub fn mean_salience(model: &Mlp, cfg: &PlantedConfig, seed: u64) -> Result<SalienceTensor> {
    let f = ModelOutput::new(model, Task::Regression)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total: Option<SalienceTensor> = None;
    for _ in 0..cfg.eval_grids {
        let raw = gaussian_grid(cfg, &mut rng);
        let flat = match &model.normalization {
            Some(stats) => stats.apply(&raw),
            None => raw,
        };
        let grid = FeatureGrid::new(Array2::from_shape_vec((cfg.n, cfg.d), flat).expect("sized above"))?;
        let s = hessian_cam(&f, &grid, &cfg.cam)?;
        match &mut total {
            None => total = Some(s),
            Some(t) => t.values.iter_mut().zip(&s.values).for_each(|(a, b)| *a += b),
        }
    }
    let mut s = total.expect("at least one grid");
    let k = cfg.eval_grids as f64;
    s.values.iter_mut().for_each(|v| *v /= k);
    Ok(s)
}

pub fn run_seed(cfg: &PlantedConfig, seed: u64) -> Result<PlantedOutcome> {
    let planted = planted_pair(cfg.n, seed);
    let data = planted_dataset(cfg, planted, seed)?.normalize(false)?;
    let mlp = MlpConfig {
        hidden: cfg.hidden.clone(),
        seed,
        ..MlpConfig::new(cfg.n * cfg.d, 1)
    };
    let tcfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let (model, report) = train(&data, &mlp, &tcfg)?;
    let salience = mean_salience(&model, cfg, seed ^ 0x5eed)?;
    let best = &top_interactions(&salience, 1)[0].set;
    log::info!("seed {seed}: planted {planted:?}, top {best:?}");
    Ok(PlantedOutcome {
        seed,
        planted,
        top: [best[0], best[1]],
        val_loss: report.best_val_loss(),
        salience,
    })
}

pub fn run(cfg: &PlantedConfig, seeds: &[u64]) -> Result<(PlantedReport, Vec<PlantedOutcome>)> {
    let outcomes: Vec<PlantedOutcome> = seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<_>>()?;
    let hits = outcomes.iter().filter(|o| o.hit()).count();
    let report = PlantedReport {
        hit_rate: hits as f64 / seeds.len().max(1) as f64,
        hits,
        seeds: outcomes
            .iter()
            .map(|o| SeedSummary {
                seed: o.seed,
                planted: o.planted,
                top: o.top,
                hit: o.hit(),
                val_loss: o.val_loss,
            })
            .collect(),
    };
    Ok((report, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_is_distinct_and_seeded() {
        for seed in 0..50 {
            let [a, b] = planted_pair(9, seed);
            assert!(a < b && b < 9);
            assert_eq!(planted_pair(9, seed), [a, b]);
        }
    }

    #[test]
    fn labels_depend_on_planted_pair_only() {
        let cfg = PlantedConfig {
            samples: 5,
            ..PlantedConfig::default()
        };
        let d = planted_dataset(&cfg, [2, 5], 1).unwrap();
        for i in 0..d.len() {
            let mut row = d.row(i);
            let y = d.targets[[i, 0]];
            assert_eq!(label(&cfg, &row, [2, 5]), y);
            row[0] += 3.0;
            row[4 * cfg.d] -= 1.0;
            assert_eq!(label(&cfg, &row, [2, 5]), y);
        }
    }
}
