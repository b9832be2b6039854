use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::mlp::{activate_in_place, activation_slope, row_sums, Mlp, MlpConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.003,
            max_epochs: 200,
            patience: 10,
            batch_size: 100,
            val_fraction: 0.2,
            optimizer: Optimizer::Adam,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config("patience exceeds max_epochs".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainingReport {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch - 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Progress {
    Improved,
    Waiting,
    Stop,
}

/// Patience-based early stopping on a validation loss.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Progress {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            Progress::Improved
        } else if epoch - self.best_epoch >= self.patience {
            Progress::Stop
        } else {
            Progress::Waiting
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Loss {
    Mse,
    CrossEntropy,
}

/// Minimizes squared error (one output) or softmax cross-entropy (several
/// outputs, targets as class probabilities) and returns the weights of the
/// best validation epoch. Single-threaded and bit-reproducible for fixed
/// seeds.
pub fn train(data: &Dataset, mcfg: &MlpConfig, tcfg: &TrainConfig) -> Result<(Mlp, TrainingReport)> {
    tcfg.validate()?;
    mcfg.validate()?;
    if data.len() < 2 {
        return Err(Error::Config("need at least two samples to train".into()));
    }
    if data.n_features() != mcfg.input_dim || data.n_targets() != mcfg.output_dim {
        return Err(Error::Shape(format!(
            "data is {} -> {}, network is {} -> {}",
            data.n_features(),
            data.n_targets(),
            mcfg.input_dim,
            mcfg.output_dim
        )));
    }
    if !data.normalized {
        log::warn!("training on unnormalized features");
    }
    let loss = if mcfg.output_dim > 1 {
        Loss::CrossEntropy
    } else {
        Loss::Mse
    };

    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((data.len() as f64 * tcfg.val_fraction).round() as usize).clamp(1, data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let x_val = data.features.select(Axis(0), val_idx);
    let y_val = data.targets.select(Axis(0), val_idx);
    let x_train = data.features.select(Axis(0), train_idx);
    let y_train = data.targets.select(Axis(0), train_idx);

    let mut params = Mlp::init(mcfg.clone())?.to_arrays();
    let mut state = OptimizerState::new(tcfg, &params);
    let mut best = params.clone();
    let mut stopper = EarlyStopping::new(tcfg.patience);
    let mut report = TrainingReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
    };

    let mut batch_order: Vec<usize> = (0..x_train.nrows()).collect();
    for epoch in 1..=tcfg.max_epochs {
        batch_order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in batch_order.chunks(tcfg.batch_size) {
            let xb = x_train.select(Axis(0), chunk);
            let yb = y_train.select(Axis(0), chunk);
            let (batch_loss, grads) = loss_and_gradients(mcfg, &params, xb.view(), yb.view(), loss);
            if !batch_loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    loss: batch_loss,
                });
            }
            total += batch_loss * chunk.len() as f64;
            state.step(&mut params, &grads);
        }
        let train_loss = total / x_train.nrows() as f64;
        let val_loss = evaluate(mcfg, &params, x_val.view(), y_val.view(), loss);
        if !val_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                loss: val_loss,
            });
        }
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.stopped_epoch = epoch;
        match stopper.observe(epoch, val_loss) {
            Progress::Improved => best.clone_from(&params),
            Progress::Waiting => {}
            Progress::Stop => break,
        }
    }
    report.best_epoch = stopper.best_epoch();
    let mut model = Mlp::from_arrays(mcfg.clone(), &best);
    model.normalization = data.normalization();
    Ok((model, report))
}

type Params = Vec<(Array2<f64>, Array1<f64>)>;

fn forward_cached(
    mcfg: &MlpConfig,
    params: &Params,
    x: ArrayView2<f64>,
) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    // pre-activations z_l and layer inputs h_l
    let mut pre = Vec::with_capacity(params.len());
    let mut inputs = Vec::with_capacity(params.len());
    let mut h = x.to_owned();
    let last = params.len() - 1;
    for (li, (w, b)) in params.iter().enumerate() {
        let mut z = h.dot(&w.t());
        z += b;
        inputs.push(h);
        let mut next = z.clone();
        if li != last {
            activate_in_place(mcfg.activation, &mut next);
        }
        pre.push(z);
        h = next;
    }
    (pre, inputs)
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

fn loss_value(out: &Array2<f64>, y: ArrayView2<f64>, loss: Loss) -> (f64, Array2<f64>) {
    let n = out.nrows() as f64;
    match loss {
        Loss::Mse => {
            let diff = out - &y;
            let q = out.ncols() as f64;
            let value = diff.iter().map(|d| d * d).sum::<f64>() / (n * q);
            (value, diff * (2.0 / (n * q)))
        }
        Loss::CrossEntropy => {
            let p = softmax_rows(out);
            let value = -p
                .iter()
                .zip(y.iter())
                .map(|(pi, yi)| if *yi > 0.0 { yi * pi.max(1e-300).ln() } else { 0.0 })
                .sum::<f64>()
                / n;
            (value, (p - &y) / n)
        }
    }
}

fn loss_and_gradients(
    mcfg: &MlpConfig,
    params: &Params,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    loss: Loss,
) -> (f64, Params) {
    let (pre, inputs) = forward_cached(mcfg, params, x);
    let (value, mut delta) = loss_value(pre.last().expect("at least one layer"), y, loss);
    let mut grads: Params = Vec::with_capacity(params.len());
    for li in (0..params.len()).rev() {
        let gw = delta.t().dot(&inputs[li]);
        let gb = row_sums(&delta);
        if li > 0 {
            let back = delta.dot(&params[li].0);
            delta = back * activation_slope(mcfg.activation, &pre[li - 1]);
        }
        grads.push((gw, gb));
    }
    grads.reverse();
    (value, grads)
}

fn evaluate(mcfg: &MlpConfig, params: &Params, x: ArrayView2<f64>, y: ArrayView2<f64>, loss: Loss) -> f64 {
    let mut total = 0.0;
    let chunk = 1024;
    let mut start = 0;
    while start < x.nrows() {
        let end = (start + chunk).min(x.nrows());
        let (pre, _) = forward_cached(mcfg, params, x.slice(s![start..end, ..]));
        let (v, _) = loss_value(pre.last().expect("layer"), y.slice(s![start..end, ..]), loss);
        total += v * (end - start) as f64;
        start = end;
    }
    total / x.nrows() as f64
}

struct OptimizerState {
    kind: crate::model::train::Optimizer,
    lr: f64,
    step: i32,
    m: Params,
    v: Params,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl OptimizerState {
    fn new(cfg: &TrainConfig, params: &Params) -> Self {
        let zeros: Params = params
            .iter()
            .map(|(w, b)| (Array2::zeros(w.raw_dim()), Array1::zeros(b.len())))
            .collect();
        OptimizerState {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, params: &mut Params, grads: &Params) {
        self.step += 1;
        let lr = self.lr;
        match self.kind {
            Optimizer::Sgd => {
                for ((w, b), (gw, gb)) in params.iter_mut().zip(grads) {
                    w.scaled_add(-lr, gw);
                    b.scaled_add(-lr, gb);
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - BETA1.powi(self.step);
                let c2 = 1.0 - BETA2.powi(self.step);
                let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                };
                for (li, (w, b)) in params.iter_mut().enumerate() {
                    let (mw, mb) = &mut self.m[li];
                    let (vw, vb) = &mut self.v[li];
                    let (gw, gb) = &grads[li];
                    ndarray::Zip::from(w)
                        .and(mw)
                        .and(vw)
                        .and(gw)
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                    ndarray::Zip::from(b)
                        .and(mb)
                        .and(vb)
                        .and(gb)
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;
    use rand::Rng;

    fn linear_data(n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        Dataset::new(
            Array2::from_shape_vec((n, 1), x).unwrap(),
            Array2::from_shape_vec((n, 1), y).unwrap(),
        )
        .unwrap()
        .normalize(false)
        .unwrap()
    }

    fn small_config() -> MlpConfig {
        MlpConfig {
            input_dim: 1,
            hidden: vec![16, 8],
            output_dim: 1,
            activation: Activation::Gelu,
            seed: 4,
        }
    }

    #[test]
    fn early_stopping_waits_out_the_patience() {
        let mut s = EarlyStopping::new(10);
        let mut stopped = None;
        for epoch in 1..=50 {
            let loss = if epoch <= 5 {
                10.0 - epoch as f64
            } else {
                epoch as f64
            };
            if s.observe(epoch, loss) == Progress::Stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(15));
        assert_eq!(s.best_epoch(), 5);
    }

    #[test]
    fn learns_a_linear_target() {
        let data = linear_data(1000);
        let mut mcfg = MlpConfig::new(1, 1);
        mcfg.seed = 2;
        let tcfg = TrainConfig {
            seed: 3,
            ..TrainConfig::default()
        };
        let (_, report) = train(&data, &mcfg, &tcfg).unwrap();
        assert!(report.best_val_loss() < 1e-3, "{}", report.best_val_loss());
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = linear_data(300);
        let tcfg = TrainConfig {
            max_epochs: 5,
            patience: 5,
            ..TrainConfig::default()
        };
        let (a, ra) = train(&data, &small_config(), &tcfg).unwrap();
        let (b, rb) = train(&data, &small_config(), &tcfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn returned_weights_come_from_the_best_epoch() {
        let data = linear_data(300);
        let tcfg = TrainConfig {
            max_epochs: 30,
            patience: 3,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let (model, report) = train(&data, &small_config(), &tcfg).unwrap();
        let min = report.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_val_loss(), min);

        // recompute the validation loss of the returned weights
        let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let val = data.select(&order[..60]);
        let pred = model.predict(val.features.view());
        let mse = (&pred - &val.targets).mapv(|d| d * d).mean().unwrap();
        assert!((mse - min).abs() <= 1e-12 * min.max(1.0));
    }

    #[test]
    fn divergence_names_the_epoch() {
        let data = linear_data(200);
        let tcfg = TrainConfig {
            learning_rate: 1e200,
            optimizer: Optimizer::Sgd,
            max_epochs: 5,
            patience: 2,
            ..TrainConfig::default()
        };
        match train(&data, &small_config(), &tcfg) {
            Err(Error::Training { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn classification_uses_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 400;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            xs.extend([a, b]);
            let positive = a * b > 0.0;
            ys.extend(if positive { [0.0, 1.0] } else { [1.0, 0.0] });
        }
        let data = Dataset::new(
            Array2::from_shape_vec((n, 2), xs).unwrap(),
            Array2::from_shape_vec((n, 2), ys).unwrap(),
        )
        .unwrap()
        .normalize(false)
        .unwrap();
        let mcfg = MlpConfig {
            input_dim: 2,
            hidden: vec![16, 16],
            output_dim: 2,
            activation: Activation::Gelu,
            seed: 1,
        };
        let (_, report) = train(&data, &mcfg, &TrainConfig::default()).unwrap();
        // chance level is ln 2
        assert!(report.best_val_loss() < 0.4, "{}", report.best_val_loss());
    }

    #[test]
    fn rejects_bad_configs() {
        let data = linear_data(10);
        let bad = TrainConfig {
            val_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&data, &small_config(), &bad), Err(Error::Config(_))));
        let bad = TrainConfig {
            patience: 300,
            ..TrainConfig::default()
        };
        assert!(train(&data, &small_config(), &bad).is_err());
    }
}
