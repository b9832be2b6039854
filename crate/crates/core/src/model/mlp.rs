use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Normalization;
use crate::autodiff::{Elementary, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    Relu,
}

impl Activation {
    pub fn apply<S: Scalar>(self, x: &S) -> Result<S> {
        match self {
            Activation::Gelu => gelu(x),
            Activation::Relu => x.apply(Elementary::MaxConst(0.0)),
        }
    }

    /// Whether derivatives of order two and above can be nonzero.
    pub fn is_smooth(self) -> bool {
        matches!(self, Activation::Gelu)
    }
}

/// `0.5 · x · (1 + erf(x / √2))`, the exact Gaussian-error linear unit.
pub fn gelu<S: Scalar>(x: &S) -> Result<S> {
    let cdf = x.scale(FRAC_1_SQRT_2).erf()?.add_const(1.0).scale(0.5);
    Ok(x.clone() * cdf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    pub const DEFAULT_HIDDEN: [usize; 4] = [140, 100, 60, 20];

    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden: Self::DEFAULT_HIDDEN.to_vec(),
            output_dim,
            activation: Activation::Gelu,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be at least 1: {} -> {:?} -> {}",
                self.input_dim, self.hidden, self.output_dim
            )));
        }
        Ok(())
    }

    /// Widths of every layer including input and output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(self.output_dim);
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `outputs × inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Feed-forward network; the activation follows every layer but the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub config: MlpConfig,
    pub layers: Vec<Layer>,
    /// Input scaling the network was trained under, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl Mlp {
    /// Kaiming-uniform fan-in initialization with gain `√(1/3)`: weights and
    /// biases uniform in `±1/√fan_in`.
    pub fn init(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                Layer {
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                    bias: (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect(),
                }
            })
            .collect();
        Ok(Mlp {
            config,
            layers,
            normalization: None,
        })
    }

    pub fn zeros(config: MlpConfig) -> Result<Self> {
        let mut m = Self::init(config)?;
        for l in &mut m.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let widths = self.config.widths();
        if self.layers.len() + 1 != widths.len() {
            return Err(Error::Shape(format!(
                "{} layers for widths {:?}",
                self.layers.len(),
                widths
            )));
        }
        for (l, w) in self.layers.iter().zip(widths.windows(2)) {
            if l.weights.len() != w[0] * w[1] || l.bias.len() != w[1] {
                return Err(Error::Shape(format!("layer {} -> {} has wrong size", w[0], w[1])));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Config("non-finite weight".into()));
            }
        }
        Ok(())
    }

    /// Raw network outputs, evaluated over any scalar type.
    pub fn forward<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut h: Vec<S> = x.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let fan_in = h.len();
            let mut next = Vec::with_capacity(layer.bias.len());
            for (o, &b) in layer.bias.iter().enumerate() {
                let z = S::affine(&layer.weights[o * fan_in..(o + 1) * fan_in], &h, b);
                next.push(if li == last {
                    z
                } else {
                    self.config.activation.apply(&z)?
                });
            }
            h = next;
        }
        Ok(h)
    }

    /// Batched plain evaluation of raw outputs, one row per sample.
    pub fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let params = self.to_arrays();
        let mut h = x.to_owned();
        let last = params.len() - 1;
        for (li, (w, b)) in params.iter().enumerate() {
            let mut z = h.dot(&w.t());
            z += b;
            if li != last {
                activate_in_place(self.config.activation, &mut z);
            }
            h = z;
        }
        h
    }

    pub(crate) fn to_arrays(&self) -> Vec<(Array2<f64>, Array1<f64>)> {
        let widths = self.config.widths();
        self.layers
            .iter()
            .zip(widths.windows(2))
            .map(|(l, w)| {
                (
                    Array2::from_shape_vec((w[1], w[0]), l.weights.clone()).expect("layer shape"),
                    Array1::from(l.bias.clone()),
                )
            })
            .collect()
    }

    pub(crate) fn from_arrays(config: MlpConfig, params: &[(Array2<f64>, Array1<f64>)]) -> Self {
        Mlp {
            config,
            layers: params
                .iter()
                .map(|(w, b)| Layer {
                    weights: w.iter().copied().collect(),
                    bias: b.to_vec(),
                })
                .collect(),
            normalization: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("model serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Mlp = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        m.validate().map_err(|e| Error::parse(path, e))?;
        Ok(m)
    }
}

/// Softmax over raw outputs, shifted by the largest value.
pub fn softmax<S: Scalar>(logits: &[S]) -> Result<Vec<S>> {
    let shift = logits
        .iter()
        .map(Scalar::value)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps = logits
        .iter()
        .map(|z| z.add_const(-shift).exp())
        .collect::<Result<Vec<S>>>()?;
    let mut total = exps[0].clone();
    for e in &exps[1..] {
        total = total + e.clone();
    }
    exps.iter().map(|e| e.try_div(&total)).collect()
}

pub(crate) fn activate_in_place(act: Activation, z: &mut Array2<f64>) {
    match act {
        Activation::Gelu => z.mapv_inplace(|v| 0.5 * v * (1.0 + libm::erf(v * FRAC_1_SQRT_2))),
        Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
    }
}

/// Elementwise activation derivative at pre-activations `z`.
pub(crate) fn activation_slope(act: Activation, z: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Gelu => z.mapv(|v| {
            let cdf = 0.5 * (1.0 + libm::erf(v * FRAC_1_SQRT_2));
            let pdf = (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt();
            cdf + v * pdf
        }),
        Activation::Relu => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
    }
}

pub(crate) fn row_sums(m: &Array2<f64>) -> Array1<f64> {
    m.sum_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{fd_oracle, CrossDual};
    use proptest::prelude::*;

    fn small(seed: u64) -> Mlp {
        Mlp::init(MlpConfig {
            input_dim: 3,
            hidden: vec![5, 4],
            output_dim: 1,
            activation: Activation::Gelu,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(&0.0).unwrap(), 0.0);
        assert!((gelu(&10.0).unwrap() - 10.0).abs() < 1e-8);
        let x = CrossDual::seed(&[0.0], &[0]).unwrap().remove(0);
        assert!((gelu(&x).unwrap().top() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(MlpConfig::new(4, 1)).unwrap();
        assert_eq!(m.forward(&[0.3, -2.0, 5.0, 1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_linear_network() {
        let config = MlpConfig {
            input_dim: 2,
            hidden: vec![],
            output_dim: 2,
            activation: Activation::Gelu,
            seed: 0,
        };
        let mut m = Mlp::zeros(config).unwrap();
        m.layers[0].weights = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(m.forward(&[0.25, -3.5]).unwrap(), vec![0.25, -3.5]);
    }

    #[test]
    fn dual_value_slot_equals_plain_forward() {
        let m = small(3);
        let x = [0.4, -1.1, 0.9];
        let plain = m.forward(&x).unwrap()[0];
        let seeded = CrossDual::seed(&x, &[0, 2]).unwrap();
        let dual = m.forward(&seeded).unwrap();
        assert_eq!(dual[0].value(), plain);
    }

    #[test]
    fn batched_predict_agrees_with_forward() {
        let m = small(9);
        let x = ndarray::array![[0.1, 0.2, 0.3], [-1.0, 0.5, 2.0]];
        let batch = m.predict(x.view());
        for (i, row) in x.rows().into_iter().enumerate() {
            let single = m.forward(&row.to_vec()).unwrap()[0];
            assert!((batch[[i, 0]] - single).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(matches!(small(0).forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_network_is_exactly_linear() {
        let config = MlpConfig {
            input_dim: 2,
            hidden: vec![],
            output_dim: 1,
            activation: Activation::Gelu,
            seed: 0,
        };
        let mut m = Mlp::zeros(config).unwrap();
        m.layers[0].weights = vec![0.5, -2.0];
        let f = |x: [f64; 2]| m.forward(&x).unwrap()[0];
        assert_eq!(f([2.0, 1.0]), 2.0 * f([1.0, 0.5]));
        assert_eq!(f([1.0, 0.0]) + f([0.0, 1.0]), f([1.0, 1.0]));
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p[2] > p[1] && p[1] > p[0]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = small(5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(Mlp::load(&path).unwrap(), m);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert!(json["config"].is_object());
        assert!(json["layers"][0]["weights"].is_array());
        assert!(json["layers"][0]["bias"].is_array());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn gradient_matches_central_difference(
            seed in 0u64..10_000,
            x in prop::array::uniform3(-2.0f64..2.0),
            var in 0usize..3,
        ) {
            let m = small(seed);
            let seeded = CrossDual::seed(&x, &[var]).unwrap();
            let exact = m.forward(&seeded).unwrap()[0].top();
            let fd = fd_oracle(|p| Ok(m.forward(p)?[0]), &x, &[var], 1e-5).unwrap();
            prop_assert!((exact - fd).abs() <= 1e-5 * exact.abs().max(1e-3), "{} vs {}", exact, fd);
        }

        #[test]
        fn config_round_trips(
            input_dim in 1usize..20,
            hidden in prop::collection::vec(1usize..200, 0..5),
            output_dim in 1usize..5,
            seed in any::<u64>(),
            relu in any::<bool>(),
        ) {
            let c = MlpConfig {
                input_dim,
                hidden,
                output_dim,
                activation: if relu { Activation::Relu } else { Activation::Gelu },
                seed,
            };
            let back: MlpConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
