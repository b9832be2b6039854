//! Feed-forward GELU networks that can be evaluated over cross-derivative
//! numbers, with deterministic training.

mod dataset;
mod mlp;
mod train;

pub use dataset::{Dataset, Normalization};
pub use mlp::{gelu, softmax, Activation, Layer, Mlp, MlpConfig};
pub use train::{train, EarlyStopping, Optimizer, Progress, TrainConfig, TrainingReport};
