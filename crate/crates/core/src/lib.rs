pub mod autodiff;
pub mod cam;
pub mod cli;
pub mod error;
pub mod eval;
pub mod model;
pub mod planted;
pub mod synth;
pub mod tnid;

pub use error::{Error, Result};
