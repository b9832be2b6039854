//! Forward-mode cross partial derivatives on the subset lattice of a small
//! set of tagged variables.

mod dual;
mod elementary;
mod oracle;
mod partitions;
mod scalar;
mod series;

pub use dual::CrossDual;
pub use elementary::Elementary;
pub use oracle::{cross_partial, fd_oracle};
pub use scalar::{Scalar, ScalarFn};

pub(crate) use elementary::sigmoid;

/// Maximum number of tagged variables a [`CrossDual`] can carry.
pub const MAX_TAGS: usize = 8;
