// `!(x > 0.0)` is used on purpose so NaN fails validation; dense index loops
// mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod forests;
pub mod graph;
pub mod linalg;
pub mod measure;
pub mod observables;
pub mod oracle;
pub mod parallel;
pub mod quadrature;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
