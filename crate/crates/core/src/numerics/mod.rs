//! Dense kernels, seeded randomness and reverse-mode gradients.

mod matrix;
mod rng;
mod sparse;
mod svd;
mod tape;

pub use matrix::{DenseMatrix, Trans};
pub use rng::RandomSource;
pub use sparse::CsrMatrix;
pub use svd::{svd_top2, thin_svd, Svd, TopTwo};
pub use tape::{log_sigmoid, sigmoid, softmax_rows, GradientTape, Gradients, ParamId, Var};
