//! Dense linear algebra, a reverse-mode tape and the Adam optimizer.

mod adam;
mod linalg;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use linalg::{mat_exp, mat_exp_series, mat_pow, sym_eig, Matrix, SpectralDecomposition};
pub use tape::{Activation, Gradients, Tape, Var};
pub use tensor::Tensor;
