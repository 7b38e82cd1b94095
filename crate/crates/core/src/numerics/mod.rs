//! Dense linear algebra and reverse-mode differentiation.

pub mod linalg;
mod matrix;
pub mod tape;

pub use linalg::{
    cholesky, companion_matrix, companion_spectral_radius, eigenvalues, solve_discrete_lyapunov,
    solve_lower, spectral_radius, stationary_autocovariances, Lu, LyapunovSystem,
};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var};
