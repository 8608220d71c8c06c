//! Minimal dense numerical kernel.
//!
//! Everything here is sized for the dimensions the experiments use (a few
//! hundred at most): row-major dense matrices, a jittered Cholesky, a cyclic
//! Jacobi eigensolver, Gaussian beliefs and counter-based random streams.

mod cholesky;
mod eigen;
mod gaussian;
mod matrix;
mod rng;
mod sampler;

pub use cholesky::{cholesky, Cholesky, JITTER_LADDER};
pub use eigen::{sym_eigen, sym_eigenvalues, JacobiConfig, SymmetricEigen};
pub use gaussian::{draw_gaussian, gaussian_kl, gaussian_kl_lenient, GaussianBelief, GaussianSampler, KL_RESOLUTION};
pub use matrix::{dot, Matrix};
pub use rng::{Generator, RngStream};
pub use sampler::{InputDistribution, InputSampler};
