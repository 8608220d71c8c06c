//! Ensemble agents for uncertainty estimation, with and without randomized
//! prior functions and bootstrapped loss perturbations.
//!
//! The crate is organised as a small laboratory:
//!
//! - [`numkit`]: dense symmetric linear algebra, Gaussian beliefs and seeded
//!   random streams shared by everything else.
//! - [`linreg`]: Bayesian linear regression with heteroscedastic noise, the
//!   closed-form ensemble laws for the three agent families and the
//!   SNR-spectrum lower bound for unbiased prior-only ensembles.
//! - [`metrics`]: marginal, joint and dyadic expected KL between predictive
//!   distributions, plus the matching negative log-likelihood.
//! - [`testbed`]: random-MLP classification problems and hand-written
//!   backpropagation for ensembles with additive prior networks.
//! - [`bandit`]: heteroscedastic linear bandits driven by Thompson sampling
//!   from infinite-ensemble laws.
//! - [`stats`]: the handful of summary statistics and sign tests the
//!   experiments report.

pub mod bandit;
pub mod linreg;
pub mod metrics;
pub mod numkit;
pub mod stats;
pub mod testbed;

mod error;
mod family;

pub use error::{Error, Result};
pub use family::EnsembleFamily;
