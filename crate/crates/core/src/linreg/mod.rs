//! Bayesian linear regression with input-dependent noise.
//!
//! Observations follow `y = θ*ᵀx + w` with `θ* ~ N(0, σ₀² I)` and
//! `w | x ~ N(0, σ²(x))`. An ensemble member minimizes the perturbed loss
//!
//! ```text
//! Σₜ ν(xₜ)/2 (θᵀxₜ − yₜ − zₜ)² + λ/2 ‖θ − θ̃‖²
//! ```
//!
//! with per-pair perturbations `zₜ ~ N(0, σ̂²(xₜ))` and an anchor
//! `θ̃ ~ N(0, σ̂₀² I)`. Because the minimizer is linear in the Gaussian noise
//! the law of a member given the data is Gaussian and available in closed
//! form ([`ensemble_law`]), which lets us compare the three families against
//! the exact posterior without sampling any ensemble.

mod data;
mod ensemble;
mod noise;
mod posterior;
mod spectrum;

pub use data::{Dataset, LinRegEnvironment, LinRegSetting};
pub use ensemble::{
    ensemble_law, ensemble_member, loss_gradient, sample_member_draw, EnsembleMemberDraw, EnsembleSpec,
};
pub use noise::{InputFn, NoiseModel};
pub use posterior::{exact_posterior, expected_kl_mc, is_unbiased, McEstimate};
pub use spectrum::{bound_minimizing_prior_variance, snr_spectrum, unbiased_kl_lower_bound, SnrSpectrum};
