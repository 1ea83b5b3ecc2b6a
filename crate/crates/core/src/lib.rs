//! Regression with probability distributions as inputs.
//!
//! Inputs are 1-D Gaussians, 2-D Gaussians or normalized empirical curves.
//! They are compared through squared 2-Wasserstein distances, turned into
//! positive definite RBF kernels k(μ, ν) = γ²·exp(−W₂^{2H}(μ, ν)/l), and
//! fed to kernel ridge regression. Baseline kernels (Legendre projections,
//! χ² histograms, single-direction sliced Wasserstein) share the same
//! ridge machinery.
//!
//! | module | contents |
//! |--------|----------|
//! | [`distributions`] | input types, closed-form and quantile W₂² |
//! | [`kernels`] | kernel families, Gram assembly |
//! | [`ridge`] | fit / predict / leave-one-out / grid search |
//! | [`experiments`] | synthetic 1-D and 2-D regression studies |
//! | [`teoae`] | curve-to-age leave-one-out pipeline |
//! | [`cli`] | command implementations behind the `distreg` binary |

pub mod cli;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod ridge;
pub mod teoae;

pub use error::{Error, Result};
