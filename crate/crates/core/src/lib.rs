//! Bayesian inference for the initial condition of a periodic reaction-diffusion
//! equation, together with the Gaussian limit objects (Fisher information,
//! linearised Schrödinger flow) used to check Bernstein–von Mises behaviour.
//!
//! Modules build on each other bottom-up:
//!
//! * [`spectral`]: Fourier calculus on the torus `[0,1]^d`, `d ∈ {1, 2}`.
//! * [`forward`]: strong solutions of `∂ₜu − Δu = f(u)`.
//! * [`schrodinger`]: the linear flow `∂ₜU − ΔU − V U = m` and spectra of `Δ − W`.
//! * [`information`]: the information operator, its inverse and the limit Gaussian.
//! * [`bayes`]: prior, data, likelihood, pCN sampling and posterior summaries.
//! * [`lab`]: Wasserstein metrics and the experiment drivers.
//! * [`store`]: binary-matrix persistence with JSON headers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod error;
pub mod forward;
pub mod information;
pub mod lab;
pub mod par;
pub mod schrodinger;
pub mod spectral;
pub mod store;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
