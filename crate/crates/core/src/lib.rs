//! Euler–Maruyama simulation of one-dimensional jump-diffusion SDEs
//!
//! ```text
//! dX_t = mu(X_t) dt + sigma(X_t) dW_t + gamma(X_{t-}) dZ_t
//! ```
//!
//! where `W` is a Brownian motion and `Z` an independent, centered,
//! finite-activity pure-jump Lévy process. The crate provides
//!
//! - [`levy`]: finite-activity Lévy measures, their moments and exact jump sampling,
//! - [`model`]: coefficient sets, the polynomial Lyapunov function and numerical
//!   checkers for the structural conditions on `(mu, sigma, gamma, V)`,
//! - [`noise`]: one coupled realization of `(W, Z)` on a dyadic fine grid,
//! - [`scheme`]: grid functions, discrete and continuous-time Euler–Maruyama,
//!   a fine-grid reference solution and closed-form oracles,
//! - [`strong`]: coupled-path Monte Carlo estimators of strong `L^p` errors,
//!   temporal-spatial Hölder functionals and log-log rate fits.
//!
//! Every Monte Carlo estimator is deterministic for a given master seed,
//! independent of the number of worker threads.

pub mod error;
pub mod levy;
pub mod model;
pub mod noise;
pub mod quadrature;
pub mod rng;
pub mod scheme;
pub mod strong;

pub use error::{Error, Result};
