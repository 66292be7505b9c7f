//! Numerical laboratory for diffusion across a transport barrier.
//!
//! The library is organized around a 1D cutoff diffusivity
//! `a(x) = kappa_eps + kappa_T * chibar^2(x)` whose narrow minimum at `x = 0`
//! acts as a semi-permeable membrane in the small-`eps` limit:
//!
//! - [`coefficients`] — model parameters and the cutoff-function family,
//! - [`analytic1d`] — stationary profile, flux, barrier height by quadrature,
//! - [`limits`] — crossing-probability asymptotics and regime classification,
//! - [`membrane`] — snapping-out Brownian motion path simulation,
//! - [`hitting`] — closed-form hitting probabilities,
//! - [`sdepath`] — pre-limit SDEs, time change, Feynman–Kac estimators,
//! - [`spectral`] — turbulent velocity basis and covariance identities,
//! - [`pde2d`] — finite-volume solver for the limit diffusion equation,
//! - [`cli`] — command-line front end and run manifests.

pub mod analytic1d;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod hitting;
pub mod limits;
pub mod membrane;
pub mod pde2d;
pub mod quad;
pub mod rng;
pub mod sdepath;
pub mod spectral;

pub use error::{BarrierError, Result};
