//! Stationary solution of the reduced 1D problem by quadrature.
//!
//! With diffusivity `a(x) = kappa_eps + kappa_T chibar^2(x)` and boundary
//! conditions `T(-1) = T_+`, `T(1) = 0`, the stationary temperature is
//!
//! ```text
//! T(x) = T_+ - phi_q * int_{-1}^{x} dy / a(y),   phi_q = T_+ / int_{-1}^{1} dy / a(y)
//! ```
//!
//! The same resistance integrals give the scale function
//! `s(x) = int_0^x kappa_eps / a(y) dy` of the time-changed process, the
//! barrier resistance `Theta`, the plateau temperature `T_*`, and the
//! effective conductivity of the membrane limit.

use crate::coefficients::{CutoffProfile, ModelParams, Shape};
use crate::error::{BarrierError, Result};
use crate::quad::{integrate, DEFAULT_REL_TOL};

/// Stationary profile with its derived scalars.
#[derive(Clone, Debug)]
pub struct StationaryProfile {
    pub xs: Vec<f64>,
    pub temps: Vec<f64>,
    /// Heat flux `phi_q`.
    pub flux: f64,
    /// Barrier resistance `Theta` (closed form, quadratic model barrier).
    pub theta: f64,
    /// Plateau temperature estimate from quadrature: `T(-eps)`.
    pub t_star_quadrature: f64,
    /// Asymptotic plateau temperature `(1+Theta)/(2+Theta) T_+`.
    pub t_star_formula: f64,
    /// Effective conductivity `c_eps` of the membrane limit.
    pub c_eff: f64,
}

/// Scale function `s(x) = int_0^x kappa_eps / a(y) dy` for any shape.
pub fn scale_function_shape(shape: &Shape, x: f64) -> Result<f64> {
    let ke = shape.params.kappa_eps;
    let q = integrate(
        &|y| ke / shape.diffusivity(y),
        0.0,
        x,
        &shape.breakpoints(),
        DEFAULT_REL_TOL,
    )?;
    Ok(q.value)
}

pub fn scale_function(params: &ModelParams, profile: &CutoffProfile, x: f64) -> Result<f64> {
    scale_function_shape(&Shape::new(*params, profile.clone())?, x)
}

/// Resistance integral `int_{lo}^{hi} dy / a(y)`.
pub fn resistance_shape(shape: &Shape, lo: f64, hi: f64) -> Result<f64> {
    let q = integrate(
        &|y| 1.0 / shape.diffusivity(y),
        lo,
        hi,
        &shape.breakpoints(),
        DEFAULT_REL_TOL,
    )?;
    Ok(q.value)
}

/// Heat flux `phi_q = T_+ / int_{-1}^1 dy/a(y)`.
pub fn flux_shape(shape: &Shape) -> Result<f64> {
    Ok(shape.params.t_plus / resistance_shape(shape, -1.0, 1.0)?)
}

pub fn flux(params: &ModelParams, profile: &CutoffProfile) -> Result<f64> {
    flux_shape(&Shape::new(*params, profile.clone())?)
}

/// Stationary temperature on a user grid (sorted, spanning [-1, 1]).
pub fn stationary_profile_shape(shape: &Shape, grid: &[f64]) -> Result<StationaryProfile> {
    if grid.len() < 2 {
        return Err(BarrierError::parameter("grid needs at least 2 points"));
    }
    if grid[0] != -1.0 || *grid.last().unwrap() != 1.0 {
        return Err(BarrierError::parameter("grid must span [-1, 1] inclusive"));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(BarrierError::parameter("grid must be strictly increasing"));
        }
    }
    let total = resistance_shape(shape, -1.0, 1.0)?;
    let phi = shape.params.t_plus / total;
    let mut temps = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = grid[0];
    temps.push(shape.params.t_plus);
    for &x in &grid[1..] {
        acc += resistance_shape(shape, prev, x)?;
        temps.push(shape.params.t_plus - phi * acc.min(total));
        prev = x;
    }
    let eps = shape.params.eps;
    let t_star_quadrature =
        shape.params.t_plus - phi * resistance_shape(shape, -1.0, -eps)?;
    Ok(StationaryProfile {
        xs: grid.to_vec(),
        temps,
        flux: phi,
        theta: theta_epsilon(&shape.params),
        t_star_quadrature,
        t_star_formula: barrier_height(&shape.params),
        c_eff: effective_conductivity(&shape.params),
    })
}

pub fn stationary_profile(
    params: &ModelParams,
    profile: &CutoffProfile,
    grid: &[f64],
) -> Result<StationaryProfile> {
    stationary_profile_shape(&Shape::new(*params, profile.clone())?, grid)
}

/// Closed-form barrier resistance for the quadratic model barrier
/// `chibar^2 = (x/eps)^2` on `[-eps, eps]`:
/// `Theta = eps sqrt(kT/ke) * 2 atan(sqrt(kT/ke))`.
pub fn theta_epsilon(params: &ModelParams) -> f64 {
    theta_from_ratio(params.eps, params.kappa_t / params.kappa_eps)
}

pub fn theta_from_ratio(eps: f64, ratio: f64) -> f64 {
    let r = ratio.sqrt();
    eps * r * 2.0 * r.atan()
}

/// Plateau temperature `T_* = (1+Theta)/(2+Theta) T_+` — between T_+/2 (no
/// barrier) and T_+ (impenetrable barrier).
pub fn barrier_height(params: &ModelParams) -> f64 {
    let th = theta_epsilon(params);
    (1.0 + th) / (2.0 + th) * params.t_plus
}

/// Effective conductivity of the membrane limit under the scaling law:
/// `c_eps = kappa_T K * 2/(2K + pi)`.
pub fn effective_conductivity(params: &ModelParams) -> f64 {
    let k = params.k_scale;
    params.kappa_t * k * 2.0 / (2.0 * k + std::f64::consts::PI)
}
