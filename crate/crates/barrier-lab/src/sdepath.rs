//! Euler–Maruyama simulation of the pre-limit diffusions and exact exit
//! probabilities through the scale function.
//!
//! The horizontal component solves
//!
//! ```text
//! dX = a'(X) dt + sqrt(2 a(X)) dW,     a(x) = ke + kT chibar^2(x)
//! ```
//!
//! (the vertical component Y carries the same diffusion coefficient, no
//! drift, and wraps modulo 2 pi; it never feeds back into X). The additive
//! clock `beta_t = 2 int a(X_s) ds` defines the time change under which the
//! process becomes
//!
//! ```text
//! dXt = (a'(Xt) / (2 a(Xt))) dt + dW
//! ```
//!
//! with unit diffusion. Exit order from [-1, 1] is invariant under the time
//! change, and the exact exit probability is the scale-function ratio
//! `(s(x2) - s(x)) / (s(x2) - s(x1))`.
//!
//! Near-singular drift (the barrier layer for alpha < 1, and the steep wall
//! layers of the smooth example profile) is handled by subdividing a step so
//! each substep's drift displacement stays below `eps/4`, capped at 64
//! substeps; the drift at exactly 0 is the symmetric principal value 0.
//! Exit times are refined by linear interpolation of the crossing step.
//! The additive clock is accumulated by the trapezoid rule over the
//! *recorded* states, so it is exactly recomputable from a stored path.

use crate::analytic1d::scale_function_shape;
use crate::coefficients::{CutoffProfile, ModelParams, Shape};
use crate::error::{BarrierError, Result};
use crate::membrane::{ExitRecord, MCSummary};
use crate::rng::SplitMix64;
use rayon::prelude::*;
use std::f64::consts::TAU;

/// One recorded state of the pre-limit diffusion.
#[derive(Clone, Copy, Debug)]
pub struct SdeState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    /// Accumulated `beta_t = 2 int a(X_s) ds` (identity for the
    /// time-changed process).
    pub additive_clock: f64,
}

#[derive(Clone, Debug)]
pub struct SdePath {
    pub states: Vec<SdeState>,
    pub exit: Option<ExitRecord>,
}

/// Hard cap on substeps when the drift is large.
const MAX_SUBSTEPS: u32 = 64;
/// Step-size guard relative to the unit half-width of the domain.
const H_CAP: f64 = 0.01;
/// Paths exceeding `2000/h` steps are abandoned (exponentially unlikely).
const TIME_CAP: f64 = 2000.0;

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(BarrierError::parameter("step h must be positive and finite"));
    }
    if h > H_CAP {
        return Err(BarrierError::parameter(format!(
            "step h = {h} too coarse for the unit domain; use h <= {H_CAP}"
        )));
    }
    Ok(())
}

#[inline]
fn n_substeps(drift_abs: f64, h: f64, eps: f64) -> u32 {
    let needed = (drift_abs * h / (eps / 4.0)).ceil();
    if needed.is_finite() {
        (needed as u32).clamp(1, MAX_SUBSTEPS)
    } else {
        MAX_SUBSTEPS
    }
}

/// Outcome of one (possibly subdivided) Euler step.
enum StepOutcome {
    /// Step completed; elapsed `h`.
    Interior,
    /// Boundary crossed at `boundary` after elapsed time `dt <= h`.
    Exit { boundary: f64, dt: f64 },
}

#[inline]
fn crossing(x_old: f64, x_new: f64) -> Option<(f64, f64)> {
    if x_new <= -1.0 {
        Some((-1.0, (-1.0 - x_old) / (x_new - x_old)))
    } else if x_new >= 1.0 {
        Some((1.0, (1.0 - x_old) / (x_new - x_old)))
    } else {
        None
    }
}

/// One step of the raw process `X_eps` (with the Y component).
#[inline]
fn step_xeps(shape: &Shape, h: f64, x: &mut f64, y: &mut f64, rng: &mut SplitMix64) -> StepOutcome {
    let eps = shape.params.eps;
    let drift0 = shape.diffusivity_deriv(*x);
    let n_sub = n_substeps(drift0.abs(), h, eps);
    let hs = h / n_sub as f64;
    for i in 0..n_sub {
        let a = shape.diffusivity(*x);
        let drift = shape.diffusivity_deriv(*x);
        let sig = (2.0 * a * hs).sqrt();
        let x_new = *x + drift * hs + sig * rng.normal();
        *y = (*y + sig * rng.normal()).rem_euclid(TAU);
        if let Some((boundary, frac)) = crossing(*x, x_new) {
            return StepOutcome::Exit {
                boundary,
                dt: (i as f64 + frac) * hs,
            };
        }
        *x = x_new;
    }
    StepOutcome::Interior
}

/// One step of the time-changed process (unit diffusion).
#[inline]
fn step_xtilde(shape: &Shape, h: f64, x: &mut f64, rng: &mut SplitMix64) -> StepOutcome {
    let eps = shape.params.eps;
    let drift_at = |x: f64| shape.diffusivity_deriv(x) / (2.0 * shape.diffusivity(x));
    let n_sub = n_substeps(drift_at(*x).abs(), h, eps);
    let hs = h / n_sub as f64;
    let sqrt_hs = hs.sqrt();
    for i in 0..n_sub {
        let x_new = *x + drift_at(*x) * hs + sqrt_hs * rng.normal();
        if let Some((boundary, frac)) = crossing(*x, x_new) {
            return StepOutcome::Exit {
                boundary,
                dt: (i as f64 + frac) * hs,
            };
        }
        *x = x_new;
    }
    StepOutcome::Interior
}

fn simulate_with<StepFn>(
    shape: &Shape,
    x0: f64,
    y0: f64,
    h: f64,
    t_max: f64,
    rng: &mut SplitMix64,
    clock_is_time: bool,
    mut stepper: StepFn,
) -> Result<SdePath>
where
    StepFn: FnMut(&Shape, f64, &mut f64, &mut f64, &mut SplitMix64) -> StepOutcome,
{
    check_h(h)?;
    if !(-1.0..=1.0).contains(&x0) {
        return Err(BarrierError::parameter("x0 must lie in [-1, 1]"));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(BarrierError::parameter("t_max must be positive and finite"));
    }
    let n = (t_max / h).ceil() as usize;
    let mut states = Vec::with_capacity(n + 1);
    let (mut x, mut y, mut t, mut clock) = (x0, y0.rem_euclid(TAU), 0.0, 0.0);
    states.push(SdeState {
        x,
        y,
        t,
        additive_clock: clock,
    });
    let mut exit = None;
    for _ in 0..n {
        let x_before = x;
        let outcome = stepper(shape, h, &mut x, &mut y, rng);
        let (dt, exited) = match outcome {
            StepOutcome::Interior => (h, None),
            StepOutcome::Exit { boundary, dt } => {
                x = boundary;
                (dt, Some(boundary))
            }
        };
        t += dt;
        clock += if clock_is_time {
            dt
        } else {
            (shape.diffusivity(x_before) + shape.diffusivity(x)) * dt
        };
        states.push(SdeState {
            x,
            y,
            t,
            additive_clock: clock,
        });
        if let Some(boundary) = exited {
            exit = Some(ExitRecord { time: t, boundary });
            break;
        }
    }
    Ok(SdePath { states, exit })
}

/// Simulate the raw pre-limit diffusion `(X_eps, Y_eps)` until it exits
/// `[-1, 1]` or reaches `t_max`.
pub fn simulate_xeps_shape(
    shape: &Shape,
    x0: f64,
    y0: f64,
    h: f64,
    t_max: f64,
    rng: &mut SplitMix64,
) -> Result<SdePath> {
    simulate_with(shape, x0, y0, h, t_max, rng, false, |s, h, x, y, r| {
        step_xeps(s, h, x, y, r)
    })
}

pub fn simulate_xeps(
    params: &ModelParams,
    profile: &CutoffProfile,
    x0: f64,
    y0: f64,
    h: f64,
    t_max: f64,
    rng: &mut SplitMix64,
) -> Result<SdePath> {
    let shape = Shape::new(*params, profile.clone())?;
    simulate_xeps_shape(&shape, x0, y0, h, t_max, rng)
}

/// Simulate the time-changed diffusion (unit diffusion coefficient).
pub fn simulate_xtilde_shape(
    shape: &Shape,
    x0: f64,
    h: f64,
    t_max: f64,
    rng: &mut SplitMix64,
) -> Result<SdePath> {
    simulate_with(shape, x0, 0.0, h, t_max, rng, true, |s, h, x, _y, r| {
        step_xtilde(s, h, x, r)
    })
}

pub fn simulate_xtilde(
    params: &ModelParams,
    profile: &CutoffProfile,
    x0: f64,
    h: f64,
    t_max: f64,
    rng: &mut SplitMix64,
) -> Result<SdePath> {
    let shape = Shape::new(*params, profile.clone())?;
    simulate_xtilde_shape(&shape, x0, h, t_max, rng)
}

/// Relabel a path of `X_eps` by its additive clock: the result samples the
/// time-changed process at the clock values. The trajectory (and hence the
/// exit side) is untouched; only the time axis changes.
pub fn time_change(path: &SdePath) -> Result<SdePath> {
    let clocks: Vec<f64> = path.states.iter().map(|s| s.additive_clock).collect();
    if clocks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BarrierError::Internal(
            "additive clock is not strictly increasing".into(),
        ));
    }
    let states = path
        .states
        .iter()
        .map(|s| SdeState {
            x: s.x,
            y: s.y,
            t: s.additive_clock,
            additive_clock: s.additive_clock,
        })
        .collect();
    let exit = path.exit.map(|e| ExitRecord {
        time: *clocks.last().unwrap(),
        boundary: e.boundary,
    });
    Ok(SdePath { states, exit })
}

/// Exact exit probability `P_x(tau_{x1} < tau_{x2})` via the scale function.
pub fn exit_prob_exact_shape(shape: &Shape, x: f64, x1: f64, x2: f64) -> Result<f64> {
    if !(x1 < x && x < x2) || x1 < -1.0 || x2 > 1.0 {
        return Err(BarrierError::parameter(
            "need -1 <= x1 < x < x2 <= 1 for the exit probability",
        ));
    }
    let s = scale_function_shape(shape, x)?;
    let s1 = scale_function_shape(shape, x1)?;
    let s2 = scale_function_shape(shape, x2)?;
    Ok((s2 - s) / (s2 - s1))
}

pub fn exit_prob_exact(
    params: &ModelParams,
    profile: &CutoffProfile,
    x: f64,
    x1: f64,
    x2: f64,
) -> Result<f64> {
    let shape = Shape::new(*params, profile.clone())?;
    exit_prob_exact_shape(&shape, x, x1, x2)
}

/// Monte Carlo exit-left frequency of `X_eps` from `x0` (deterministic per
/// seed for any worker count).
pub fn mc_exit_left_xeps_shape(
    shape: &Shape,
    x0: f64,
    n_paths: u64,
    h: f64,
    master_seed: u64,
) -> Result<MCSummary> {
    mc_exit_left(shape, x0, n_paths, h, master_seed, false)
}

/// Monte Carlo exit-left frequency of the time-changed process.
pub fn mc_exit_left_xtilde_shape(
    shape: &Shape,
    x0: f64,
    n_paths: u64,
    h: f64,
    master_seed: u64,
) -> Result<MCSummary> {
    mc_exit_left(shape, x0, n_paths, h, master_seed, true)
}

pub fn mc_exit_left_xtilde(
    params: &ModelParams,
    profile: &CutoffProfile,
    x0: f64,
    n_paths: u64,
    h: f64,
    master_seed: u64,
) -> Result<MCSummary> {
    let shape = Shape::new(*params, profile.clone())?;
    mc_exit_left_xtilde_shape(&shape, x0, n_paths, h, master_seed)
}

fn mc_exit_left(
    shape: &Shape,
    x0: f64,
    n_paths: u64,
    h: f64,
    master_seed: u64,
    tilde: bool,
) -> Result<MCSummary> {
    check_h(h)?;
    if !(-1.0..=1.0).contains(&x0) {
        return Err(BarrierError::parameter("x0 must lie in [-1, 1]"));
    }
    if n_paths == 0 {
        return Err(BarrierError::parameter("n_paths must be >= 1"));
    }
    let max_steps = (TIME_CAP / h).ceil() as u64;
    let hits: u64 = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::path_stream(master_seed, i);
            let mut x = x0;
            let mut y = 0.0;
            for _ in 0..max_steps {
                let outcome = if tilde {
                    step_xtilde(shape, h, &mut x, &mut rng)
                } else {
                    step_xeps(shape, h, &mut x, &mut y, &mut rng)
                };
                if let StepOutcome::Exit { boundary, .. } = outcome {
                    return (boundary == -1.0) as u64;
                }
            }
            0
        })
        .sum();
    let p = hits as f64 / n_paths as f64;
    let se = (p * (1.0 - p) / n_paths as f64).sqrt();
    Ok(MCSummary {
        n_paths,
        estimate: p,
        std_error: se,
        ci95: (p - 1.96 * se, p + 1.96 * se),
        seed: master_seed,
        step: h,
    })
}

/// Feynman–Kac estimator of the transient temperature
/// `T(x, y, t) = E[theta0(X_t, Y_t) 1{tau > t}] + T_plus P(tau <= t, X(tau) = -1)`.
pub fn feynman_kac<F>(
    params: &ModelParams,
    profile: &CutoffProfile,
    theta0: F,
    x: f64,
    y: f64,
    t: f64,
    n_paths: u64,
    h: f64,
    master_seed: u64,
) -> Result<MCSummary>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let shape = Shape::new(*params, profile.clone())?;
    feynman_kac_shape(&shape, theta0, x, y, t, n_paths, h, master_seed)
}

#[allow(clippy::too_many_arguments)]
pub fn feynman_kac_shape<F>(
    shape: &Shape,
    theta0: F,
    x: f64,
    y: f64,
    t: f64,
    n_paths: u64,
    h: f64,
    master_seed: u64,
) -> Result<MCSummary>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    check_h(h)?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(BarrierError::parameter("x must lie in [-1, 1]"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(BarrierError::parameter("t must be positive and finite"));
    }
    if n_paths == 0 {
        return Err(BarrierError::parameter("n_paths must be >= 1"));
    }
    let t_plus = shape.params.t_plus;
    let n_steps = (t / h).ceil() as u64;
    let (sum, sum_sq) = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::path_stream(master_seed, i);
            let mut xx = x;
            let mut yy = y.rem_euclid(TAU);
            let mut value = None;
            for k in 0..n_steps {
                // final step may be shorter than h
                let hk = (t - k as f64 * h).min(h);
                match step_xeps(shape, hk, &mut xx, &mut yy, &mut rng) {
                    StepOutcome::Interior => {}
                    StepOutcome::Exit { boundary, .. } => {
                        value = Some(if boundary == -1.0 { t_plus } else { 0.0 });
                        break;
                    }
                }
            }
            let v = value.unwrap_or_else(|| theta0(xx, yy));
            (v, v * v)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_paths as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let se = (var / n).sqrt();
    Ok(MCSummary {
        n_paths,
        estimate: mean,
        std_error: se,
        ci95: (mean - 1.96 * se, mean + 1.96 * se),
        seed: master_seed,
        step: h,
    })
}

/// The smooth example profile with the parameters used for the reference
/// temperature plot: `eps = 0.2`, `T_plus = 2`, `kT = 0.1`, `ke = 0.004`
/// (so `K = sqrt(ke/kT)/eps = 1`).
pub fn reference_example_shape() -> Shape {
    let params = ModelParams {
        eps: 0.2,
        kappa_eps: 0.004,
        kappa_t: 0.1,
        alpha: 1.0,
        k_scale: 1.0,
        t_plus: 2.0,
    };
    Shape::new(params, CutoffProfile::arctan_example()).expect("valid reference parameters")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic1d::stationary_profile_shape;
    use crate::coefficients::{CutoffProfile, ModelParams, Shape};

    fn const_shape(chibar: f64, kappa_eps: f64, kappa_t: f64) -> Shape {
        let params = ModelParams {
            eps: 0.1,
            kappa_eps,
            kappa_t,
            alpha: 1.0,
            k_scale: 1.0,
            t_plus: 2.0,
        };
        Shape::constant(params, chibar)
    }

    #[test]
    fn no_turbulence_exit_is_symmetric() {
        // chibar = 0: X is sqrt(2 ke) BM, exit sides from 0 are 1/2 each
        let shape = const_shape(0.0, 0.5, 1.0);
        let s = mc_exit_left_xeps_shape(&shape, 0.0, 20_000, 1e-3, 42).unwrap();
        assert!(
            (s.estimate - 0.5).abs() < 3.0 * s.std_error + 0.01,
            "{}",
            s.estimate
        );
    }

    #[test]
    fn constant_coefficients_variance() {
        // chibar = 1, ke ~ 0: Var[X(t) - x0] = 2 kT t
        let shape = const_shape(1.0, 1e-12, 0.02);
        let n = 10_000u64;
        let t = 1.0;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let mut rng = SplitMix64::path_stream(5, i);
            let p = simulate_xeps_shape(&shape, 0.0, 0.0, 1e-3, t, &mut rng).unwrap();
            assert!(p.exit.is_none(), "2 sigma_t = 0.2, exits are negligible");
            let x = p.states.last().unwrap().x;
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let target = 2.0 * 0.02 * t;
        assert!(
            ((var - target) / target).abs() < 3.0 * (2.0 / n as f64).sqrt(),
            "var {var} target {target}"
        );
    }

    #[test]
    fn clock_matches_recorded_trapezoid_and_lower_bound() {
        let shape = reference_example_shape();
        let mut rng = SplitMix64::path_stream(9, 0);
        let p = simulate_xeps_shape(&shape, 0.5, 1.0, 1e-3, 3.0, &mut rng).unwrap();
        let mut clock = 0.0;
        for w in p.states.windows(2) {
            clock +=
                (shape.diffusivity(w[0].x) + shape.diffusivity(w[1].x)) * (w[1].t - w[0].t);
            let rec = w[1].additive_clock;
            assert!((clock - rec).abs() <= 1e-12 * rec.max(1.0), "trapezoid identity");
        }
        // clock >= 2 ke t always
        let last = p.states.last().unwrap();
        assert!(last.additive_clock >= 2.0 * 0.004 * last.t - 1e-12);
        // equality on the chibar = 0 profile
        let flat = const_shape(0.0, 0.3, 1.0);
        let mut rng = SplitMix64::path_stream(9, 1);
        let p = simulate_xeps_shape(&flat, 0.0, 0.0, 1e-3, 1.0, &mut rng).unwrap();
        let last = p.states.last().unwrap();
        assert!((last.additive_clock - 2.0 * 0.3 * last.t).abs() < 1e-12);
    }

    #[test]
    fn time_change_constant_clock_and_exit_preservation() {
        let shape = const_shape(1.0, 1e-12, 0.5);
        let mut rng = SplitMix64::path_stream(21, 0);
        let p = simulate_xeps_shape(&shape, 0.0, 0.0, 1e-3, 0.5, &mut rng).unwrap();
        let tc = time_change(&p).unwrap();
        // alpha_t = t/(2 kT): new times are 2 kT * old times
        for (s_old, s_new) in p.states.iter().zip(&tc.states) {
            assert!((s_new.t - 2.0 * 0.5 * s_old.t).abs() < 1e-12);
            assert_eq!(s_new.x.to_bits(), s_old.x.to_bits());
        }
        // exit side preserved exactly on an exiting path
        let shape = reference_example_shape();
        for i in 0..20 {
            let mut rng = SplitMix64::path_stream(22, i);
            let p = simulate_xeps_shape(&shape, 0.5, 0.0, 1e-3, 500.0, &mut rng).unwrap();
            if let Some(e) = p.exit {
                let tc = time_change(&p).unwrap();
                assert_eq!(tc.exit.unwrap().boundary, e.boundary);
            }
        }
    }

    #[test]
    fn exit_prob_exact_degenerate_cases() {
        let flat = const_shape(0.0, 0.5, 1.0);
        let p = exit_prob_exact_shape(&flat, 0.25, 0.0, 1.0).unwrap();
        assert!((p - 0.75).abs() < 1e-10);
        let fig = reference_example_shape();
        let p = exit_prob_exact_shape(&fig, 0.0, -1.0, 1.0).unwrap();
        assert!((p - 0.5).abs() < 1e-10, "even profile: {p}");
    }

    #[test]
    fn exit_prob_times_tplus_is_stationary_temperature() {
        let shape = reference_example_shape();
        let p = exit_prob_exact_shape(&shape, 0.5, -1.0, 1.0).unwrap();
        let grid: Vec<f64> = vec![-1.0, -0.5, 0.5, 1.0];
        let prof = stationary_profile_shape(&shape, &grid).unwrap();
        let t_bar = prof.temps[2];
        assert!(
            (2.0 * p - t_bar).abs() < 1e-8,
            "T_plus * P = {} vs T_bar = {t_bar}",
            2.0 * p
        );
    }

    #[test]
    fn xeps_matches_scale_function() {
        let shape = reference_example_shape();
        let exact = exit_prob_exact_shape(&shape, 0.5, -1.0, 1.0).unwrap();
        let s = mc_exit_left_xeps_shape(&shape, 0.5, 4_000, 1e-4, 77).unwrap();
        assert!(
            (s.estimate - exact).abs() < 3.0 * s.std_error + 0.012,
            "{} vs {exact}",
            s.estimate
        );
    }

    #[test]
    fn xtilde_matches_scale_function() {
        let shape = reference_example_shape();
        let exact = exit_prob_exact_shape(&shape, 0.5, -1.0, 1.0).unwrap();
        let s = mc_exit_left_xtilde_shape(&shape, 0.5, 8_000, 1e-4, 78).unwrap();
        assert!(
            (s.estimate - exact).abs() < 3.0 * s.std_error + 0.012,
            "{} vs {exact}",
            s.estimate
        );
    }

    #[test]
    fn xtilde_constant_profile_is_pure_bm() {
        let shape = const_shape(0.7, 0.2, 0.3);
        let s = mc_exit_left_xtilde_shape(&shape, 0.5, 20_000, 1e-3, 80).unwrap();
        assert!(
            (s.estimate - 0.25).abs() < 3.0 * s.std_error + 0.01,
            "{}",
            s.estimate
        );
    }

    #[test]
    fn scale_exit_probs_approach_membrane_limit() {
        // Under the critical schedule the finite-eps exit probability from
        // +-0.5 approaches the membrane formula. The limiting permeability is
        // the reciprocal of the full-barrier resistance in clean-region units:
        // quadratic model (chibar = |x|/eps on [-eps, eps]) has resistance
        // pi/K, so beta = K/pi; the piecewise-power cutoff at alpha = 1 rises
        // only to 1/2 at eps, doubling the Lorentzian core width and hence
        // the resistance (2 pi/K), so beta = K/(2 pi).
        let k = 1.0;
        for eps in [1e-2, 1e-3] {
            let params = ModelParams {
                eps,
                kappa_eps: (k * eps) * (k * eps),
                kappa_t: 1.0,
                alpha: 1.0,
                k_scale: k,
                t_plus: 1.0,
            };
            let quad = Shape::quadratic_model(params);
            let pp = Shape::new(params, CutoffProfile::piecewise_power_bare()).unwrap();
            let cases = [
                (quad, k / std::f64::consts::PI),
                (pp, k / (2.0 * std::f64::consts::PI)),
            ];
            for (shape, beta) in &cases {
                for x0 in [0.5, -0.5] {
                    let exact = exit_prob_exact_shape(shape, x0, -1.0, 1.0).unwrap();
                    let limit = crate::hitting::exit_left_limit(
                        crate::membrane::StartPos::Interior(x0),
                        *beta,
                    )
                    .unwrap();
                    let tol = if eps == 1e-2 { 0.02 } else { 0.004 };
                    assert!(
                        (exact - limit).abs() < tol,
                        "eps {eps} x0 {x0} beta {beta}: {exact} vs {limit}"
                    );
                }
            }
        }
    }

    #[test]
    fn weak_order_bias_halves_with_quartered_step() {
        // chibar = 0, a = 1/2: unit-diffusion BM; exit-left from 0.5 is 1/4.
        // Discrete monitoring biases the frequency by ~ c sqrt(h).
        let shape = const_shape(0.0, 0.5, 1.0);
        let exact = 0.25;
        let n = 800_000u64;
        let b1 = mc_exit_left_xeps_shape(&shape, 0.5, n, 0.01, 301).unwrap().estimate - exact;
        let b2 = mc_exit_left_xeps_shape(&shape, 0.5, n, 0.0025, 302)
            .unwrap()
            .estimate
            - exact;
        let ratio = b2 / b1;
        assert!(
            (0.35..=0.65).contains(&ratio),
            "bias ratio {ratio} (b1 = {b1:.5}, b2 = {b2:.5})"
        );
    }

    #[test]
    fn feynman_kac_limits() {
        let shape = reference_example_shape();
        // theta0 = c, tiny t: no exit, value c
        let s = feynman_kac_shape(&shape, |_, _| 1.7, 0.5, 0.0, 1e-3, 200, 1e-4, 11).unwrap();
        assert!((s.estimate - 1.7).abs() < 1e-12, "{}", s.estimate);
        // theta0 = 0, large t: T_plus * P(exit left)
        let exact = 2.0 * exit_prob_exact_shape(&shape, 0.5, -1.0, 1.0).unwrap();
        let s = feynman_kac_shape(&shape, |_, _| 0.0, 0.5, 0.0, 400.0, 2_000, 2e-4, 12).unwrap();
        assert!(
            (s.estimate - exact).abs() < 3.0 * s.std_error + 0.03,
            "{} vs {exact}",
            s.estimate
        );
    }

    #[test]
    fn feynman_kac_steady_profile_is_fixed_point() {
        let shape = reference_example_shape();
        let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect();
        let prof = stationary_profile_shape(&shape, &grid).unwrap();
        let steady = move |x: f64, _y: f64| -> f64 {
            // linear interpolation on the precomputed grid
            let i = ((x + 1.0) * 200.0).floor().clamp(0.0, 399.0) as usize;
            let w = (x - prof.xs[i]) / (prof.xs[i + 1] - prof.xs[i]);
            prof.temps[i] * (1.0 - w) + prof.temps[i + 1] * w
        };
        let x = 0.5;
        let target = steady(x, 0.0);
        let s = feynman_kac_shape(&shape, steady, x, 0.0, 2.0, 2_000, 2e-4, 13).unwrap();
        assert!(
            (s.estimate - target).abs() < 3.0 * s.std_error + 0.02,
            "{} vs {target}",
            s.estimate
        );
    }
}
