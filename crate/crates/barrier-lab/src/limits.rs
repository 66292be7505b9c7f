//! Crossing-probability asymptotics and regime classification.
//!
//! The pre-limit crossing probability across the barrier is the
//! scale-function ratio
//!
//! ```text
//! p_plus = (s(4 eps) - s(2 eps)) / (s(4 eps) - s(0))
//!        = I3 / (I1 + I2 + I3),   Ii = int 1/(1 + rho chi^2),  rho = kT/ke
//! ```
//!
//! over `[0, eps]`, `[eps, 2 eps]`, `[2 eps, 4 eps]`. Because the start point
//! `2 eps` sits at distance `2 eps` from both targets, the membrane parameter
//! of the limiting snapping-out process is estimated by `p_plus / (2 eps)`
//! (the hitting interval is `[0, 4 eps]`, i.e. the membrane-convergence
//! normalization applies at scale `2 eps`). Under the critical schedules this
//! estimate converges to `K/pi` (alpha = 1), `K/4` (alpha = 1/2).
//!
//! For the critical log schedule the density ratio `rho` is astronomically
//! large (`e^{1/(K eps)}`); the `[0, eps]` segment is then evaluated through
//! the substitution `y = eps v / eta`, `eta^{2 alpha} = rho`, which turns the
//! unresolvable spike into a slowly-decaying integrand with an analytic tail.

use crate::coefficients::{CutoffProfile, ModelParams, ProfileKind, Shape};
use crate::error::{BarrierError, Result};
use crate::quad::{integrate, DEFAULT_REL_TOL};

/// Tail split point for improper `v`-integrals.
const TAIL_SPLIT: f64 = 1e4;
/// Above this density ratio a generic profile's `[0, eps]` spike is not
/// resolvable in double precision; only the piecewise-power family (which
/// admits the exact substitution) is accepted.
const DIRECT_RATIO_CAP: f64 = 1e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    HardMembrane,
    PureBrownian,
    NonPermeable,
    SkewLimit,
}

#[derive(Clone, Debug)]
pub struct RegimeResult {
    pub regime: Regime,
    /// Membrane permeabilities, present iff `HardMembrane`.
    pub beta_plus: Option<f64>,
    pub beta_minus: Option<f64>,
    /// Skew parameter, present iff `SkewLimit`.
    pub gamma: Option<f64>,
    /// Auxiliary scale at the smallest probed eps: `eta^{2 alpha} = kT/ke`.
    pub eta: f64,
    /// Fitted log-log slope of the schedule (diagnostic).
    pub fitted_slope: Option<f64>,
    /// Human-readable evidence trail.
    pub note: String,
}

/// One row of the key-identity convergence table.
#[derive(Clone, Copy, Debug)]
pub struct KeyIdentityRow {
    pub eps: f64,
    pub p_plus: f64,
    /// Raw ratio `p_plus / eps` (the quantity the asymptotic identity is
    /// usually written for).
    pub p_over_eps: f64,
    /// Membrane-parameter estimate `p_plus / (2 eps)` — the quantity that
    /// converges to `beta` under the critical schedules.
    pub beta_estimate: f64,
}

fn require_bare(profile: &CutoffProfile) -> Result<()> {
    if profile.includes_boundary_layers {
        return Err(BarrierError::parameter(
            "crossing-probability quadrature uses the bare barrier cutoff; disable boundary layers",
        ));
    }
    Ok(())
}

/// The hitting window `[0, 4 eps]` of the crossing probability needs
/// headroom inside the unit domain, so this module additionally requires
/// `eps < 1/8`.
fn require_small_eps(params: &ModelParams) -> Result<()> {
    if params.eps >= 0.125 {
        return Err(BarrierError::parameter(format!(
            "crossing-probability asymptotics require eps < 1/8, got {}",
            params.eps
        )));
    }
    Ok(())
}

/// The three segment integrals `(I1, I2, I3)` of the key identity.
pub fn segment_integrals(params: &ModelParams, profile: &CutoffProfile) -> Result<(f64, f64, f64)> {
    require_bare(profile)?;
    require_small_eps(params)?;
    let shape = Shape::new(*params, profile.clone())?;
    let eps = params.eps;
    let rho = params.kappa_t / params.kappa_eps;
    let f = |y: f64| params.kappa_eps / shape.diffusivity(y);
    let seeds = shape.breakpoints();

    let i2 = integrate(&f, eps, 2.0 * eps, &seeds, DEFAULT_REL_TOL)?.value;
    let i3 = integrate(&f, 2.0 * eps, 4.0 * eps, &seeds, DEFAULT_REL_TOL)?.value;

    let i1 = if let ProfileKind::PiecewisePower = profile.kind {
        first_segment_by_substitution(eps, params.alpha, rho)?
    } else if rho <= DIRECT_RATIO_CAP {
        integrate(&f, 0.0, eps, &seeds, DEFAULT_REL_TOL)?.value
    } else {
        return Err(BarrierError::QuadratureFailure {
            achieved: f64::NAN,
            requested: DEFAULT_REL_TOL,
        });
    };
    Ok((i1, i2, i3))
}

/// Direct quadrature of the `[0, eps]` segment (moderate ratios only); kept
/// as the second, independent evaluation path for the substitution formula.
pub fn first_segment_direct(params: &ModelParams, profile: &CutoffProfile) -> Result<f64> {
    require_bare(profile)?;
    let shape = Shape::new(*params, profile.clone())?;
    let f = |y: f64| params.kappa_eps / shape.diffusivity(y);
    Ok(integrate(&f, 0.0, params.eps, &shape.breakpoints(), DEFAULT_REL_TOL)?.value)
}

/// `int_0^eps dy/(1 + (rho/4)(y/eps)^{2 alpha})` via `y = eps v / eta`,
/// `eta = rho^{1/(2 alpha)}`: equals `(eps/eta) int_0^eta dv/(1 + v^{2a}/4)`
/// with an analytic large-`v` tail.
fn first_segment_by_substitution(eps: f64, alpha: f64, rho: f64) -> Result<f64> {
    let two_a = 2.0 * alpha;
    let eta = rho.powf(1.0 / two_a);
    let core_hi = eta.min(TAIL_SPLIT);
    let core = integrate(
        &|v: f64| 1.0 / (1.0 + 0.25 * v.powf(two_a)),
        0.0,
        core_hi,
        &[1.0, 10.0, 100.0],
        DEFAULT_REL_TOL,
    )?
    .value;
    let tail = if eta > TAIL_SPLIT {
        v_integral_tail(two_a, TAIL_SPLIT, eta)
    } else {
        0.0
    };
    Ok(eps / eta * (core + tail))
}

/// `int_V^H dv/(1 + v^{2a}/4)` for large `V`, by the expansion
/// `4 v^{-2a} - 16 v^{-4a} + 64 v^{-6a}` (relative truncation error
/// `O(V^{-6a})`). The `2a = 1` case uses the exact antiderivative.
fn v_integral_tail(two_a: f64, v: f64, h: f64) -> f64 {
    if (two_a - 1.0).abs() < 1e-12 {
        return 4.0 * ((4.0 + h) / (4.0 + v)).ln();
    }
    let term = |coef: f64, p: f64| {
        // int_V^H c * v^{-p} dv
        if (p - 1.0).abs() < 1e-12 {
            coef * (h / v).ln()
        } else {
            coef * (h.powf(1.0 - p) - v.powf(1.0 - p)) / (1.0 - p)
        }
    };
    term(4.0, two_a) + term(-16.0, 2.0 * two_a) + term(64.0, 3.0 * two_a)
}

/// Crossing probability `p_plus` by quadrature.
pub fn p_plus_quadrature(params: &ModelParams, profile: &CutoffProfile) -> Result<f64> {
    let (i1, i2, i3) = segment_integrals(params, profile)?;
    Ok(i3 / (i1 + i2 + i3))
}

/// Mirror-image crossing probability `p_minus` (from `-2 eps`, hitting 0
/// before `-4 eps`). Equal to `p_plus` for even profiles.
pub fn p_minus_quadrature(params: &ModelParams, profile: &CutoffProfile) -> Result<f64> {
    require_bare(profile)?;
    let shape = Shape::new(*params, profile.clone())?;
    let eps = params.eps;
    let rho = params.kappa_t / params.kappa_eps;
    let f = |y: f64| params.kappa_eps / shape.diffusivity(y);
    let seeds = shape.breakpoints();
    let i2 = integrate(&f, -2.0 * eps, -eps, &seeds, DEFAULT_REL_TOL)?.value;
    let i3 = integrate(&f, -4.0 * eps, -2.0 * eps, &seeds, DEFAULT_REL_TOL)?.value;
    let i1 = if let ProfileKind::PiecewisePower = profile.kind {
        // the family is even by construction
        first_segment_by_substitution(eps, params.alpha, rho)?
    } else if rho <= DIRECT_RATIO_CAP {
        integrate(&f, -eps, 0.0, &seeds, DEFAULT_REL_TOL)?.value
    } else {
        return Err(BarrierError::QuadratureFailure {
            achieved: f64::NAN,
            requested: DEFAULT_REL_TOL,
        });
    };
    Ok(i3 / (i1 + i2 + i3))
}

/// Membrane-parameter estimate `p_plus / (2 eps)`.
pub fn membrane_beta_estimate(params: &ModelParams, profile: &CutoffProfile) -> Result<f64> {
    Ok(p_plus_quadrature(params, profile)? / (2.0 * params.eps))
}

/// Limiting membrane permeability for the critical schedules.
/// `beta = K / int_0^inf dv/(1 + v^{2 alpha}/4)` for `alpha > 1/2`;
/// `beta = K/4` for `alpha = 1/2` (log schedule).
pub fn beta_limit(alpha: f64, k_scale: f64) -> Result<f64> {
    if !(k_scale > 0.0) {
        return Err(BarrierError::parameter("K must be positive"));
    }
    if alpha < 0.5 {
        return Err(BarrierError::UnsupportedRegime(format!(
            "beta_limit requires alpha >= 1/2 (got {alpha}); use classify_regime for alpha < 1/2"
        )));
    }
    if alpha == 0.5 {
        return Ok(k_scale / 4.0);
    }
    Ok(k_scale / improper_v_integral(alpha)?)
}

/// `int_0^inf dv/(1 + v^{2 alpha}/4)`, finite for `alpha > 1/2`;
/// equals `pi` at `alpha = 1`.
pub fn improper_v_integral(alpha: f64) -> Result<f64> {
    let two_a = 2.0 * alpha;
    let core = integrate(
        &|v: f64| 1.0 / (1.0 + 0.25 * v.powf(two_a)),
        0.0,
        TAIL_SPLIT,
        &[1.0, 10.0, 100.0],
        DEFAULT_REL_TOL,
    )?
    .value;
    // analytic tail: int_V^inf 4 v^{-2a} (+ higher orders)
    let v = TAIL_SPLIT;
    let tail = 4.0 * v.powf(1.0 - two_a) / (two_a - 1.0)
        - 16.0 * v.powf(1.0 - 2.0 * two_a) / (2.0 * two_a - 1.0)
        + 64.0 * v.powf(1.0 - 3.0 * two_a) / (3.0 * two_a - 1.0);
    Ok(core + tail)
}

/// The limit the asymptotic identity is evaluated to in the source analysis
/// for `alpha < 1/2`: `(1 - 2 alpha)/(7 - 6 alpha)`. Note this rests on
/// taking the transition-segment mean value `chi^2(c) = 1`; the exact
/// quadrature limit of `p_plus` is `2 / (4/(1-2a) + J + 2)` with
/// `J = int_1^2 du / chi(eps u)^2` and differs numerically. Both values are
/// exposed; see `p_plus_small_alpha_exact_limit`.
pub fn p_plus_limit_small_alpha(alpha: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha < 0.5) {
        return Err(BarrierError::parameter("alpha must lie in (0, 1/2)"));
    }
    Ok((1.0 - 2.0 * alpha) / (7.0 - 6.0 * alpha))
}

/// Exact `eps -> 0` limit of `p_plus` for `alpha < 1/2` under any divergent
/// schedule: `2 / (4/(1-2a) + J(a) + 2)` with
/// `J = int_1^2 du / (1 - (2-u)^alpha / 2)^2` (the transition segment of the
/// piecewise-power family).
pub fn p_plus_small_alpha_exact_limit(alpha: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha < 0.5) {
        return Err(BarrierError::parameter("alpha must lie in (0, 1/2)"));
    }
    let j = integrate(
        &|u: f64| {
            let chi = 1.0 - 0.5 * (2.0 - u).powf(alpha);
            1.0 / (chi * chi)
        },
        1.0,
        2.0,
        &[],
        1e-12,
    )?
    .value;
    Ok(2.0 / (4.0 / (1.0 - 2.0 * alpha) + j + 2.0))
}

/// Skew parameter `gamma = (p_minus - p_plus)/(p_minus + p_plus)`.
pub fn skew_gamma(p_minus: f64, p_plus: f64) -> Result<f64> {
    if p_minus < 0.0 || p_plus < 0.0 || p_minus + p_plus == 0.0 {
        return Err(BarrierError::parameter(
            "skew parameter needs nonnegative p_± with p_- + p_+ > 0",
        ));
    }
    Ok((p_minus - p_plus) / (p_minus + p_plus))
}

/// Convergence table of `(eps, p_plus, p_plus/eps, p_plus/(2 eps))`.
pub fn key_identity_curve(
    params_list: &[ModelParams],
    profile: &CutoffProfile,
) -> Result<Vec<KeyIdentityRow>> {
    params_list
        .iter()
        .map(|p| {
            let pp = p_plus_quadrature(p, profile)?;
            Ok(KeyIdentityRow {
                eps: p.eps,
                p_plus: pp,
                p_over_eps: pp / p.eps,
                beta_estimate: pp / (2.0 * p.eps),
            })
        })
        .collect()
}

/// Classify the `eps -> 0` regime of a schedule `eps -> kT/ke`.
pub fn classify_regime<F: Fn(f64) -> f64>(alpha: f64, ratio_schedule: F) -> Result<RegimeResult> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(BarrierError::parameter("alpha must be positive"));
    }
    // probe the schedule on a decreasing geometric grid; log-type critical
    // schedules overflow f64 at small eps, so an infinite tail is accepted
    // as divergence evidence and the fit uses the finite prefix
    let full_grid: Vec<f64> = (0..7).map(|i| 1e-2 * 10f64.powf(-0.5 * i as f64)).collect();
    let full_ratios: Vec<f64> = full_grid.iter().map(|&e| ratio_schedule(e)).collect();
    for (&e, &r) in full_grid.iter().zip(&full_ratios) {
        if r.is_nan() || r <= 0.0 {
            return Err(BarrierError::parameter(format!(
                "schedule must return positive kT/ke; got {r} at eps = {e}"
            )));
        }
    }
    let n_finite = full_ratios.iter().take_while(|r| r.is_finite()).count();
    if n_finite < 4 {
        return Err(BarrierError::parameter(
            "schedule overflows f64 on most of the probe grid (eps in [1e-5, 1e-2]); \
             cannot classify",
        ));
    }
    if full_ratios[n_finite..].iter().any(|r| r.is_finite()) {
        return Err(BarrierError::parameter(
            "schedule is non-monotone in a pathological way (finite values after overflow)",
        ));
    }
    let overflowed = n_finite < full_ratios.len();
    let eps_grid = &full_grid[..n_finite];
    let ratios = &full_ratios[..n_finite];
    let r_first = ratios[0];
    let r_last = *ratios.last().unwrap();
    let eps_last = *eps_grid.last().unwrap();
    let eta = r_last.powf(1.0 / (2.0 * alpha));

    let divergent = (overflowed || r_last > 100.0 * r_first)
        && ratios.windows(2).all(|w| w[1] >= w[0]);
    let finite_limit = (r_last - ratios[ratios.len() - 2]).abs() <= 0.05 * r_last.abs()
        && r_last <= 10.0 * r_first;

    if !divergent {
        if finite_limit && alpha < 0.5 {
            // skew remark branch: finite crossing-probability limits
            let params = ModelParams {
                eps: eps_last,
                kappa_eps: 1.0,
                kappa_t: r_last,
                alpha,
                k_scale: 1.0,
                t_plus: 1.0,
            };
            let profile = CutoffProfile::piecewise_power_bare();
            let pp = p_plus_quadrature(&params, &profile)?;
            let pm = p_minus_quadrature(&params, &profile)?;
            let gamma = skew_gamma(pm, pp)?;
            return Ok(RegimeResult {
                regime: Regime::SkewLimit,
                beta_plus: None,
                beta_minus: None,
                gamma: Some(gamma),
                eta,
                fitted_slope: None,
                note: format!(
                    "finite schedule limit {r_last:.6e}: skew remark applies, p+ = {pp:.6e}, p- = {pm:.6e}"
                ),
            });
        }
        return Err(BarrierError::UnsupportedRegime(
            "schedule neither diverges nor (for alpha < 1/2) settles to a finite limit".into(),
        ));
    }

    if alpha < 0.5 {
        // divergent schedule with a sub-critical cutoff: Brownian limit
        return Ok(RegimeResult {
            regime: Regime::PureBrownian,
            beta_plus: None,
            beta_minus: None,
            gamma: None,
            eta,
            fitted_slope: None,
            note: "alpha < 1/2 with divergent kT/ke: crossing cost vanishes, Brownian limit".into(),
        });
    }

    if alpha == 0.5 {
        // critical rate: ln(kT/ke) ~ (K eps)^{-1}
        let logs: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
        let slope = fit_loglog_slope(&eps_grid, &logs)?;
        let critical = -1.0;
        let (regime, beta, note) = if (slope - critical).abs() <= 0.01 * critical.abs() {
            let k = 1.0 / (eps_last * logs.last().unwrap());
            (
                Regime::HardMembrane,
                Some(k / 4.0),
                format!("log-schedule slope {slope:.4} ~ -1; K = {k:.6}"),
            )
        } else if slope > critical {
            (
                Regime::PureBrownian,
                None,
                format!("log-schedule slope {slope:.4} > -1: sub-critical"),
            )
        } else {
            (
                Regime::NonPermeable,
                None,
                format!("log-schedule slope {slope:.4} < -1: super-critical"),
            )
        };
        return Ok(RegimeResult {
            regime,
            beta_plus: beta,
            beta_minus: beta,
            gamma: None,
            eta,
            fitted_slope: Some(slope),
            note,
        });
    }

    // alpha > 1/2: critical exponent of kT/ke ~ (K eps)^{2a/(1-2a)}
    let log_r: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let slope = fit_slope(
        &eps_grid.iter().map(|e| e.ln()).collect::<Vec<_>>(),
        &log_r,
    )?;
    let critical = 2.0 * alpha / (1.0 - 2.0 * alpha);
    let (regime, beta, note) = if (slope - critical).abs() <= 0.01 * critical.abs() {
        let k = r_last.powf(1.0 / critical) / eps_last;
        (
            Regime::HardMembrane,
            Some(beta_limit(alpha, k)?),
            format!("schedule exponent {slope:.4} matches critical {critical:.4}; K = {k:.6}"),
        )
    } else if slope > critical {
        (
            Regime::PureBrownian,
            None,
            format!("schedule exponent {slope:.4} > critical {critical:.4}: sub-critical"),
        )
    } else {
        (
            Regime::NonPermeable,
            None,
            format!("schedule exponent {slope:.4} < critical {critical:.4}: super-critical"),
        )
    };
    Ok(RegimeResult {
        regime,
        beta_plus: beta,
        beta_minus: beta,
        gamma: None,
        eta,
        fitted_slope: Some(slope),
        note,
    })
}

/// Least-squares slope of `ys` against `ln(eps)` — for the alpha = 1/2
/// branch `ys` is `ln ln(ratio)`.
fn fit_loglog_slope(eps_grid: &[f64], logs: &[f64]) -> Result<f64> {
    let xs: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = logs
        .iter()
        .map(|l| {
            if *l <= 0.0 {
                f64::NAN
            } else {
                l.ln()
            }
        })
        .collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(BarrierError::parameter(
            "alpha = 1/2 classification needs ln(kT/ke) > 1 on the probe grid",
        ));
    }
    fit_slope(&xs, &ys)
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(BarrierError::Numeric("degenerate slope fit".into()));
    }
    Ok((n * sxy - sx * sy) / denom)
}
