//! Model parameters and the cutoff-function family.
//!
//! The barrier cutoff `chi(x)` vanishes at 0, reaches 1 at `|x| = 2 eps`, and
//! is even; the full profile `chibar(x) = chi_bdr(x-1) chi_bdr(x+1) chi(x)`
//! additionally vanishes at the walls `x = ±1`. The diffusivity seen by every
//! other module is `a(x) = kappa_eps + kappa_T * chibar^2(x)`.

use crate::error::{BarrierError, Result};

/// Scalar model parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Barrier half-scale, must satisfy `0 < eps < 1/2` so the barrier
    /// support `[-2 eps, 2 eps]` stays inside the walls. The
    /// crossing-probability asymptotics additionally require `eps < 1/8`
    /// (enforced there) so the hitting window `[0, 4 eps]` has headroom.
    pub eps: f64,
    /// Molecular diffusivity `kappa_eps > 0`.
    pub kappa_eps: f64,
    /// Turbulent diffusivity `kappa_T > 0`.
    pub kappa_t: f64,
    /// Cutoff power `alpha > 0`.
    pub alpha: f64,
    /// Scaling constant `K > 0` of the law `kappa_eps = (K eps)^2 kappa_T`.
    pub k_scale: f64,
    /// Hot-boundary temperature `T_+ > 0`.
    pub t_plus: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(BarrierError::parameter(format!(
                "eps must lie in (0, 1/2) so the barrier stays inside the walls, got {}",
                self.eps
            )));
        }
        for (name, v) in [
            ("kappa_eps", self.kappa_eps),
            ("kappa_T", self.kappa_t),
            ("alpha", self.alpha),
            ("K", self.k_scale),
            ("T_plus", self.t_plus),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BarrierError::parameter(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Parameters on the scaling law `kappa_eps = (K eps)^2 kappa_T`.
    pub fn with_scaling_law(eps: f64, kappa_t: f64, alpha: f64, k_scale: f64, t_plus: f64) -> Self {
        ModelParams {
            eps,
            kappa_eps: (k_scale * eps).powi(2) * kappa_t,
            kappa_t,
            alpha,
            k_scale,
            t_plus,
        }
    }
}

/// Tabulated barrier cutoff on `[0, x_max]`, interpolated by a monotone cubic
/// (Fritsch–Carlson) and evaluated at `|x|` so evenness holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedChi {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedChi {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(BarrierError::parameter(
                "tabulated profile needs >= 2 matching (x, chi) rows",
            ));
        }
        if xs[0] != 0.0 || ys[0] != 0.0 {
            return Err(BarrierError::parameter(
                "tabulated profile must start at (0, 0): chi(0) = 0",
            ));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(BarrierError::parameter(
                    "tabulated x-coordinates must be strictly increasing",
                ));
            }
        }
        for (&x0, &y) in xs.iter().zip(&ys) {
            if !(0.0..=1.0).contains(&y) {
                return Err(BarrierError::parameter(format!(
                    "tabulated chi({x0}) = {y} outside [0, 1]"
                )));
            }
        }
        let slopes = fritsch_carlson_slopes(&xs, &ys);
        Ok(TabulatedChi { xs, ys, slopes })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    fn eval(&self, u: f64) -> f64 {
        let n = self.xs.len();
        if u >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (u - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        v.clamp(0.0, 1.0)
    }

    fn deriv(&self, u: f64) -> f64 {
        let n = self.xs.len();
        if u >= self.xs[n - 1] {
            return 0.0;
        }
        let i = match self.xs.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
            Ok(i) if i + 1 == n => return 0.0,
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (u - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h
    }
}

fn fritsch_carlson_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let d: Vec<f64> = (0..n - 1)
        .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        m[i] = if d[i - 1] * d[i] <= 0.0 {
            0.0
        } else {
            0.5 * (d[i - 1] + d[i])
        };
    }
    // limiter preserving monotonicity on each panel
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / d[i];
        let b = m[i + 1] / d[i];
        let s = a * a + b * b;
        if s > 9.0 {
            let t = 3.0 / s.sqrt();
            m[i] = t * a * d[i];
            m[i + 1] = t * b * d[i];
        }
    }
    m
}

/// Cutoff family selector.
#[derive(Clone, Debug, PartialEq)]
pub enum ProfileKind {
    /// `chi(x) = (1/2)(|x|/eps)^alpha` on `[0, eps)`,
    /// `1 - (1/2)(|x - 2 eps|/eps)^alpha` on `[eps, 2 eps)`, `1` beyond.
    PiecewisePower,
    /// The arctan example profile; defined through its square
    /// `chibar^2 = ((2/pi)^3 atan(x/eps) atan(1e4 (x-1)) atan(1e4 (x+1)))^2`.
    ArctanExample,
    /// User-supplied barrier cutoff.
    Tabulated(TabulatedChi),
}

/// A barrier cutoff together with the choice of including the wall layers.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffProfile {
    pub kind: ProfileKind,
    /// `true` selects `chibar = chi_bdr(x-1) chi_bdr(x+1) chi(x)` (the wall
    /// cutoff uses the same family as the barrier); `false` selects bare
    /// `chi`, as used by the crossing-probability asymptotics.
    pub includes_boundary_layers: bool,
}

impl CutoffProfile {
    pub fn piecewise_power() -> Self {
        CutoffProfile {
            kind: ProfileKind::PiecewisePower,
            includes_boundary_layers: true,
        }
    }

    pub fn piecewise_power_bare() -> Self {
        CutoffProfile {
            kind: ProfileKind::PiecewisePower,
            includes_boundary_layers: false,
        }
    }

    pub fn arctan_example() -> Self {
        CutoffProfile {
            kind: ProfileKind::ArctanExample,
            includes_boundary_layers: true,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        if let ProfileKind::Tabulated(tab) = &self.kind {
            let two_eps = 2.0 * params.eps;
            let has = tab
                .xs()
                .iter()
                .any(|&x| (x - two_eps).abs() <= 1e-9 * two_eps.max(1.0));
            if !has {
                return Err(BarrierError::parameter(
                    "tabulated profile breakpoints must include 2*eps",
                ));
            }
        }
        Ok(())
    }

    /// Smoothness class: the arctan example is C^inf; the piecewise-power
    /// family has a Hoelder kink at 0 unless alpha is an even integer, and
    /// derivative jumps at eps, 2 eps. Spectral operations require `true`.
    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, ProfileKind::ArctanExample)
    }
}

// ---------------------------------------------------------------------------
// spec-level operations

/// Barrier cutoff `chi(x)`. Even, 0 at 0, in [0, 1].
pub fn chi_eval(profile: &CutoffProfile, params: &ModelParams, x: f64) -> Result<f64> {
    profile.validate(params)?;
    Ok(chi_eval_unchecked(profile, params, x))
}

pub(crate) fn chi_eval_unchecked(profile: &CutoffProfile, params: &ModelParams, x: f64) -> f64 {
    let u = x.abs();
    let eps = params.eps;
    match &profile.kind {
        ProfileKind::PiecewisePower => {
            if u >= 2.0 * eps {
                1.0
            } else if u >= eps {
                1.0 - 0.5 * ((2.0 * eps - u) / eps).powf(params.alpha)
            } else {
                0.5 * (u / eps).powf(params.alpha)
            }
        }
        ProfileKind::ArctanExample => std::f64::consts::FRAC_2_PI * (u / eps).atan(),
        ProfileKind::Tabulated(tab) => tab.eval(u),
    }
}

/// Derivative `chi'(x)`. Odd; 0 on the plateau. For `alpha < 1` the
/// piecewise-power derivative is singular at 0 and evaluation there is a
/// domain error.
pub fn chi_deriv(profile: &CutoffProfile, params: &ModelParams, x: f64) -> Result<f64> {
    profile.validate(params)?;
    let u = x.abs();
    let eps = params.eps;
    let alpha = params.alpha;
    let sign = if x >= 0.0 { 1.0 } else { -1.0 };
    Ok(match &profile.kind {
        ProfileKind::PiecewisePower => {
            if u == 0.0 && alpha < 1.0 {
                return Err(BarrierError::domain(
                    "chi' is singular at x = 0 for alpha < 1",
                ));
            }
            if u >= 2.0 * eps {
                0.0
            } else if u >= eps {
                sign * 0.5 * (alpha / eps) * ((2.0 * eps - u) / eps).powf(alpha - 1.0)
            } else if u == 0.0 {
                // alpha >= 1: limit is 1/(2 eps) at alpha = 1, else 0
                if alpha == 1.0 {
                    0.5 / eps
                } else {
                    0.0
                }
            } else {
                sign * 0.5 * (alpha / eps) * (u / eps).powf(alpha - 1.0)
            }
        }
        ProfileKind::ArctanExample => {
            sign * std::f64::consts::FRAC_2_PI / (eps * (1.0 + (u / eps).powi(2)))
        }
        ProfileKind::Tabulated(tab) => sign * tab.deriv(u),
    })
}

/// Full profile `chibar(x) >= 0`; vanishes at 0 and (when wall layers are
/// included) at `x = ±1`.
pub fn chibar_eval(profile: &CutoffProfile, params: &ModelParams, x: f64) -> Result<f64> {
    profile.validate(params)?;
    Ok(Shape::new(params.clone(), profile.clone())?.chibar(x))
}

/// The arctan example evaluated as `chibar^2` directly (the form in which it
/// is defined).
pub fn arctan_example_eval(eps: f64, x: f64) -> f64 {
    let c = arctan_g(eps, x);
    c * c
}

const WALL_STEEPNESS: f64 = 1e4;

fn arctan_g(eps: f64, x: f64) -> f64 {
    let c = std::f64::consts::FRAC_2_PI.powi(3);
    c * (x / eps).atan() * (WALL_STEEPNESS * (x - 1.0)).atan() * (WALL_STEEPNESS * (x + 1.0)).atan()
}

fn arctan_g_deriv(eps: f64, x: f64) -> f64 {
    let c = std::f64::consts::FRAC_2_PI.powi(3);
    let a1 = (x / eps).atan();
    let a2 = (WALL_STEEPNESS * (x - 1.0)).atan();
    let a3 = (WALL_STEEPNESS * (x + 1.0)).atan();
    let d1 = (1.0 / eps) / (1.0 + (x / eps).powi(2));
    let d2 = WALL_STEEPNESS / (1.0 + (WALL_STEEPNESS * (x - 1.0)).powi(2));
    let d3 = WALL_STEEPNESS / (1.0 + (WALL_STEEPNESS * (x + 1.0)).powi(2));
    c * (d1 * a2 * a3 + a1 * d2 * a3 + a1 * a2 * d3)
}

// ---------------------------------------------------------------------------
// evaluated shape: what the analytic / SDE / PDE modules consume

/// A concrete diffusivity shape `a(x) = kappa_eps + kappa_T chibar^2(x)`.
#[derive(Clone, Debug)]
pub struct Shape {
    pub params: ModelParams,
    form: ShapeForm,
}

#[derive(Clone, Debug)]
enum ShapeForm {
    Cutoff(CutoffProfile),
    /// The quadratic model barrier of the stationary heuristic:
    /// `chibar^2 = min(|x|/eps, 1)^2`, no wall layers.
    QuadraticModel,
    /// Constant `chibar ≡ c` (degenerate test profiles; `c = 0` gives pure
    /// molecular diffusion).
    Constant(f64),
}

impl Shape {
    pub fn new(params: ModelParams, profile: CutoffProfile) -> Result<Self> {
        profile.validate(&params)?;
        Ok(Shape {
            params,
            form: ShapeForm::Cutoff(profile),
        })
    }

    /// Quadratic model barrier `chibar^2 = (x/eps)^2` on `[-eps, eps]`, 1
    /// outside — the shape for which the barrier resistance has the closed
    /// form `Theta = eps sqrt(kT/ke) * 2 atan(sqrt(kT/ke))`.
    pub fn quadratic_model(params: ModelParams) -> Self {
        Shape {
            params,
            form: ShapeForm::QuadraticModel,
        }
    }

    pub fn constant(params: ModelParams, chibar: f64) -> Self {
        Shape {
            params,
            form: ShapeForm::Constant(chibar),
        }
    }

    /// Whether `chibar` is smooth enough for the spectral construction
    /// (`chibar'` continuous everywhere). Constant profiles qualify; the
    /// quadratic model and the piecewise-power family have kinks.
    pub fn is_smooth_profile(&self) -> bool {
        match &self.form {
            ShapeForm::Constant(_) => true,
            ShapeForm::QuadraticModel => false,
            ShapeForm::Cutoff(p) => p.is_smooth(),
        }
    }

    pub fn profile(&self) -> Option<&CutoffProfile> {
        match &self.form {
            ShapeForm::Cutoff(p) => Some(p),
            _ => None,
        }
    }

    pub fn chibar_sq(&self, x: f64) -> f64 {
        match &self.form {
            ShapeForm::Constant(c) => c * c,
            ShapeForm::QuadraticModel => {
                let u = (x.abs() / self.params.eps).min(1.0);
                u * u
            }
            ShapeForm::Cutoff(p) => match (&p.kind, p.includes_boundary_layers) {
                (ProfileKind::ArctanExample, true) => arctan_example_eval(self.params.eps, x),
                (ProfileKind::ArctanExample, false) => {
                    let v = std::f64::consts::FRAC_2_PI * (x / self.params.eps).atan();
                    v * v
                }
                _ => {
                    let v = self.chibar(x);
                    v * v
                }
            },
        }
    }

    pub fn chibar(&self, x: f64) -> f64 {
        match &self.form {
            ShapeForm::Constant(c) => *c,
            ShapeForm::QuadraticModel => (x.abs() / self.params.eps).min(1.0),
            ShapeForm::Cutoff(p) => match (&p.kind, p.includes_boundary_layers) {
                (ProfileKind::ArctanExample, _) => self.chibar_sq_via_parts(x).max(0.0).sqrt(),
                _ => {
                    let chi = chi_eval_unchecked(p, &self.params, x);
                    if p.includes_boundary_layers {
                        chi * chi_eval_unchecked(p, &self.params, x - 1.0)
                            * chi_eval_unchecked(p, &self.params, x + 1.0)
                    } else {
                        chi
                    }
                }
            },
        }
    }

    fn chibar_sq_via_parts(&self, x: f64) -> f64 {
        self.chibar_sq(x)
    }

    /// `d/dx chibar^2(x)`; the combination `chibar chibar' = (chibar^2)'/2`
    /// entering the SDE drift. At symmetry points where the derivative is
    /// singular (alpha < 1/2 at 0) the symmetric principal value 0 is
    /// returned at exactly the singular point.
    pub fn chibar_sq_deriv(&self, x: f64) -> f64 {
        match &self.form {
            ShapeForm::Constant(_) => 0.0,
            ShapeForm::QuadraticModel => {
                let eps = self.params.eps;
                if x.abs() >= eps {
                    0.0
                } else {
                    2.0 * x / (eps * eps)
                }
            }
            ShapeForm::Cutoff(p) => match (&p.kind, p.includes_boundary_layers) {
                (ProfileKind::ArctanExample, true) => {
                    2.0 * arctan_g(self.params.eps, x) * arctan_g_deriv(self.params.eps, x)
                }
                (ProfileKind::ArctanExample, false) => {
                    let eps = self.params.eps;
                    let v = std::f64::consts::FRAC_2_PI * (x / eps).atan();
                    let dv = std::f64::consts::FRAC_2_PI / (eps * (1.0 + (x / eps).powi(2)));
                    2.0 * v * dv
                }
                _ => {
                    // product rule over chi(x) * chi(x-1) * chi(x+1)
                    let f = |t: f64| chi_eval_unchecked(p, &self.params, t);
                    let df = |t: f64| self.chi_deriv_principal(p, t);
                    let (c0, c1, c2) = (f(x), f(x - 1.0), f(x + 1.0));
                    let (d0, d1, d2) = (df(x), df(x - 1.0), df(x + 1.0));
                    let chibar = if p.includes_boundary_layers {
                        c0 * c1 * c2
                    } else {
                        c0
                    };
                    let dchibar = if p.includes_boundary_layers {
                        d0 * c1 * c2 + c0 * d1 * c2 + c0 * c1 * d2
                    } else {
                        d0
                    };
                    2.0 * chibar * dchibar
                }
            },
        }
    }

    /// `chibar'(x)` where defined; singular centers evaluate to 0 (principal
    /// value). Used by the spectral module, which restricts to smooth
    /// profiles anyway.
    pub fn chibar_deriv(&self, x: f64) -> f64 {
        match &self.form {
            ShapeForm::Constant(_) => 0.0,
            ShapeForm::QuadraticModel => {
                let eps = self.params.eps;
                if x.abs() >= eps {
                    0.0
                } else {
                    x.signum() / eps
                }
            }
            ShapeForm::Cutoff(p) => match (&p.kind, p.includes_boundary_layers) {
                (ProfileKind::ArctanExample, _) => {
                    let g = arctan_g(self.params.eps, x);
                    let dg = arctan_g_deriv(self.params.eps, x);
                    if g == 0.0 {
                        dg.abs()
                    } else {
                        g.signum() * dg
                    }
                }
                _ => {
                    let f = |t: f64| chi_eval_unchecked(p, &self.params, t);
                    let df = |t: f64| self.chi_deriv_principal(p, t);
                    if p.includes_boundary_layers {
                        df(x) * f(x - 1.0) * f(x + 1.0)
                            + f(x) * df(x - 1.0) * f(x + 1.0)
                            + f(x) * f(x - 1.0) * df(x + 1.0)
                    } else {
                        df(x)
                    }
                }
            },
        }
    }

    fn chi_deriv_principal(&self, p: &CutoffProfile, x: f64) -> f64 {
        if x == 0.0 && self.params.alpha < 1.0 {
            if let ProfileKind::PiecewisePower = p.kind {
                return 0.0;
            }
        }
        chi_deriv(p, &self.params, x).unwrap_or(0.0)
    }

    /// Diffusivity `a(x) = kappa_eps + kappa_T chibar^2(x)`.
    #[inline]
    pub fn diffusivity(&self, x: f64) -> f64 {
        self.params.kappa_eps + self.params.kappa_t * self.chibar_sq(x)
    }

    /// `a'(x) = kappa_T (chibar^2)'(x)` — the divergence-form drift is
    /// `a'(x)` for `X_eps` (2 kT chibar chibar') and `a'/a` scaled for the
    /// time-changed process.
    #[inline]
    pub fn diffusivity_deriv(&self, x: f64) -> f64 {
        self.params.kappa_t * self.chibar_sq_deriv(x)
    }

    /// Quadrature seeds: points where the integrands kink or spike.
    pub fn breakpoints(&self) -> Vec<f64> {
        let eps = self.params.eps;
        let mut pts = vec![0.0];
        match &self.form {
            ShapeForm::Constant(_) => {}
            ShapeForm::QuadraticModel => {
                pts.extend([-eps, eps]);
            }
            ShapeForm::Cutoff(p) => {
                for s in [eps, 2.0 * eps, 4.0 * eps] {
                    pts.extend([s, -s]);
                }
                if p.includes_boundary_layers {
                    for s in [eps, 2.0 * eps, 4.0 * eps] {
                        pts.extend([1.0 - s, -1.0 + s]);
                    }
                }
                if let ProfileKind::ArctanExample = p.kind {
                    // wall factors vary on the 1e-4 scale
                    for s in [1e-4, 2e-4, 1e-3] {
                        pts.extend([1.0 - s, -1.0 + s]);
                    }
                }
                if let ProfileKind::Tabulated(tab) = &p.kind {
                    for &x in tab.xs() {
                        pts.extend([x, -x]);
                    }
                }
            }
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp_params(alpha: f64, eps: f64) -> ModelParams {
        ModelParams {
            eps,
            kappa_eps: 0.004,
            kappa_t: 0.1,
            alpha,
            k_scale: 1.0,
            t_plus: 2.0,
        }
    }

    #[test]
    fn chi_piecewise_power_reference_values() {
        let p = CutoffProfile::piecewise_power();
        let m = pp_params(1.0, 0.1);
        assert_eq!(chi_eval(&p, &m, 0.0).unwrap(), 0.0);
        // x = eps: both branches give 1/2
        assert!((chi_eval(&p, &m, 0.1).unwrap() - 0.5).abs() < 1e-15);
        let m2 = pp_params(2.0, 0.1);
        assert_eq!(chi_eval(&p, &m2, 0.25).unwrap(), 1.0);
    }

    #[test]
    fn chi_is_even_and_bounded() {
        let p = CutoffProfile::piecewise_power();
        for alpha in [0.25, 0.5, 1.0, 2.0] {
            let m = pp_params(alpha, 0.07);
            for i in 0..200 {
                let x = -1.0 + 0.01 * i as f64;
                let v = chi_eval(&p, &m, x).unwrap();
                let w = chi_eval(&p, &m, -x).unwrap();
                assert!((v - w).abs() < 1e-15);
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn chi_continuity_at_breakpoints() {
        let p = CutoffProfile::piecewise_power();
        for alpha in [0.5, 1.0, 1.7] {
            let m = pp_params(alpha, 0.1);
            for bp in [0.1, 0.2] {
                let lo = chi_eval(&p, &m, bp - 1e-12).unwrap();
                let hi = chi_eval(&p, &m, bp + 1e-12).unwrap();
                // chi is Hoelder-min(alpha,1) at its breakpoints (Lipschitz
                // with slope ~ alpha/eps for alpha > 1), so the change over a
                // d-neighborhood scales accordingly
                let tol = (2e-12 / 0.1f64).powf(alpha.min(1.0)) * alpha.max(1.0) + 1e-12;
                assert!((lo - hi).abs() < tol, "jump at {bp} for alpha {alpha}");
            }
        }
    }

    #[test]
    fn chi_deriv_reference_and_plateau() {
        let p = CutoffProfile::piecewise_power();
        let m = pp_params(1.0, 0.1);
        assert!((chi_deriv(&p, &m, 0.05).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(chi_deriv(&p, &m, 0.5).unwrap(), 0.0);
        let m2 = pp_params(2.0, 0.1);
        let d = chi_deriv(&p, &m2, 0.05).unwrap();
        let dn = chi_deriv(&p, &m2, -0.05).unwrap();
        assert!((d + dn).abs() < 1e-15, "oddness");
    }

    #[test]
    fn chi_deriv_singular_at_zero_for_small_alpha() {
        let p = CutoffProfile::piecewise_power();
        let m = pp_params(0.5, 0.1);
        assert!(chi_deriv(&p, &m, 0.0).is_err());
    }

    #[test]
    fn chi_deriv_matches_finite_differences() {
        let p = CutoffProfile::piecewise_power();
        for alpha in [0.75, 1.0, 2.0] {
            let m = pp_params(alpha, 0.1);
            for &x in &[0.03, 0.05, 0.13, 0.17, 0.31, -0.08] {
                let h = 1e-6;
                let fd = (chi_eval(&p, &m, x + h).unwrap() - chi_eval(&p, &m, x - h).unwrap())
                    / (2.0 * h);
                let an = chi_deriv(&p, &m, x).unwrap();
                if an.abs() > 1e-12 {
                    assert!(
                        ((fd - an) / an).abs() < 1e-6,
                        "alpha {alpha} x {x}: fd {fd} vs {an}"
                    );
                } else {
                    assert!(fd.abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn chibar_vanishes_at_walls_and_center() {
        let p = CutoffProfile::piecewise_power();
        let m = pp_params(1.0, 0.1);
        assert_eq!(chibar_eval(&p, &m, 1.0).unwrap(), 0.0);
        assert_eq!(chibar_eval(&p, &m, -1.0).unwrap(), 0.0);
        assert_eq!(chibar_eval(&p, &m, 0.0).unwrap(), 0.0);
        // plateau: all three factors 1 for eps < 1/8
        assert_eq!(chibar_eval(&p, &m, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn arctan_example_values() {
        assert_eq!(arctan_example_eval(0.2, 0.0), 0.0);
        assert_eq!(arctan_example_eval(0.2, 1.0), 0.0);
        let a = arctan_example_eval(0.2, 0.5);
        let b = arctan_example_eval(0.2, -0.5);
        assert!((a - b).abs() < 1e-15, "even: {a} vs {b}");
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn arctan_sq_deriv_matches_finite_differences() {
        let m = pp_params(1.0, 0.1);
        let shape = Shape::new(m, CutoffProfile::arctan_example()).unwrap();
        for &x in &[0.02, 0.3, -0.45, 0.9] {
            let h = 1e-6;
            let fd = (shape.chibar_sq(x + h) - shape.chibar_sq(x - h)) / (2.0 * h);
            let an = shape.chibar_sq_deriv(x);
            assert!(
                (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                "x {x}: {fd} vs {an}"
            );
        }
    }

    #[test]
    fn tabulated_roundtrip_and_monotone() {
        let eps = 0.1;
        let xs = vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.5];
        let ys = vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.0];
        let tab = TabulatedChi::new(xs.clone(), ys.clone()).unwrap();
        let p = CutoffProfile {
            kind: ProfileKind::Tabulated(tab),
            includes_boundary_layers: false,
        };
        let m = pp_params(1.0, eps);
        for (x, y) in xs.iter().zip(&ys) {
            assert!((chi_eval(&p, &m, *x).unwrap() - y).abs() < 1e-14);
        }
        // linear data reproduced exactly by the monotone cubic in between
        assert!((chi_eval(&p, &m, 0.075).unwrap() - 0.375).abs() < 1e-14);
        // beyond the table: clamped to last value
        assert_eq!(chi_eval(&p, &m, 0.9).unwrap(), 1.0);
    }

    #[test]
    fn tabulated_requires_two_eps_breakpoint() {
        let tab = TabulatedChi::new(vec![0.0, 0.3], vec![0.0, 1.0]).unwrap();
        let p = CutoffProfile {
            kind: ProfileKind::Tabulated(tab),
            includes_boundary_layers: false,
        };
        let m = pp_params(1.0, 0.1);
        assert!(p.validate(&m).is_err());
    }

    #[test]
    fn params_validation() {
        let mut m = pp_params(1.0, 0.6);
        assert!(m.validate().is_err(), "eps >= 1/2 rejected");
        m.eps = 0.2;
        assert!(m.validate().is_ok(), "figure-scale eps = 0.2 allowed");
        m.eps = 0.1;
        assert!(m.validate().is_ok());
        m.kappa_t = -1.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn quadratic_model_shape() {
        let m = pp_params(1.0, 0.1);
        let s = Shape::quadratic_model(m);
        assert_eq!(s.chibar_sq(0.05), 0.25);
        assert_eq!(s.chibar_sq(0.3), 1.0);
        assert_eq!(s.chibar_sq(-0.05), 0.25);
        let h = 1e-7;
        let fd = (s.chibar_sq(0.05 + h) - s.chibar_sq(0.05 - h)) / (2.0 * h);
        assert!((fd - s.chibar_sq_deriv(0.05)).abs() < 1e-6);
    }
}
