//! Adaptive composite Gauss–Legendre quadrature.
//!
//! The diffusivity integrands `1/(kappa_eps + kappa_T chi^2)` are
//! Lorentzian-like spikes of width `~ eps * sqrt(kappa_eps/kappa_T)`, many
//! orders of magnitude narrower than the domain for the scaling-law regimes.
//! Panels are therefore seeded at the profile breakpoints and refined by
//! bisection with a 10-point rule per panel, comparing each panel against its
//! two halves for the local error estimate.

use crate::error::{BarrierError, Result};

/// 10-point Gauss–Legendre abscissae (positive half) and weights on [-1, 1].
const GL10_X: [f64; 5] = [
    0.148_874_338_981_631_21,
    0.433_395_394_129_247_19,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_W: [f64; 5] = [
    0.295_524_224_714_752_87,
    0.269_266_719_309_996_35,
    0.219_086_362_515_982_04,
    0.149_451_349_150_580_59,
    0.066_671_344_308_688_14,
];

/// Hard cap on refined panels; hit only by pathological integrands.
const PANEL_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub abs_err: f64,
    pub panels: usize,
}

#[inline]
fn gl10<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..5 {
        let dx = h * GL10_X[i];
        s += GL10_W[i] * (f(c - dx) + f(c + dx));
    }
    s * h
}

/// Integrate `f` over `[a, b]` (either orientation) to relative tolerance
/// `rel_tol`. `seeds` lists points where the integrand has breakpoints or
/// sharp features; those interior to the interval become initial panel edges.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    seeds: &[f64],
    rel_tol: f64,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            abs_err: 0.0,
            panels: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut edges: Vec<f64> = vec![lo, hi];
    for &s in seeds {
        if s > lo && s < hi {
            edges.push(s);
        }
    }
    edges.sort_by(|p, q| p.partial_cmp(q).unwrap());
    edges.dedup();

    // Rough first pass sets the absolute-error budget; the integrands used in
    // this crate are one-signed, so the rough value cannot vanish by
    // cancellation while the refined value stays large.
    let mut rough = 0.0;
    for w in edges.windows(2) {
        rough += gl10(f, w[0], w[1]);
    }
    let scale = rough.abs().max(f64::MIN_POSITIVE);
    let budget = rel_tol * scale;
    let span = hi - lo;
    let min_len = span * 2.0_f64.powi(-60);

    let mut stack: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    let mut value = 0.0;
    let mut err = 0.0;
    let mut panels = stack.len();

    while let Some((p, q)) = stack.pop() {
        let mid = 0.5 * (p + q);
        let whole = gl10(f, p, q);
        let halves = gl10(f, p, mid) + gl10(f, mid, q);
        let local_err = (halves - whole).abs();
        let len = q - p;
        // A panel is accepted when its error fits the share of the global
        // budget proportional to its length, or is small relative to its own
        // mass (the rough pass can grossly underestimate narrow spikes, so a
        // purely global budget would demand unattainable absolute accuracy).
        if local_err <= 0.1 * budget * (len / span) + 0.1 * rel_tol * halves.abs()
            || len <= min_len
            || panels >= PANEL_CAP
        {
            value += halves;
            err += local_err;
        } else {
            panels += 2;
            stack.push((p, mid));
            stack.push((mid, q));
        }
    }

    if !value.is_finite() {
        return Err(BarrierError::Numeric(format!(
            "non-finite quadrature over [{lo}, {hi}]"
        )));
    }
    let achieved = err / value.abs().max(f64::MIN_POSITIVE);
    if achieved > rel_tol * 10.0 {
        return Err(BarrierError::QuadratureFailure {
            achieved,
            requested: rel_tol,
        });
    }
    Ok(Quadrature {
        value: sign * value,
        abs_err: err,
        panels,
    })
}

/// Default relative tolerance used by the analytic modules.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(&|x: f64| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, &[], 1e-12).unwrap();
        // antiderivative x^4/4 - x^2 + x
        let exact = (4.0 - 4.0 + 2.0) - (0.25 - 1.0 - 1.0);
        assert!((q.value - exact).abs() < 1e-13);
    }

    #[test]
    fn orientation_flips_sign() {
        let fwd = integrate(&|x: f64| x.exp(), 0.0, 1.0, &[], 1e-12).unwrap();
        let bwd = integrate(&|x: f64| x.exp(), 1.0, 0.0, &[], 1e-12).unwrap();
        assert!((fwd.value + bwd.value).abs() < 1e-13);
        assert!((fwd.value - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn narrow_lorentzian_spike() {
        // width 1e-6 spike centered at 0 over [-1, 1]: integral = 2*atan(1e6)*1e-6
        let w = 1e-6;
        let f = |x: f64| 1.0 / (1.0 + (x / w).powi(2));
        let q = integrate(&f, -1.0, 1.0, &[0.0], 1e-10).unwrap();
        let exact = 2.0 * w * (1.0 / w).atan();
        assert!(
            ((q.value - exact) / exact).abs() < 1e-9,
            "got {} want {}",
            q.value,
            exact
        );
    }

    #[test]
    fn empty_interval() {
        let q = integrate(&|_| 1.0, 0.5, 0.5, &[], 1e-10).unwrap();
        assert_eq!(q.value, 0.0);
    }
}
