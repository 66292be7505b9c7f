//! Turbulent velocity basis: lattice index sets, divergence-free modes
//! `sigma_k`, sampled velocity fields, and the pointwise covariance
//! decomposition `Q = Q_bar + R` with its remainder decay.
//!
//! Modes live on the lattice `k = (pi m, k2)` with `m, k2` nonzero integers
//! and `sqrt(m^2 + k2^2)` in the band `[N, 2N]`. For `m > 0` the mode is the
//! perpendicular gradient of `sin(k.x) chibar(x)`; the mirrored index `-k`
//! carries the cosine partner, so the four sign quadrants together form a
//! real Fourier basis. The stream cutoff `chibar` makes every mode
//! divergence-free with zero normal component at the walls.

use crate::coefficients::Shape;
use crate::error::{BarrierError, Result};
use crate::rng::SplitMix64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Hard cap on the total mode count (all four quadrants).
const MODE_CAP: usize = 1 << 24;

/// A lattice index; the physical wavevector is `(pi * m, k2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeIndex {
    pub m: i64,
    pub k2: i64,
}

/// Quadrant classes by the signs of `(m, k2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrant {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
}

impl ModeIndex {
    /// Physical wavevector `(k1, k2) = (pi m, k2)`.
    #[inline]
    pub fn wavevector(&self) -> (f64, f64) {
        (PI * self.m as f64, self.k2 as f64)
    }

    /// Euclidean norm of the physical wavevector.
    #[inline]
    pub fn knorm(&self) -> f64 {
        let (k1, k2) = self.wavevector();
        k1.hypot(k2)
    }

    /// `k_perp = (-k2, k1)`.
    #[inline]
    pub fn kperp(&self) -> (f64, f64) {
        let (k1, k2) = self.wavevector();
        (-k2, k1)
    }

    /// Sine modes sit in the half-lattice `m > 0`; their `-k` mirrors carry
    /// the cosine partner.
    #[inline]
    pub fn is_sine(&self) -> bool {
        self.m > 0
    }

    pub fn quadrant(&self) -> Quadrant {
        match (self.m > 0, self.k2 > 0) {
            (true, true) => Quadrant::PlusPlus,
            (true, false) => Quadrant::PlusMinus,
            (false, true) => Quadrant::MinusPlus,
            (false, false) => Quadrant::MinusMinus,
        }
    }
}

/// The band-limited index set `K_N` with its normalization.
#[derive(Clone, Debug)]
pub struct SpectralSet {
    pub n: u32,
    /// All modes, in the canonical deterministic order: lexicographic in
    /// `(m, k2)` across the four quadrants.
    pub modes: Vec<ModeIndex>,
    /// `Card(K_N` intersected with the (+,+) quadrant`)`.
    pub card_pp: usize,
    /// Normalization `c_N = sqrt(card_pp / 2)`.
    pub c_n: f64,
}

impl SpectralSet {
    /// Mode coefficient `C(k, N) = 1/c_N` (identical on the whole set).
    #[inline]
    pub fn coeff(&self) -> f64 {
        1.0 / self.c_n
    }
}

/// Enumerate `K_N`: indices `(m, k2)` with both entries nonzero and
/// `sqrt(m^2 + k2^2)` in `[N, 2N]`, over all four sign quadrants.
pub fn build_index_set(n: u32) -> Result<SpectralSet> {
    if n < 1 {
        return Err(BarrierError::parameter("spectral scale N must be >= 1"));
    }
    let n = n as i64;
    let lo = n * n;
    let hi = 4 * n * n;
    let mut pp: Vec<(i64, i64)> = Vec::new();
    for m in 1..=2 * n {
        for k2 in 1..=2 * n {
            let r2 = m * m + k2 * k2;
            if r2 >= lo && r2 <= hi {
                pp.push((m, k2));
            }
        }
    }
    let card_pp = pp.len();
    if card_pp == 0 {
        return Err(BarrierError::Numeric(format!(
            "empty index set at N = {n}"
        )));
    }
    if 4 * card_pp > MODE_CAP {
        return Err(BarrierError::Numeric(format!(
            "index set at N = {n} has {} modes, exceeding the cap {MODE_CAP}",
            4 * card_pp
        )));
    }
    let mut modes: Vec<ModeIndex> = Vec::with_capacity(4 * card_pp);
    for &(m, k2) in &pp {
        modes.push(ModeIndex { m, k2 });
        modes.push(ModeIndex { m, k2: -k2 });
        modes.push(ModeIndex { m: -m, k2 });
        modes.push(ModeIndex { m: -m, k2: -k2 });
    }
    modes.sort_by_key(|k| (k.m, k.k2));
    Ok(SpectralSet {
        n: n as u32,
        modes,
        card_pp,
        c_n: (card_pp as f64 / 2.0).sqrt(),
    })
}

fn require_smooth(shape: &Shape) -> Result<()> {
    if !shape.is_smooth_profile() {
        return Err(BarrierError::domain(
            "spectral operations need a smooth profile (continuous chibar'); \
             the piecewise-power and quadratic-model shapes have kinks",
        ));
    }
    Ok(())
}

/// Evaluate the divergence-free mode
/// `sigma_k(x, y) = |k|^{-1} grad_perp[trig(k.x) chibar(x)]`,
/// `trig = sin` for `m > 0` and `cos` for `m < 0`.
pub fn sigma_k_eval(k: &ModeIndex, shape: &Shape, x: f64, y: f64) -> Result<[f64; 2]> {
    require_smooth(shape)?;
    Ok(sigma_k_unchecked(k, shape, x, y))
}

#[inline]
fn sigma_k_unchecked(k: &ModeIndex, shape: &Shape, x: f64, y: f64) -> [f64; 2] {
    let (k1, k2) = k.wavevector();
    let theta = k1 * x + k2 * y;
    let (s, c) = theta.sin_cos();
    let chibar = shape.chibar(x);
    let dchibar = shape.chibar_deriv(x);
    let inv = 1.0 / k.knorm();
    if k.is_sine() {
        // grad_perp = (-d/dy, d/dx) of sin(theta) chibar(x)
        [-k2 * c * chibar * inv, (k1 * c * chibar + s * dchibar) * inv]
    } else {
        [k2 * s * chibar * inv, (-k1 * s * chibar + c * dchibar) * inv]
    }
}

/// One spatial sample of the velocity field
/// `u(x, y) = sqrt(kappa_T) (1/c_N) sum_k sigma_k(x, y) xi_k`
/// with iid standard-normal mode amplitudes drawn from `seed` in canonical
/// mode order (one field realization shared by all evaluation points).
pub fn velocity_sample(
    set: &SpectralSet,
    shape: &Shape,
    points: &[(f64, f64)],
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    require_smooth(shape)?;
    let mut rng = SplitMix64::path_stream(seed, 0);
    let xi: Vec<f64> = set.modes.iter().map(|_| rng.normal()).collect();
    let amp = shape.params.kappa_t.sqrt() * set.coeff();
    Ok(points
        .par_iter()
        .map(|&(x, y)| {
            let mut acc = Kahan2::new();
            for (k, &w) in set.modes.iter().zip(&xi) {
                let s = sigma_k_unchecked(k, shape, x, y);
                acc.add(w * s[0], w * s[1]);
            }
            [amp * acc.0.value(), amp * acc.1.value()]
        })
        .collect())
}

/// Pointwise covariance decomposition at `x = x'`.
#[derive(Clone, Copy, Debug)]
pub struct CovarianceDiag {
    /// Full normalized mode sum `(1/(2 c_N^2)) sum_k sigma_k tensor sigma_k`.
    pub q_full: [[f64; 2]; 2],
    /// Leading part: the `chibar^2 k_perp tensor k_perp / |k|^2` trigonometric
    /// sums (sine and cosine families).
    pub q_bar: [[f64; 2]; 2],
    /// Remainder `q_full - q_bar` entrywise.
    pub r: [[f64; 2]; 2],
    pub at: (f64, f64),
}

#[derive(Clone, Copy, Default)]
struct Kahan(f64, f64);

impl Kahan {
    #[inline]
    fn add(&mut self, v: f64) {
        let y = v - self.1;
        let t = self.0 + y;
        self.1 = (t - self.0) - y;
        self.0 = t;
    }
    #[inline]
    fn value(&self) -> f64 {
        self.0
    }
}

struct Kahan2(Kahan, Kahan);

impl Kahan2 {
    fn new() -> Self {
        Kahan2(Kahan::default(), Kahan::default())
    }
    #[inline]
    fn add(&mut self, a: f64, b: f64) {
        self.0.add(a);
        self.1.add(b);
    }
}

/// Compute `q_full`, `q_bar`, and the remainder at a point, by compensated
/// summation over the canonical mode order.
///
/// With the paired real basis the trace of `q_bar` equals `2 chibar^2(x)`
/// exactly (each of the `2 card_pp` half-lattice modes carries unit trace
/// scaled by `1/(2 c_N^2)`), and its off-diagonal cancels by the
/// `k2 <-> -k2` pairing. The sampled field of [`velocity_sample`] uses
/// coefficients `1/c_N`, so its pointwise covariance is `2 kappa_T q_full`.
pub fn covariance_diagonal(
    set: &SpectralSet,
    shape: &Shape,
    x: f64,
    y: f64,
) -> Result<CovarianceDiag> {
    require_smooth(shape)?;
    let norm = 1.0 / (2.0 * set.c_n * set.c_n);
    let chibar_sq = shape.chibar_sq(x);

    let mut full = [[Kahan::default(); 2]; 2];
    let mut bar = [[Kahan::default(); 2]; 2];
    for k in &set.modes {
        let s = sigma_k_unchecked(k, shape, x, y);
        for i in 0..2 {
            for j in 0..2 {
                full[i][j].add(s[i] * s[j]);
            }
        }
        // leading trigonometric part: chibar^2 trig'^2 k_perp k_perp / |k|^2,
        // trig' = cos for sine modes, sin for cosine modes
        let (k1, k2) = k.wavevector();
        let theta = k1 * x + k2 * y;
        let t = if k.is_sine() { theta.cos() } else { theta.sin() };
        let w = chibar_sq * t * t / (k.knorm() * k.knorm());
        let kp = k.kperp();
        let kp = [kp.0, kp.1];
        for i in 0..2 {
            for j in 0..2 {
                bar[i][j].add(w * kp[i] * kp[j]);
            }
        }
    }
    let mut q_full = [[0.0; 2]; 2];
    let mut q_bar = [[0.0; 2]; 2];
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            q_full[i][j] = norm * full[i][j].value();
            q_bar[i][j] = norm * bar[i][j].value();
            r[i][j] = q_full[i][j] - q_bar[i][j];
        }
    }
    Ok(CovarianceDiag {
        q_full,
        q_bar,
        r,
        at: (x, y),
    })
}

/// Analytic remainder bound versus the measured sup of `||R||` on a probe
/// grid.
#[derive(Clone, Copy, Debug)]
pub struct RemainderReport {
    /// `(1/c_N^2) Card(K_N half-lattice) (1/N + 1/N^2)`.
    pub analytic_bound: f64,
    /// Sup over the probe grid of the Frobenius norm of the remainder.
    pub measured_sup: f64,
}

fn frobenius(m: &[[f64; 2]; 2]) -> f64 {
    (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
}

/// Measure the remainder over an `n_probe`-point grid in `x` (three `y`
/// slices) and return it with the analytic first-order bound.
///
/// The measured diagonal remainder decays at second order in `N`: the
/// `chibar chibar'` cross terms cancel exactly inside every `k, -k` pair at
/// `x = x'`, leaving only the `chibar'^2` term, one order better than the
/// bound.
pub fn remainder_bound(set: &SpectralSet, shape: &Shape, n_probe: usize) -> Result<RemainderReport> {
    require_smooth(shape)?;
    if n_probe < 2 {
        return Err(BarrierError::parameter("probe grid needs >= 2 points"));
    }
    let n = set.n as f64;
    let half_card = 2 * set.card_pp;
    let analytic_bound =
        (1.0 / (set.c_n * set.c_n)) * half_card as f64 * (1.0 / n + 1.0 / (n * n));
    let ys = [0.0, 1.0, 2.5];
    let mut measured_sup = 0.0f64;
    for i in 0..n_probe {
        // interior probe: the wall layers are excluded, where chibar' of the
        // steep wall cutoffs is not representative of the bulk constant
        let x = -0.95 + 1.9 * i as f64 / (n_probe - 1) as f64;
        for &y in &ys {
            let cov = covariance_diagonal(set, shape, x, y)?;
            measured_sup = measured_sup.max(frobenius(&cov.r));
        }
    }
    Ok(RemainderReport {
        analytic_bound,
        measured_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CutoffProfile, ModelParams};

    fn arctan_shape() -> Shape {
        let params = ModelParams {
            eps: 0.2,
            kappa_eps: 0.004,
            kappa_t: 0.1,
            alpha: 1.0,
            k_scale: 1.0,
            t_plus: 2.0,
        };
        Shape::new(params, CutoffProfile::arctan_example()).unwrap()
    }

    fn const_shape(chibar: f64) -> Shape {
        let params = ModelParams {
            eps: 0.2,
            kappa_eps: 0.004,
            kappa_t: 0.1,
            alpha: 1.0,
            k_scale: 1.0,
            t_plus: 2.0,
        };
        Shape::constant(params, chibar)
    }

    #[test]
    fn index_set_small_cardinalities() {
        let s1 = build_index_set(1).unwrap();
        assert_eq!(s1.card_pp, 1, "only (1,1) has norm in [1,2]");
        assert_eq!(s1.modes.len(), 4);
        let s4 = build_index_set(4).unwrap();
        assert_eq!(s4.card_pp, 33);
        assert_eq!(s4.modes.len(), 4 * 33);
        assert!((s4.c_n * s4.c_n * 2.0 - s4.card_pp as f64).abs() < 1e-12);
    }

    #[test]
    fn quadrant_classes_are_balanced() {
        let s = build_index_set(6).unwrap();
        let mut counts = [0usize; 4];
        for k in &s.modes {
            counts[match k.quadrant() {
                Quadrant::PlusPlus => 0,
                Quadrant::PlusMinus => 1,
                Quadrant::MinusPlus => 2,
                Quadrant::MinusMinus => 3,
            }] += 1;
        }
        assert!(counts.iter().all(|&c| c == s.card_pp), "{counts:?}");
        // canonical order is strictly increasing lexicographically
        for w in s.modes.windows(2) {
            assert!((w[0].m, w[0].k2) < (w[1].m, w[1].k2));
        }
    }

    #[test]
    fn cardinality_matches_quarter_annulus_area() {
        let s = build_index_set(128).unwrap();
        let asymptotic = 0.75 * PI * 128.0 * 128.0;
        let ratio = s.card_pp as f64 / asymptotic;
        assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn sigma_rejects_non_smooth_profiles() {
        let params = ModelParams {
            eps: 0.1,
            kappa_eps: 0.004,
            kappa_t: 0.1,
            alpha: 1.0,
            k_scale: 1.0,
            t_plus: 2.0,
        };
        let pp = Shape::new(params, CutoffProfile::piecewise_power()).unwrap();
        let k = ModeIndex { m: 1, k2: 1 };
        assert!(sigma_k_eval(&k, &pp, 0.3, 1.0).is_err());
        assert!(sigma_k_eval(&k, &arctan_shape(), 0.3, 1.0).is_ok());
    }

    #[test]
    fn sigma_normal_component_vanishes_at_walls() {
        let shape = arctan_shape();
        let set = build_index_set(3).unwrap();
        for k in &set.modes {
            for y in [0.0, 1.3, 5.9] {
                let sp = sigma_k_eval(k, &shape, 1.0, y).unwrap();
                let sm = sigma_k_eval(k, &shape, -1.0, y).unwrap();
                assert_eq!(sp[0], 0.0, "k {k:?} y {y}");
                assert_eq!(sm[0], 0.0, "k {k:?} y {y}");
            }
        }
    }

    #[test]
    fn sigma_plateau_closed_form() {
        // constant chibar = 1: sigma = (k_perp/|k|) cos(theta) for sine modes
        let shape = const_shape(1.0);
        let k = ModeIndex { m: 2, k2: 3 };
        let (x, y) = (0.4, 1.7);
        let s = sigma_k_eval(&k, &shape, x, y).unwrap();
        let (k1, k2) = k.wavevector();
        let c = (k1 * x + k2 * y).cos() / k.knorm();
        assert!((s[0] - (-k2) * c).abs() < 1e-14);
        assert!((s[1] - k1 * c).abs() < 1e-14);
    }

    #[test]
    fn sigma_is_divergence_free() {
        let shape = arctan_shape();
        let set = build_index_set(4).unwrap();
        let mut rng = SplitMix64::path_stream(77, 0);
        let h = 1e-5;
        for _ in 0..20 {
            let x = -0.9 + 1.8 * rng.uniform();
            let y = 6.0 * rng.uniform();
            let k = set.modes[(rng.next_u64() % set.modes.len() as u64) as usize];
            let dx = (sigma_k_eval(&k, &shape, x + h, y).unwrap()[0]
                - sigma_k_eval(&k, &shape, x - h, y).unwrap()[0])
                / (2.0 * h);
            let dy = (sigma_k_eval(&k, &shape, x, y + h).unwrap()[1]
                - sigma_k_eval(&k, &shape, x, y - h).unwrap()[1])
                / (2.0 * h);
            assert!((dx + dy).abs() < 1e-6, "div {} at ({x}, {y}) k {k:?}", dx + dy);
        }
    }

    #[test]
    fn covariance_trace_and_offdiagonal_identities() {
        let shape = arctan_shape();
        let set = build_index_set(8).unwrap();
        for &(x, y) in &[(0.5, 0.0), (0.13, 2.2), (-0.7, 4.0), (0.0, 1.0), (1.0, 2.0)] {
            let cov = covariance_diagonal(&set, &shape, x, y).unwrap();
            let trace = cov.q_bar[0][0] + cov.q_bar[1][1];
            let want = 2.0 * shape.chibar_sq(x);
            assert!(
                (trace - want).abs() < 1e-12 * want.max(1.0),
                "trace {trace} vs {want} at ({x}, {y})"
            );
            assert!(cov.q_bar[0][1].abs() < 1e-12, "off-diag {}", cov.q_bar[0][1]);
            assert!(cov.q_bar[1][0].abs() < 1e-12);
            // decomposition is exact by construction
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (cov.q_full[i][j] - cov.q_bar[i][j] - cov.r[i][j]).abs() < 1e-15
                    );
                }
            }
            // q_full is a normalized sum of outer products: PSD
            let tr = cov.q_full[0][0] + cov.q_full[1][1];
            let det = cov.q_full[0][0] * cov.q_full[1][1] - cov.q_full[0][1] * cov.q_full[1][0];
            assert!(tr >= -1e-10 && det >= -1e-10, "tr {tr} det {det}");
        }
    }

    #[test]
    fn covariance_vanishes_at_center_and_walls() {
        let shape = arctan_shape();
        let set = build_index_set(4).unwrap();
        for x in [0.0, 1.0, -1.0] {
            let cov = covariance_diagonal(&set, &shape, x, 0.7).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!(cov.q_bar[i][j].abs() < 1e-14, "q_bar nonzero at x {x}");
                }
            }
        }
    }

    #[test]
    fn constant_profile_has_zero_remainder() {
        // chibar' = 0 kills every non-leading term exactly
        let shape = const_shape(0.8);
        let set = build_index_set(8).unwrap();
        for &(x, y) in &[(0.3, 0.0), (-0.6, 2.0)] {
            let cov = covariance_diagonal(&set, &shape, x, y).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!(cov.r[i][j].abs() < 1e-13, "r[{i}][{j}] = {}", cov.r[i][j]);
                }
            }
        }
    }

    #[test]
    fn remainder_is_second_order_and_below_bound() {
        // diagonal remainder = chibar'^2 term only (pairwise cross-term
        // cancellation), so doubling N quarters it; the first-order analytic
        // bound holds with a wide margin
        let shape = arctan_shape();
        let mut sups = Vec::new();
        for n in [8, 16, 32, 64] {
            let set = build_index_set(n).unwrap();
            let rep = remainder_bound(&set, &shape, 41).unwrap();
            assert!(
                rep.measured_sup <= rep.analytic_bound * 10.0,
                "N {n}: measured {} vs bound {}",
                rep.measured_sup,
                rep.analytic_bound
            );
            sups.push(rep.measured_sup);
        }
        for w in sups.windows(2) {
            let ratio = w[1] / w[0];
            assert!(
                (0.2..0.31).contains(&ratio),
                "expected quartering per doubling, got ratio {ratio} in {sups:?}"
            );
        }
    }

    #[test]
    fn velocity_sample_statistics() {
        let shape = arctan_shape();
        let set = build_index_set(4).unwrap();
        let pt = (0.5, 1.0);
        let n_samples = 3000usize;
        let mut mean = [0.0f64; 2];
        let mut second = [0.0f64; 2];
        for s in 0..n_samples {
            let u = velocity_sample(&set, &shape, &[pt], 900 + s as u64).unwrap()[0];
            mean[0] += u[0];
            mean[1] += u[1];
            second[0] += u[0] * u[0];
            second[1] += u[1] * u[1];
        }
        let cov = covariance_diagonal(&set, &shape, pt.0, pt.1).unwrap();
        for i in 0..2 {
            mean[i] /= n_samples as f64;
            second[i] /= n_samples as f64;
            // sampled coefficients 1/c_N carry twice the normalized diagonal
            let want = 2.0 * shape.params.kappa_t * cov.q_full[i][i];
            let se_mean = (want / n_samples as f64).sqrt();
            assert!(mean[i].abs() < 3.5 * se_mean, "mean[{i}] = {}", mean[i]);
            let se_var = want * (2.0 / n_samples as f64).sqrt();
            assert!(
                (second[i] - want).abs() < 4.0 * se_var,
                "var[{i}] = {} vs {want}",
                second[i]
            );
        }
    }

    #[test]
    fn velocity_sample_wall_and_determinism() {
        let shape = arctan_shape();
        let set = build_index_set(3).unwrap();
        let pts = [(1.0, 0.3), (-1.0, 2.0), (0.2, 0.9)];
        let a = velocity_sample(&set, &shape, &pts, 42).unwrap();
        let b = velocity_sample(&set, &shape, &pts, 42).unwrap();
        assert_eq!(a, b, "same seed, same field");
        assert_eq!(a[0][0], 0.0, "no normal flow at x = 1");
        assert_eq!(a[1][0], 0.0, "no normal flow at x = -1");
        let c = velocity_sample(&set, &shape, &pts, 43).unwrap();
        assert_ne!(a, c, "different seed, different field");
    }
}
