//! Closed-form hitting probabilities for the hard-membrane process.
//!
//! With membrane states `0-` / `0+` and permeabilities `beta_minus`,
//! `beta_plus`, the probability of hitting `a < 0` before `b > 0` is
//!
//! ```text
//! P_{0-}(tau_a < tau_b) = (b beta_plus + 1) / D
//! P_{0+}(tau_a < tau_b) =  b beta_plus      / D
//! D = -a beta_minus + b beta_plus + 1
//! ```
//!
//! and interior starts interpolate linearly on each side (the process is a
//! Brownian motion there, so hitting probabilities are harmonic, i.e.
//! piecewise linear with a jump across the membrane). The elastic-BM
//! building block is `P(hit b before killing) = 1/(1 + b beta)` for
//! reflected BM killed at an `Exp(beta)` local-time threshold.
//!
//! The wall-reflected variant (reflecting walls at +-1 carrying their own
//! `Exp(beta)` clocks) leads to a 4x4 linear system over the states
//! `{(-1)+, 0-, 0+, 1-}` with coefficients `q = beta/(1+beta)`,
//! `r = 1/(1+beta)`:
//!
//! ```text
//! u1 = q + r u2      u2 = r u1 + q u3      u3 = q u2 + r u4      u4 = r u3
//! ```
//!
//! (each step of the embedded chain either resolves at the nearer clock,
//! probability `q`, or moves to the neighbouring state, probability `r`;
//! the structure is mirror-symmetric, so `u2 + u3 = 1`). Solved by direct
//! elimination; the closed-form solution
//! `(2+2b, 2+b, 1+b, 1)/(3+2b)` is kept in the tests as an oracle.

use crate::error::{BarrierError, Result};
use crate::membrane::{MembraneParams, SideState, StartPos};

/// A hitting-probability query: levels `a < 0 < b`, a start in `[a, b]`
/// (membrane side required at 0), membrane parameters.
#[derive(Clone, Copy, Debug)]
pub struct HittingQuery {
    pub a: f64,
    pub b: f64,
    pub start: StartPos,
    pub mp: MembraneParams,
}

impl HittingQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.a < 0.0 && self.b > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(BarrierError::parameter("need finite levels a < 0 < b"));
        }
        self.mp.validate()?;
        let (x, _) = self.start.resolve()?;
        if !(self.a..=self.b).contains(&x) {
            return Err(BarrierError::parameter("start must lie in [a, b]"));
        }
        Ok(())
    }

    fn membrane_values(&self) -> (f64, f64) {
        let d = -self.a * self.mp.beta_minus + self.b * self.mp.beta_plus + 1.0;
        let p_minus = (self.b * self.mp.beta_plus + 1.0) / d;
        let p_plus = self.b * self.mp.beta_plus / d;
        (p_minus, p_plus)
    }
}

/// `P(tau_a < tau_b)` for the hard-membrane process.
pub fn hit_prob_membrane(q: &HittingQuery) -> Result<f64> {
    q.validate()?;
    let (p_minus, p_plus) = q.membrane_values();
    let (x, side) = q.start.resolve()?;
    Ok(match side {
        SideState::Minus => {
            // linear between 1 at a and p_minus at 0-
            (-x + (x - q.a) * p_minus) / (-q.a)
        }
        SideState::Plus => {
            // linear between p_plus at 0+ and 0 at b
            p_plus * (q.b - x) / q.b
        }
    })
}

/// `P(tau_b < tau_a)`, computed from its own closed form (not as
/// `1 - hit_prob_membrane`), so exact complementarity is a checkable
/// property rather than an identity of the code.
pub fn hit_prob_membrane_complement(q: &HittingQuery) -> Result<f64> {
    q.validate()?;
    let d = -q.a * q.mp.beta_minus + q.b * q.mp.beta_plus + 1.0;
    let c_minus = -q.a * q.mp.beta_minus / d;
    let c_plus = (-q.a * q.mp.beta_minus + 1.0) / d;
    let (x, side) = q.start.resolve()?;
    Ok(match side {
        SideState::Minus => c_minus * (x - q.a) / (-q.a),
        SideState::Plus => (x + (q.b - x) * c_plus) / q.b,
    })
}

/// Elastic Brownian motion: reflected BM from 0 killed when its local time
/// at 0 crosses an independent `Exp(beta)` threshold hits `b` before the
/// killing with probability `1/(1 + b beta)`.
pub fn hit_prob_elastic(b: f64, beta: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(BarrierError::parameter("need b > 0"));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(BarrierError::parameter("need beta >= 0, finite"));
    }
    Ok(1.0 / (1.0 + b * beta))
}

/// Limit exit probability at the left boundary of `[-1, 1]` for the
/// symmetric membrane: `(1 + (1-x) beta)/(2 beta + 1)` on the minus side,
/// `(1-x) beta/(2 beta + 1)` on the plus side.
pub fn exit_left_limit(start: StartPos, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(BarrierError::parameter("need beta >= 0, finite"));
    }
    let (x, side) = start.resolve()?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(BarrierError::parameter("x must lie in [-1, 1]"));
    }
    let d = 2.0 * beta + 1.0;
    Ok(match side {
        SideState::Minus => (1.0 + (1.0 - x) * beta) / d,
        SideState::Plus => (1.0 - x) * beta / d,
    })
}

/// Values of the wall-reflected system at the four states
/// `[(-1)+, 0-, 0+, 1-]`: probability that the elastic clock at wall -1
/// rings before the one at wall +1.
///
/// `beta = 0` is a degenerate convention, not a limit: the membrane is
/// impermeable and neither wall clock ever rings, so a path started on the
/// minus side can only ever be resolved at -1. The returned values are
/// `[1, 1, 0, 0]`, which differs from the `beta -> 0+` limit
/// `[2/3, 2/3, 1/3, 1/3]` (where vanishing wall and membrane rates stay in
/// competition).
pub fn reflected_system_solution(beta: f64) -> Result<[f64; 4]> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(BarrierError::parameter("need beta >= 0, finite"));
    }
    if beta == 0.0 {
        return Ok([1.0, 1.0, 0.0, 0.0]);
    }
    let q = beta / (1.0 + beta);
    let r = 1.0 / (1.0 + beta);
    // A u = rhs over [u1, u2, u3, u4]
    let mut m = [
        [1.0, -r, 0.0, 0.0],
        [-r, 1.0, -q, 0.0],
        [0.0, -q, 1.0, -r],
        [0.0, 0.0, -r, 1.0],
    ];
    let mut rhs = [q, 0.0, 0.0, 0.0];
    solve4(&mut m, &mut rhs)?;
    Ok(rhs)
}

/// `P(sigma_{-1} < sigma_{+1})` for the wall-reflected hard-membrane
/// process with symmetric permeability `beta`, from one of the four
/// boundary/membrane states or an interior point (piecewise linear).
pub fn hit_prob_reflected_system(beta: f64, start: StartPos) -> Result<f64> {
    let u = reflected_system_solution(beta)?;
    let (x, side) = start.resolve()?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(BarrierError::parameter("x must lie in [-1, 1]"));
    }
    Ok(match side {
        // linear between u1 at -1 and u2 at 0-
        SideState::Minus => u[0] + (1.0 - x.abs()) * (u[1] - u[0]),
        // linear between u3 at 0+ and u4 at +1
        SideState::Plus => u[2] + x * (u[3] - u[2]),
    })
}

/// Direct Gaussian elimination with partial pivoting on a 4x4 system;
/// overwrites `rhs` with the solution.
fn solve4(m: &mut [[f64; 4]; 4], rhs: &mut [f64; 4]) -> Result<()> {
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[piv][col].abs() < 1e-14 {
            return Err(BarrierError::Internal(
                "singular reflected-boundary system".into(),
            ));
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..4 {
            let w = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= w * m[col][k];
            }
            rhs[row] -= w * rhs[col];
        }
    }
    for row in (0..4).rev() {
        let mut s = rhs[row];
        for k in row + 1..4 {
            s -= m[row][k] * rhs[k];
        }
        rhs[row] = s / m[row][row];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::membrane::{
        mc_exit_probability, MembraneParams, ProcessSpec, SideState, StartPos,
    };
    use crate::rng::SplitMix64;

    fn q(a: f64, b: f64, start: StartPos, bp: f64, bm: f64) -> HittingQuery {
        HittingQuery {
            a,
            b,
            start,
            mp: MembraneParams::new(bp, bm).unwrap(),
        }
    }

    #[test]
    fn membrane_examples() {
        let p = hit_prob_membrane(&q(
            -1.0,
            1.0,
            StartPos::AtMembrane(SideState::Plus),
            1.0,
            1.0,
        ))
        .unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);

        let p = hit_prob_membrane(&q(
            -1.0,
            1.0,
            StartPos::AtMembrane(SideState::Minus),
            0.0,
            0.0,
        ))
        .unwrap();
        assert_eq!(p, 1.0);

        // large symmetric beta: membrane vanishes, BM from 0
        for side in [SideState::Plus, SideState::Minus] {
            let p = hit_prob_membrane(&q(
                -1.0,
                1.0,
                StartPos::AtMembrane(side),
                1e12,
                1e12,
            ))
            .unwrap();
            assert!((p - 0.5).abs() < 1e-11, "{p}");
        }
    }

    #[test]
    fn normalization_for_random_queries() {
        let mut rng = SplitMix64::path_stream(17, 0);
        for _ in 0..100 {
            let a = -(0.1 + 2.0 * rng.uniform());
            let b = 0.1 + 2.0 * rng.uniform();
            let bp = 3.0 * rng.uniform();
            let bm = 3.0 * rng.uniform();
            let x = a + (b - a) * rng.uniform();
            let start = if x == 0.0 {
                StartPos::AtMembrane(SideState::Plus)
            } else {
                StartPos::Interior(x)
            };
            let qq = q(a, b, start, bp, bm);
            let p = hit_prob_membrane(&qq).unwrap();
            let c = hit_prob_membrane_complement(&qq).unwrap();
            assert!((p + c - 1.0).abs() < 1e-14, "p {p} c {c}");
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn monotone_in_start_on_each_side() {
        let mp = (1.7, 0.4);
        let mut last = f64::INFINITY;
        for x in [-0.99, -0.6, -0.3, -1e-9] {
            let p = hit_prob_membrane(&q(-1.0, 2.0, StartPos::Interior(x), mp.0, mp.1)).unwrap();
            assert!(p <= last);
            last = p;
        }
        let mut last = f64::INFINITY;
        for x in [1e-9, 0.5, 1.2, 1.99] {
            let p = hit_prob_membrane(&q(-1.0, 2.0, StartPos::Interior(x), mp.0, mp.1)).unwrap();
            assert!(p <= last);
            last = p;
        }
    }

    #[test]
    fn interface_limits_match_membrane_states() {
        let qq = |s| q(-1.5, 0.8, s, 0.9, 2.1);
        let p_plus0 = hit_prob_membrane(&qq(StartPos::AtMembrane(SideState::Plus))).unwrap();
        let p_minus0 = hit_prob_membrane(&qq(StartPos::AtMembrane(SideState::Minus))).unwrap();
        let p_near_plus = hit_prob_membrane(&qq(StartPos::Interior(1e-13))).unwrap();
        let p_near_minus = hit_prob_membrane(&qq(StartPos::Interior(-1e-13))).unwrap();
        assert!((p_near_plus - p_plus0).abs() < 1e-12);
        assert!((p_near_minus - p_minus0).abs() < 1e-12);
        assert!(p_minus0 > p_plus0, "jump across the membrane");
    }

    #[test]
    fn elastic_examples_and_consistency() {
        assert_eq!(hit_prob_elastic(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(hit_prob_elastic(1.0, 1.0).unwrap(), 0.5);
        assert!((hit_prob_elastic(2.0, 3.0).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        // P_{0-}(tau_a < tau_{0+}) = 1/(1 - a beta_minus) via b = -a
        let a = -1.3;
        let bm = 2.2;
        let via_elastic = hit_prob_elastic(-a, bm).unwrap();
        assert!((via_elastic - 1.0 / (1.0 - a * bm)).abs() < 1e-15);
    }

    #[test]
    fn elastic_mc_cross_check() {
        // reflected BM from 0 with Exp(3) local-time killing reaches b = 2
        // before killing with probability 1/7
        let n = 20_000u64;
        let h = 1e-4f64;
        let sqrt_h = h.sqrt();
        let hits: u64 = (0..n)
            .map(|i| {
                let mut r = SplitMix64::path_stream(301, i);
                let threshold = r.exponential(3.0);
                let (mut x, mut l) = (0.0f64, 0.0f64);
                loop {
                    let prop = x + sqrt_h * r.normal();
                    if prop < 0.0 {
                        l += -2.0 * prop;
                    }
                    x = prop.abs();
                    if l >= threshold {
                        break false;
                    }
                    if x >= 2.0 {
                        break true;
                    }
                }
            })
            .map(u64::from)
            .sum();
        let p = hits as f64 / n as f64;
        let target = 1.0 / 7.0;
        let se = (target * (1.0 - target) / n as f64).sqrt();
        assert!((p - target).abs() < 3.0 * se + 0.012, "{p} vs {target}");
    }

    #[test]
    fn exit_left_examples() {
        assert_eq!(exit_left_limit(StartPos::Interior(-1.0), 0.7).unwrap(), 1.0);
        assert!(
            (exit_left_limit(StartPos::Interior(0.5), 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15
        );
        assert!(
            (exit_left_limit(StartPos::Interior(-0.5), 1.0).unwrap() - 5.0 / 6.0).abs() < 1e-15
        );
        // jump across 0 equals 1/(2 beta + 1)
        for beta in [0.3, 1.0, 4.0] {
            let below = exit_left_limit(StartPos::AtMembrane(SideState::Minus), beta).unwrap();
            let above = exit_left_limit(StartPos::AtMembrane(SideState::Plus), beta).unwrap();
            assert!((below - above - 1.0 / (2.0 * beta + 1.0)).abs() < 1e-14);
        }
        // consistency with the general membrane formula on [-1, 1]
        for x in [-0.8, -0.2, 0.3, 0.9] {
            let beta = 1.4;
            let via_membrane =
                hit_prob_membrane(&q(-1.0, 1.0, StartPos::Interior(x), beta, beta)).unwrap();
            let direct = exit_left_limit(StartPos::Interior(x), beta).unwrap();
            assert!((via_membrane - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn reflected_system_closed_form() {
        for beta in [0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
            let u = reflected_system_solution(beta).unwrap();
            let d = 3.0 + 2.0 * beta;
            let expect = [
                (2.0 + 2.0 * beta) / d,
                (2.0 + beta) / d,
                (1.0 + beta) / d,
                1.0 / d,
            ];
            for k in 0..4 {
                assert!((u[k] - expect[k]).abs() < 1e-13, "beta {beta} u{k}");
            }
            // mirror symmetry
            assert!((u[1] + u[2] - 1.0).abs() < 1e-13);
            assert!((u[0] + u[3] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn reflected_system_beta_zero_convention() {
        let u = reflected_system_solution(0.0).unwrap();
        assert_eq!(u, [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(
            hit_prob_reflected_system(0.0, StartPos::AtMembrane(SideState::Minus)).unwrap(),
            1.0
        );
    }

    #[test]
    fn reflected_system_degenerates_to_absorbing_walls() {
        // pin the wall states to absorbing values (u1 = 1, u4 = 0): the two
        // membrane rows then reproduce the plain hitting formulas
        for i in 1..=10 {
            let beta = 0.4 * i as f64;
            let q_c = beta / (1.0 + beta);
            let r = 1.0 / (1.0 + beta);
            let mut m = [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, -q_c, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ];
            // u2 = r*1 + q u3 ; u3 = q u2 + r*0
            m[1][0] = -r;
            m[2][1] = -q_c;
            let mut rhs = [1.0, 0.0, 0.0, 0.0];
            super::solve4(&mut m, &mut rhs).unwrap();
            let p_minus = (beta + 1.0) / (2.0 * beta + 1.0);
            let p_plus = beta / (2.0 * beta + 1.0);
            assert!((rhs[1] - p_minus).abs() < 1e-13, "beta {beta}");
            assert!((rhs[2] - p_plus).abs() < 1e-13, "beta {beta}");
        }
    }

    #[test]
    fn reflected_interior_interpolation() {
        let beta = 1.0;
        let u = reflected_system_solution(beta).unwrap();
        let mid_plus = hit_prob_reflected_system(beta, StartPos::Interior(0.5)).unwrap();
        assert!((mid_plus - 0.5 * (u[2] + u[3])).abs() < 1e-15);
        let mid_minus = hit_prob_reflected_system(beta, StartPos::Interior(-0.5)).unwrap();
        assert!((mid_minus - 0.5 * (u[0] + u[1])).abs() < 1e-15);
    }

    #[test]
    fn reflected_system_matches_monte_carlo() {
        let beta = 1.0;
        let mp = MembraneParams::symmetric(beta).unwrap();
        let s = mc_exit_probability(
            ProcessSpec::SnobReflectedElastic(mp),
            -1.0,
            1.0,
            StartPos::AtMembrane(SideState::Plus),
            20_000,
            1e-4,
            555,
        )
        .unwrap();
        let target =
            hit_prob_reflected_system(beta, StartPos::AtMembrane(SideState::Plus)).unwrap();
        assert!((target - 0.4).abs() < 1e-14);
        assert!(
            (s.estimate - target).abs() < 3.0 * s.std_error + 0.012,
            "{} vs {target}",
            s.estimate
        );
    }
}
