//! Path simulation of reflected Brownian motion and of the snapping-out
//! ("hard membrane") Brownian motion, plus Monte Carlo hitting estimators.
//!
//! The process lives on two glued half-lines: a reflected Brownian motion on
//! the current side accumulates symmetric local time at 0, and when the
//! local time gained since the last switch crosses an independent
//! exponential threshold `Exp(beta_side)` the path is reborn at 0 on the
//! opposite side. `beta = 0` encodes a side the membrane is non-permeable
//! from (the threshold never rings).
//!
//! Numerical scheme, per step of size `h`: propose `y' = y + sqrt(h) xi` in
//! the current side's folded coordinate, reflect (`|y'|`, local-time
//! increment `2 max(0, -y')` — the mirror push is twice the overshoot, and
//! the symmetric local time is what the exponential thresholds are measured
//! in), then compare against the threshold. The folded
//! proposal chain has exactly the law of `|random walk|`, so endpoint
//! marginals of reflected paths are unbiased; local time and hitting
//! estimates carry the usual `O(sqrt(h))` scheme bias, controlled in tests
//! by step halving. In the wall-reflected variant the wall bounce is
//! processed before the membrane threshold comparison; this ordering is
//! recorded in output metadata.

use crate::error::{BarrierError, Result};
use crate::rng::SplitMix64;
use rayon::prelude::*;

/// Membrane orientation: the `+0` / `-0` state of the two-half-line picture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideState {
    Plus,
    Minus,
}

impl SideState {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            SideState::Plus => 1.0,
            SideState::Minus => -1.0,
        }
    }
    pub fn flip(self) -> Self {
        match self {
            SideState::Plus => SideState::Minus,
            SideState::Minus => SideState::Plus,
        }
    }
}

/// Permeability parameters of the membrane at 0.
#[derive(Clone, Copy, Debug)]
pub struct MembraneParams {
    pub beta_plus: f64,
    pub beta_minus: f64,
}

impl MembraneParams {
    pub fn new(beta_plus: f64, beta_minus: f64) -> Result<Self> {
        let mp = MembraneParams {
            beta_plus,
            beta_minus,
        };
        mp.validate()?;
        Ok(mp)
    }
    pub fn symmetric(beta: f64) -> Result<Self> {
        Self::new(beta, beta)
    }
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta_plus", self.beta_plus), ("beta_minus", self.beta_minus)] {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(BarrierError::parameter(format!(
                    "{name} must be finite and >= 0 (got {b})"
                )));
            }
        }
        Ok(())
    }
    #[inline]
    pub fn beta(&self, side: SideState) -> f64 {
        match side {
            SideState::Plus => self.beta_plus,
            SideState::Minus => self.beta_minus,
        }
    }
}

/// Starting point: an interior position or one of the two membrane states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StartPos {
    Interior(f64),
    AtMembrane(SideState),
}

impl StartPos {
    /// Position and side; `Interior(0.0)` is rejected as ambiguous.
    pub fn resolve(self) -> Result<(f64, SideState)> {
        match self {
            StartPos::Interior(x) if x > 0.0 => Ok((x, SideState::Plus)),
            StartPos::Interior(x) if x < 0.0 => Ok((x, SideState::Minus)),
            StartPos::Interior(_) => Err(BarrierError::parameter(
                "start position 0 is ambiguous; specify the membrane side (+0 or -0)",
            )),
            StartPos::AtMembrane(s) => Ok((0.0, s)),
        }
    }

    /// Parse `"<float>"`, `"+0"` or `"-0"`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "+0" => Ok(StartPos::AtMembrane(SideState::Plus)),
            "-0" => Ok(StartPos::AtMembrane(SideState::Minus)),
            other => {
                let x: f64 = other.parse().map_err(|_| {
                    BarrierError::parameter(format!(
                        "cannot parse start position `{other}` (expected a float, `+0` or `-0`)"
                    ))
                })?;
                if x == 0.0 {
                    return Err(BarrierError::parameter(
                        "start position 0 is ambiguous; use `+0` or `-0`",
                    ));
                }
                Ok(StartPos::Interior(x))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExitRecord {
    pub time: f64,
    pub boundary: f64,
}

/// A fully recorded sample path.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Accumulated symmetric local time at 0.
    pub local_time: Vec<f64>,
    pub side_trace: Vec<SideState>,
    /// Accumulated local time at the walls -1 and +1 (zero unless the
    /// wall-reflected variant produced the path).
    pub wall_local_time_minus: Vec<f64>,
    pub wall_local_time_plus: Vec<f64>,
    pub exit: Option<ExitRecord>,
}

impl PathSample {
    fn with_capacity(n: usize) -> Self {
        PathSample {
            times: Vec::with_capacity(n),
            positions: Vec::with_capacity(n),
            local_time: Vec::with_capacity(n),
            side_trace: Vec::with_capacity(n),
            wall_local_time_minus: Vec::with_capacity(n),
            wall_local_time_plus: Vec::with_capacity(n),
            exit: None,
        }
    }
    fn push(&mut self, t: f64, x: f64, l: f64, s: SideState, lw_m: f64, lw_p: f64) {
        self.times.push(t);
        self.positions.push(x);
        self.local_time.push(l);
        self.side_trace.push(s);
        self.wall_local_time_minus.push(lw_m);
        self.wall_local_time_plus.push(lw_p);
    }
}

/// Monte Carlo summary with reproducibility metadata.
#[derive(Clone, Copy, Debug)]
pub struct MCSummary {
    pub n_paths: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub seed: u64,
    pub step: f64,
}

impl MCSummary {
    fn from_frequency(hits: u64, n_paths: u64, seed: u64, step: f64) -> Self {
        let p = hits as f64 / n_paths as f64;
        let se = (p * (1.0 - p) / n_paths as f64).sqrt();
        MCSummary {
            n_paths,
            estimate: p,
            std_error: se,
            ci95: (p - 1.96 * se, p + 1.96 * se),
            seed,
            step,
        }
    }
}

fn check_step(h: f64, t_max: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(BarrierError::parameter("step h must be positive and finite"));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(BarrierError::parameter("t_max must be positive and finite"));
    }
    Ok(())
}

/// Reflected Brownian motion on `[0, inf)` started at `x0`.
pub fn simulate_reflected_bm(
    x0: f64,
    h: f64,
    t_max: f64,
    rng: &mut SplitMix64,
) -> Result<PathSample> {
    check_step(h, t_max)?;
    if !(x0 >= 0.0) {
        return Err(BarrierError::parameter("x0 must be >= 0"));
    }
    let n = (t_max / h).ceil() as usize;
    let sqrt_h = h.sqrt();
    let mut path = PathSample::with_capacity(n + 1);
    let (mut x, mut l) = (x0, 0.0);
    path.push(0.0, x, l, SideState::Plus, 0.0, 0.0);
    for k in 1..=n {
        let prop = x + sqrt_h * rng.normal();
        if prop < 0.0 {
            l += -2.0 * prop;
        }
        x = prop.abs();
        path.push(k as f64 * h, x, l, SideState::Plus, 0.0, 0.0);
    }
    Ok(path)
}

/// Snapping-out Brownian motion on the glued half-lines (no walls).
pub fn simulate_snob(
    start: StartPos,
    mp: &MembraneParams,
    h: f64,
    t_max: f64,
    rng: &mut SplitMix64,
) -> Result<PathSample> {
    check_step(h, t_max)?;
    mp.validate()?;
    let (x0, mut side) = start.resolve()?;
    let n = (t_max / h).ceil() as usize;
    let sqrt_h = h.sqrt();
    let mut path = PathSample::with_capacity(n + 1);
    let mut y = x0.abs();
    let mut l = 0.0;
    let mut threshold = l + rng.exponential(mp.beta(side));
    path.push(0.0, side.sign() * y, l, side, 0.0, 0.0);
    for k in 1..=n {
        let prop = y + sqrt_h * rng.normal();
        if prop < 0.0 {
            l += -2.0 * prop;
        }
        y = prop.abs();
        if l >= threshold {
            side = side.flip();
            y = 0.0;
            threshold = l + rng.exponential(mp.beta(side));
        }
        path.push(k as f64 * h, side.sign() * y, l, side, 0.0, 0.0);
    }
    Ok(path)
}

/// Snapping-out Brownian motion on `[-1, 1]` with reflecting walls at the
/// endpoints; wall local times are accumulated per wall. Wall reflection is
/// processed before the membrane threshold comparison within each step.
pub fn simulate_snob_reflected(
    start: StartPos,
    mp: &MembraneParams,
    h: f64,
    t_max: f64,
    rng: &mut SplitMix64,
) -> Result<PathSample> {
    check_step(h, t_max)?;
    mp.validate()?;
    let (x0, mut side) = start.resolve()?;
    if !(-1.0..=1.0).contains(&x0) {
        return Err(BarrierError::parameter("x0 must lie in [-1, 1]"));
    }
    let n = (t_max / h).ceil() as usize;
    let sqrt_h = h.sqrt();
    let mut path = PathSample::with_capacity(n + 1);
    let mut y = x0.abs();
    let (mut l, mut lw_m, mut lw_p) = (0.0, 0.0, 0.0);
    let mut threshold = l + rng.exponential(mp.beta(side));
    path.push(0.0, side.sign() * y, l, side, lw_m, lw_p);
    for k in 1..=n {
        let mut prop = y + sqrt_h * rng.normal();
        // wall bounce first (the wall of the current side sits at |x| = 1)
        if prop > 1.0 {
            let overshoot = prop - 1.0;
            match side {
                SideState::Plus => lw_p += 2.0 * overshoot,
                SideState::Minus => lw_m += 2.0 * overshoot,
            }
            prop = 2.0 - prop;
        }
        if prop < 0.0 {
            l += -2.0 * prop;
        }
        y = prop.abs();
        if l >= threshold {
            side = side.flip();
            y = 0.0;
            threshold = l + rng.exponential(mp.beta(side));
        }
        path.push(k as f64 * h, side.sign() * y, l, side, lw_m, lw_p);
    }
    Ok(path)
}

/// Which process the Monte Carlo estimator simulates.
#[derive(Clone, Copy, Debug)]
pub enum ProcessSpec {
    /// Plain Brownian motion (no membrane); `a < b` suffices.
    PureBm,
    /// Snapping-out BM; event is hitting `a` before `b`.
    Snob(MembraneParams),
    /// Wall-reflected snapping-out BM on `[-1, 1]` with elastic walls: the
    /// event is the wall local time at -1 crossing its `Exp(beta_minus)`
    /// threshold before the one at +1 crosses its `Exp(beta_plus)`
    /// threshold.
    SnobReflectedElastic(MembraneParams),
}

/// Paths that exceed this many multiples of `(b-a)^2 / h` steps are
/// abandoned and count as "did not hit `a`"; the probability of reaching the
/// cap is astronomically small for the processes simulated here.
const STEP_CAP_FACTOR: f64 = 400.0;

/// Monte Carlo estimate of `P(tau_a < tau_b)` (or of the elastic-wall event
/// for `SnobReflectedElastic`). Deterministic in `(master_seed, n_paths, h)`
/// for any worker count.
pub fn mc_exit_probability(
    spec: ProcessSpec,
    a: f64,
    b: f64,
    start: StartPos,
    n_paths: u64,
    h: f64,
    master_seed: u64,
) -> Result<MCSummary> {
    if !(a < b) {
        return Err(BarrierError::parameter("need a < b"));
    }
    if n_paths == 0 {
        return Err(BarrierError::parameter("n_paths must be >= 1"));
    }
    let (x0, _) = match (spec, start) {
        (ProcessSpec::PureBm, StartPos::Interior(x)) => (x, SideState::Plus),
        (ProcessSpec::PureBm, StartPos::AtMembrane(s)) => (0.0, s),
        _ => start.resolve()?,
    };
    if !(a..=b).contains(&x0) {
        return Err(BarrierError::parameter("x0 must lie in [a, b]"));
    }
    match spec {
        ProcessSpec::PureBm => {}
        ProcessSpec::Snob(mp) => {
            mp.validate()?;
            if !(a < 0.0 && b > 0.0) {
                return Err(BarrierError::parameter("membrane runs need a < 0 < b"));
            }
        }
        ProcessSpec::SnobReflectedElastic(mp) => {
            mp.validate()?;
            if a != -1.0 || b != 1.0 {
                return Err(BarrierError::parameter(
                    "the wall-reflected process is defined on [-1, 1]; pass a = -1, b = 1",
                ));
            }
        }
    }
    // membrane runs must resolve both levels from 0; plain BM only needs to
    // resolve the interval itself (a = 0 is legal there)
    let scale = match spec {
        ProcessSpec::PureBm => (b - a) / 2.0,
        _ => a.abs().min(b),
    };
    let h_cap = (scale / 10.0) * (scale / 10.0);
    if h > h_cap {
        return Err(BarrierError::parameter(format!(
            "step h = {h} too coarse for levels (a, b) = ({a}, {b}); use h <= {h_cap:.3e} \
             (a tenth of the nearest level, squared)"
        )));
    }
    let max_steps = (STEP_CAP_FACTOR * (b - a) * (b - a) / h).ceil() as u64;

    let hits: u64 = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::path_stream(master_seed, i);
            let hit = match spec {
                ProcessSpec::PureBm => one_path_pure_bm(x0, a, b, h, max_steps, &mut rng),
                ProcessSpec::Snob(mp) => one_path_snob(start, &mp, a, b, h, max_steps, &mut rng),
                ProcessSpec::SnobReflectedElastic(mp) => {
                    one_path_reflected_elastic(start, &mp, h, max_steps, &mut rng)
                }
            };
            hit as u64
        })
        .sum();
    Ok(MCSummary::from_frequency(hits, n_paths, master_seed, h))
}

fn one_path_pure_bm(x0: f64, a: f64, b: f64, h: f64, max_steps: u64, rng: &mut SplitMix64) -> bool {
    let sqrt_h = h.sqrt();
    let mut x = x0;
    for _ in 0..max_steps {
        x += sqrt_h * rng.normal();
        if x <= a {
            return true;
        }
        if x >= b {
            return false;
        }
    }
    false
}

fn one_path_snob(
    start: StartPos,
    mp: &MembraneParams,
    a: f64,
    b: f64,
    h: f64,
    max_steps: u64,
    rng: &mut SplitMix64,
) -> bool {
    let (x0, mut side) = start.resolve().expect("validated by caller");
    let sqrt_h = h.sqrt();
    let mut y = x0.abs();
    let mut l = 0.0;
    let mut threshold = rng.exponential(mp.beta(side));
    for _ in 0..max_steps {
        let prop = y + sqrt_h * rng.normal();
        if prop < 0.0 {
            l += -2.0 * prop;
        }
        y = prop.abs();
        match side {
            SideState::Plus => {
                if y >= b {
                    return false;
                }
            }
            SideState::Minus => {
                if y >= -a {
                    return true;
                }
            }
        }
        if l >= threshold {
            side = side.flip();
            y = 0.0;
            threshold = l + rng.exponential(mp.beta(side));
        }
    }
    false
}

fn one_path_reflected_elastic(
    start: StartPos,
    mp: &MembraneParams,
    h: f64,
    max_steps: u64,
    rng: &mut SplitMix64,
) -> bool {
    let (x0, mut side) = start.resolve().expect("validated by caller");
    let sqrt_h = h.sqrt();
    let mut y = x0.abs();
    let (mut l, mut lw_m, mut lw_p) = (0.0, 0.0, 0.0);
    let mut threshold = rng.exponential(mp.beta(side));
    let wall_threshold_m = rng.exponential(mp.beta_minus);
    let wall_threshold_p = rng.exponential(mp.beta_plus);
    for _ in 0..max_steps {
        let mut prop = y + sqrt_h * rng.normal();
        if prop > 1.0 {
            let overshoot = prop - 1.0;
            match side {
                SideState::Plus => {
                    lw_p += 2.0 * overshoot;
                    if lw_p >= wall_threshold_p {
                        return false;
                    }
                }
                SideState::Minus => {
                    lw_m += 2.0 * overshoot;
                    if lw_m >= wall_threshold_m {
                        return true;
                    }
                }
            }
            prop = 2.0 - prop;
        }
        if prop < 0.0 {
            l += -2.0 * prop;
        }
        y = prop.abs();
        if l >= threshold {
            side = side.flip();
            y = 0.0;
            threshold = l + rng.exponential(mp.beta(side));
        }
    }
    false
}

/// Mean number of membrane side switches before exiting `[-1, 1]`, starting
/// from `+0`, estimated by Monte Carlo.
pub fn mc_mean_switches(
    mp: &MembraneParams,
    n_paths: u64,
    h: f64,
    master_seed: u64,
) -> Result<f64> {
    mp.validate()?;
    if n_paths == 0 {
        return Err(BarrierError::parameter("n_paths must be >= 1"));
    }
    let max_steps = (STEP_CAP_FACTOR * 4.0 / h).ceil() as u64;
    let sqrt_h = h.sqrt();
    let total: f64 = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::path_stream(master_seed, i);
            let mut side = SideState::Plus;
            let mut y = 0.0f64;
            let mut l = 0.0;
            let mut threshold = rng.exponential(mp.beta(side));
            let mut switches = 0u64;
            for _ in 0..max_steps {
                let prop = y + sqrt_h * rng.normal();
                if prop < 0.0 {
                    l += -2.0 * prop;
                }
                y = prop.abs();
                if y >= 1.0 {
                    break;
                }
                if l >= threshold {
                    side = side.flip();
                    y = 0.0;
                    threshold = l + rng.exponential(mp.beta(side));
                    switches += 1;
                }
            }
            switches as f64
        })
        .sum();
    Ok(total / n_paths as f64)
}

/// Brute-force discrete oracle: nearest-neighbor walk on the grid
/// `{-1, ..., -delta, +delta, ..., 1}` with the membrane rule "an attempted
/// crossing of 0 succeeds with probability beta * delta, otherwise the
/// walker stays put". Returns exact absorption probabilities and the exact
/// expected number of successful crossings before absorption at the
/// endpoints, both by a tridiagonal linear solve.
#[derive(Clone, Copy, Debug)]
pub struct DiscreteMembraneOracle {
    /// P(absorbed at -1 before +1) starting adjacent to 0 on the plus side.
    pub p_left_from_plus: f64,
    /// Same, starting adjacent to 0 on the minus side.
    pub p_left_from_minus: f64,
    /// Expected crossings starting adjacent to 0 on the plus side.
    pub mean_switches_from_plus: f64,
}

pub fn discrete_membrane_oracle(mp: &MembraneParams, delta: f64) -> Result<DiscreteMembraneOracle> {
    mp.validate()?;
    if !(delta > 0.0 && delta < 0.5) {
        return Err(BarrierError::parameter("delta must lie in (0, 1/2)"));
    }
    let m = (1.0 / delta).round() as usize;
    if m < 2 || m > 10_000 {
        return Err(BarrierError::parameter("1/delta must be an integer in [2, 1e4]"));
    }
    let q_plus = mp.beta_plus * delta;
    let q_minus = mp.beta_minus * delta;
    if q_plus > 1.0 || q_minus > 1.0 {
        return Err(BarrierError::parameter(
            "beta * delta must not exceed 1 for the discrete crossing rule",
        ));
    }
    // interior states, ordered: -1+delta, ..., -delta, +delta, ..., 1-delta
    let n = 2 * (m - 1);
    let idx_minus = m - 2; // state -delta
    let idx_plus = m - 1; // state +delta

    // transition structure: from a generic interior state, 1/2 each way.
    // From +delta: 1/2 to +2delta; 1/2 attempt crossing: with q_plus jump to
    // -delta (counts as a switch), else stay. Mirrored at -delta. Absorbing
    // at the endpoints.
    //
    // Absorption probability u_i = P(hit -1 first):
    //   generic: u_i = (u_{i-1} + u_{i+1})/2
    //   at +delta: u = 1/2 u_{+2d} + 1/2 [q+ u_{-d} + (1-q+) u_{+d}]
    //   boundary: u(-1) = 1, u(+1) = 0.
    // Expected switches s_i adds a source q/2 at the membrane rows.
    let solve = |source_left: f64, count_crossings: bool| -> Vec<f64> {
        // tridiagonal system A u = rhs in the interior ordering above
        let mut sub = vec![0.0f64; n];
        let mut diag = vec![0.0f64; n];
        let mut sup = vec![0.0f64; n];
        let mut rhs = vec![0.0f64; n];
        for i in 0..n {
            diag[i] = 1.0;
            if i == idx_minus {
                // -delta: left neighbor -2delta, "right" neighbor +delta via crossing
                sub[i] = -0.5;
                sup[i] = -0.5 * q_minus;
                diag[i] -= 0.5 * (1.0 - q_minus);
                if count_crossings {
                    rhs[i] += 0.5 * q_minus;
                }
            } else if i == idx_plus {
                sup[i] = -0.5;
                sub[i] = -0.5 * q_plus;
                diag[i] -= 0.5 * (1.0 - q_plus);
                if count_crossings {
                    rhs[i] += 0.5 * q_plus;
                }
            } else {
                if i > 0 {
                    sub[i] = -0.5;
                }
                if i + 1 < n {
                    sup[i] = -0.5;
                }
            }
        }
        // absorbing boundaries: left endpoint contributes source_left at row 0
        rhs[0] += 0.5 * source_left;
        // right endpoint contributes 0 in both problems
        // Thomas elimination
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut u = vec![0.0f64; n];
        u[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = (rhs[i] - sup[i] * u[i + 1]) / diag[i];
        }
        u
    };

    let absorb = solve(1.0, false);
    let switches = solve(0.0, true);
    Ok(DiscreteMembraneOracle {
        p_left_from_plus: absorb[idx_plus],
        p_left_from_minus: absorb[idx_minus],
        mean_switches_from_plus: switches[idx_plus],
    })
}
