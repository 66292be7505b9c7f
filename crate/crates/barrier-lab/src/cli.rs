//! Command-line front end: configuration files, subcommands, run manifests,
//! and atomic persistence of results.
//!
//! Exit codes: 0 success, 2 parameter/usage error, 3 numeric failure. All
//! floating output carries 17 significant digits so files round-trip to the
//! exact binary values. File outputs are written to a temporary sibling and
//! renamed into place; each output directory receives one `manifest.json`
//! recording the command line, resolved configuration, seed, and SHA-256
//! digests of the emitted files.

use crate::analytic1d::{flux_shape, stationary_profile_shape};
use crate::coefficients::{CutoffProfile, ModelParams, ProfileKind, Shape, TabulatedChi};
use crate::error::{BarrierError, Result};
use crate::hitting::{
    hit_prob_membrane, hit_prob_membrane_complement, hit_prob_reflected_system, HittingQuery,
};
use crate::limits::{
    beta_limit, classify_regime, key_identity_curve, p_plus_small_alpha_exact_limit, Regime,
};
use crate::membrane::{mc_exit_probability, MembraneParams, ProcessSpec, StartPos};
use crate::pde2d::{assemble, column_fluxes, solve_steady, step_transient, Field2D};
use crate::sdepath::{
    exit_prob_exact_shape, feynman_kac_shape, mc_exit_left_xeps_shape, mc_exit_left_xtilde_shape,
};
use crate::spectral::{build_index_set, covariance_diagonal, remainder_bound};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Default master seed; every stochastic output embeds the seed in use.
pub const DEFAULT_SEED: u64 = 7_041_776;

// ---------------------------------------------------------------------------
// configuration files

/// Barrier profile selected by a config file or flag.
#[derive(Clone, Debug, PartialEq)]
pub enum ProfileChoice {
    Piecewise,
    PiecewiseBare,
    Arctan,
    Quadratic,
    Constant(f64),
    /// Two-column CSV (x, chi) with a header row; bare cutoff (no wall
    /// layers), evaluated at |x|.
    Tabulated(PathBuf),
}

impl ProfileChoice {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "piecewise" => Ok(ProfileChoice::Piecewise),
            "piecewise-bare" => Ok(ProfileChoice::PiecewiseBare),
            "arctan" => Ok(ProfileChoice::Arctan),
            "quadratic" => Ok(ProfileChoice::Quadratic),
            other => Err(BarrierError::parameter(format!(
                "unknown profile '{other}' (expected piecewise, piecewise-bare, arctan, quadratic, or constant via 'chibar = <value>')"
            ))),
        }
    }

    fn name(&self) -> String {
        match self {
            ProfileChoice::Piecewise => "piecewise".into(),
            ProfileChoice::PiecewiseBare => "piecewise-bare".into(),
            ProfileChoice::Arctan => "arctan".into(),
            ProfileChoice::Quadratic => "quadratic".into(),
            ProfileChoice::Constant(c) => format!("constant({})", fmt17(*c)),
            ProfileChoice::Tabulated(p) => format!("tabulated({})", p.display()),
        }
    }
}

/// Load a tabulated cutoff from two-column CSV `(x, chi)` with a header row;
/// `#` comment lines are skipped.
fn load_tabulated(path: &Path) -> Result<CutoffProfile> {
    let text = std::fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut header_seen = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true; // first non-comment line is the header
            continue;
        }
        let mut cols = line.split(',');
        let bad = || {
            BarrierError::parameter(format!(
                "{}:{}: expected two numeric columns (x, chi)",
                path.display(),
                lineno + 1
            ))
        };
        let x: f64 = cols.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let y: f64 = cols.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        xs.push(x);
        ys.push(y);
    }
    Ok(CutoffProfile {
        kind: ProfileKind::Tabulated(TabulatedChi::new(xs, ys)?),
        includes_boundary_layers: false,
    })
}

/// Validated parameter bundle resolved from a config file plus overrides.
#[derive(Clone, Debug)]
pub struct Config {
    pub params: ModelParams,
    pub profile: ProfileChoice,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            params: ModelParams::with_scaling_law(0.01, 0.1, 1.0, 1.0, 2.0),
            profile: ProfileChoice::Piecewise,
            seed: DEFAULT_SEED,
        }
    }
}

impl Config {
    pub fn shape(&self) -> Result<Shape> {
        self.validate()?;
        match &self.profile {
            ProfileChoice::Piecewise => Shape::new(self.params, CutoffProfile::piecewise_power()),
            ProfileChoice::PiecewiseBare => {
                Shape::new(self.params, CutoffProfile::piecewise_power_bare())
            }
            ProfileChoice::Arctan => Shape::new(self.params, CutoffProfile::arctan_example()),
            ProfileChoice::Quadratic => Ok(Shape::quadratic_model(self.params)),
            ProfileChoice::Constant(c) => Ok(Shape::constant(self.params, *c)),
            ProfileChoice::Tabulated(p) => Shape::new(self.params, load_tabulated(p)?),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        // the piecewise-power family puts its wall cutoffs at |x -+ 1| < 2 eps
        // and the crossing asymptotics need [0, 4 eps] clear of them
        if matches!(self.profile, ProfileChoice::Piecewise) && self.params.eps >= 0.125 {
            return Err(BarrierError::parameter(format!(
                "separation violation: the piecewise-power profile requires eps < 1/8 so the barrier and wall layers stay disjoint, got eps = {}",
                self.params.eps
            )));
        }
        Ok(())
    }

    /// Resolved `key = value` snapshot (deterministic order).
    pub fn snapshot(&self) -> Vec<(String, String)> {
        vec![
            ("eps".into(), fmt17(self.params.eps)),
            ("kappa_eps".into(), fmt17(self.params.kappa_eps)),
            ("kappa_t".into(), fmt17(self.params.kappa_t)),
            ("alpha".into(), fmt17(self.params.alpha)),
            ("k".into(), fmt17(self.params.k_scale)),
            ("t_plus".into(), fmt17(self.params.t_plus)),
            ("profile".into(), self.profile.name()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// Parse a `key = value` config file; `#` starts a comment, blank lines are
/// skipped, unknown keys are errors (no silent typos).
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Config> {
    let mut eps = 0.01f64;
    let mut kappa_t = 0.1f64;
    let mut kappa_eps: Option<f64> = None;
    let mut alpha = 1.0f64;
    let mut k_scale = 1.0f64;
    let mut t_plus = 2.0f64;
    let mut scaling_auto = true;
    let mut profile = ProfileChoice::Piecewise;
    let mut chibar: Option<f64> = None;
    let mut seed = DEFAULT_SEED;

    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            BarrierError::parameter(format!(
                "config line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| {
                BarrierError::parameter(format!(
                    "config line {}: '{v}' is not a number",
                    lineno + 1
                ))
            })
        };
        match key {
            "eps" => eps = num(value)?,
            "kappa_t" => kappa_t = num(value)?,
            "kappa_eps" => kappa_eps = Some(num(value)?),
            "alpha" => alpha = num(value)?,
            "k" => k_scale = num(value)?,
            "t_plus" => t_plus = num(value)?,
            "chibar" => chibar = Some(num(value)?),
            "scaling" => {
                scaling_auto = match value {
                    "auto" => true,
                    "explicit" => false,
                    other => {
                        return Err(BarrierError::parameter(format!(
                            "config line {}: scaling must be auto or explicit, got '{other}'",
                            lineno + 1
                        )))
                    }
                }
            }
            "profile" => profile = ProfileChoice::parse(value)?,
            "profile_table" => profile = ProfileChoice::Tabulated(PathBuf::from(value)),
            "seed" => {
                seed = value.parse::<u64>().map_err(|_| {
                    BarrierError::parameter(format!(
                        "config line {}: seed must be a nonnegative integer",
                        lineno + 1
                    ))
                })?
            }
            other => {
                return Err(BarrierError::parameter(format!(
                    "config line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }

    if let Some(c) = chibar {
        profile = ProfileChoice::Constant(c);
    }
    let kappa_eps = match (scaling_auto, kappa_eps) {
        (true, None) => (k_scale * eps).powi(2) * kappa_t,
        (true, Some(_)) => {
            return Err(BarrierError::parameter(
                "kappa_eps conflicts with scaling = auto; set scaling = explicit",
            ))
        }
        (false, Some(v)) => v,
        (false, None) => {
            return Err(BarrierError::parameter(
                "scaling = explicit requires kappa_eps",
            ))
        }
    };
    let cfg = Config {
        params: ModelParams {
            eps,
            kappa_eps,
            kappa_t,
            alpha,
            k_scale,
            t_plus,
        },
        profile,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// output plumbing

/// 17 significant digits: round-trips every finite f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let d = h.finalize();
    let mut s = String::with_capacity(64);
    for b in d {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Write-temp-then-rename so readers never observe a partial file.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV with `#` metadata comment lines before the header row.
pub struct CsvDoc {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// One emitted artifact: path plus content digest.
struct Output {
    path: PathBuf,
    digest: String,
}

fn emit(path: &Path, contents: &str) -> Result<Output> {
    atomic_write(path, contents.as_bytes())?;
    Ok(Output {
        path: path.to_path_buf(),
        digest: sha256_hex(contents.as_bytes()),
    })
}

/// Write `manifest.json` next to the outputs. The timestamp is the only
/// field that varies between identical runs.
fn write_manifest(
    dir: &Path,
    argv: &[String],
    config: &Config,
    outputs: &[Output],
) -> Result<()> {
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let cfg: serde_json::Map<String, serde_json::Value> = config
        .snapshot()
        .into_iter()
        .map(|(k, v)| (k, serde_json::Value::String(v)))
        .collect();
    let files: Vec<serde_json::Value> = outputs
        .iter()
        .map(|o| {
            serde_json::json!({
                "path": o.path.file_name().and_then(|n| n.to_str()).unwrap_or(""),
                "sha256": o.digest,
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "tool": "barrier-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": argv,
        "config": cfg,
        "seed": config.seed,
        "unix_time": ts,
        "outputs": files,
    });
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| {
        BarrierError::Internal(format!("manifest serialization failed: {e}"))
    })?;
    atomic_write(&dir.join("manifest.json"), body.as_bytes())
}

fn out_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."))
}

// ---------------------------------------------------------------------------
// argument surface

#[derive(Parser, Debug)]
#[command(
    name = "barrier-lab",
    version,
    about = "Transport-barrier laboratory: profiles, fluxes, membrane hitting laws, SDE and PDE cross-checks"
)]
struct CliArgs {
    /// Worker-thread cap (falls back to BARRIER_LAB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct ConfigOpts {
    /// Path to a `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the barrier half-scale eps.
    #[arg(long)]
    eps: Option<f64>,
    /// Override the cutoff power alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the scaling constant K.
    #[arg(long, value_name = "K")]
    k: Option<f64>,
    /// Override kappa_T.
    #[arg(long)]
    kappa_t: Option<f64>,
    /// Override T_plus.
    #[arg(long)]
    t_plus: Option<f64>,
    /// Override the profile (piecewise, piecewise-bare, arctan, quadratic).
    #[arg(long)]
    profile: Option<String>,
    /// Master seed for stochastic subcommands.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigOpts {
    fn resolve(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => Config::default(),
        };
        let rescale = self.eps.is_some() || self.k.is_some() || self.kappa_t.is_some();
        if let Some(v) = self.eps {
            cfg.params.eps = v;
        }
        if let Some(v) = self.alpha {
            cfg.params.alpha = v;
        }
        if let Some(v) = self.k {
            cfg.params.k_scale = v;
        }
        if let Some(v) = self.kappa_t {
            cfg.params.kappa_t = v;
        }
        if rescale && self.config.is_none() {
            // flag-built configs follow the scaling law
            cfg.params.kappa_eps =
                (cfg.params.k_scale * cfg.params.eps).powi(2) * cfg.params.kappa_t;
        }
        if let Some(v) = self.t_plus {
            cfg.params.t_plus = v;
        }
        if let Some(p) = &self.profile {
            cfg.profile = ProfileChoice::parse(p)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Stationary temperature profile by quadrature.
    Profile {
        #[command(flatten)]
        cfg: ConfigOpts,
        /// Number of base grid points in x.
        #[arg(long = "grid-n", default_value_t = 601)]
        grid_n: usize,
        /// CSV output path (stdout summary only when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady heat flux and effective conductivity.
    Flux {
        #[command(flatten)]
        cfg: ConfigOpts,
    },
    /// Membrane hitting probabilities (closed forms).
    Hitprob {
        /// Left target a < 0.
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        /// Right target b > 0.
        #[arg(long)]
        b: f64,
        /// Start: a number, or +0 / -0 for the membrane sides.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        beta_plus: f64,
        #[arg(long)]
        beta_minus: f64,
        /// Reflecting walls at -1 and +1: report the probability that the
        /// wall local time at -1 crosses its threshold first (needs
        /// beta_plus == beta_minus and a = -1, b = 1).
        #[arg(long)]
        walls: bool,
    },
    /// Monte Carlo snapping-out Brownian motion exit probabilities.
    Snob {
        #[arg(long)]
        beta_plus: f64,
        #[arg(long)]
        beta_minus: f64,
        /// Start: a number, or +0 / -0.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// Number of Monte Carlo paths.
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        /// Euler step size.
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Reflecting walls with elastic absorption instead of absorbing
        /// targets.
        #[arg(long)]
        walls: bool,
        /// JSONL output path (one object per batch plus a summary object).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo SDE estimators for the pre-limit diffusion.
    Sde {
        #[command(flatten)]
        cfg: ConfigOpts,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
        x0: f64,
        /// y-coordinate (used by the Feynman-Kac estimator).
        #[arg(long, default_value_t = 0.0)]
        y0: f64,
        /// Number of Monte Carlo paths.
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        /// Euler step size.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Simulate the time-changed process instead of the additive-clock
        /// one.
        #[arg(long)]
        tilde: bool,
        /// Run the Feynman-Kac estimator of the 2D temperature at
        /// (x0, y0) and this time (zero initial condition).
        #[arg(long, value_name = "T")]
        fk: Option<f64>,
        /// JSONL output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Crossing-probability curve over a list of eps values.
    Limits {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long = "K", default_value_t = 1.0)]
        k: f64,
        /// Comma-separated eps values.
        #[arg(long, default_value = "1e-2,1e-3,1e-4")]
        eps_list: String,
        /// Schedule: critical (kappa_eps = (K eps)^2 kappa_T) or log
        /// (kappa_T/kappa_eps = exp(1/(K eps)), alpha = 1/2).
        #[arg(long, default_value = "critical")]
        schedule: String,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral covariance diagnostics on a probe grid.
    Spectral {
        /// Scale integer N of the mode band [N, 2N].
        #[arg(long = "N")]
        n: u32,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        /// Number of x probe points.
        #[arg(long, default_value_t = 41)]
        probe_grid: usize,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-volume solve of the effective diffusion equation.
    Pde {
        #[command(flatten)]
        cfg: ConfigOpts,
        #[arg(long, default_value_t = 256)]
        nx: usize,
        #[arg(long, default_value_t = 8)]
        ny: usize,
        /// Steady-state solve (default when no --t-final).
        #[arg(long)]
        steady: bool,
        /// Transient end time.
        #[arg(long)]
        t_final: Option<f64>,
        /// Transient step size.
        #[arg(long)]
        dt: Option<f64>,
        /// Use the graded x-mesh (recommended).
        #[arg(long, default_value_t = true)]
        graded: bool,
        /// CSV output path; steady runs also emit `<stem>_flux.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the three reference temperature profiles.
    ReproduceFig1 {
        /// Output directory for magenta.csv, blue.csv, grey.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

// ---------------------------------------------------------------------------
// command handlers

/// Base x-grid spanning [-1, 1] with extra resolution at the barrier edges
/// and inside the thin wall layers.
fn profile_grid(eps: f64, points: usize) -> Vec<f64> {
    let n = points.max(9);
    let mut xs: Vec<f64> = (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect();
    for s in [
        1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2,
    ] {
        xs.push(-1.0 + s);
        xs.push(1.0 - s);
    }
    for m in [0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
        let x = m * eps;
        if x < 1.0 {
            xs.push(x);
            xs.push(-x);
        }
    }
    xs.push(0.0);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    xs[0] = -1.0;
    let last = xs.len() - 1;
    xs[last] = 1.0;
    xs
}

fn profile_csv(shape: &Shape, points: usize) -> Result<CsvDoc> {
    let grid = profile_grid(shape.params.eps, points);
    let prof = stationary_profile_shape(shape, &grid)?;
    let mut meta = vec![
        ("flux".into(), fmt17(prof.flux)),
        ("theta".into(), fmt17(prof.theta)),
        ("t_star".into(), fmt17(prof.t_star_quadrature)),
        ("t_star_formula".into(), fmt17(prof.t_star_formula)),
        ("c_eff".into(), fmt17(prof.c_eff)),
    ];
    meta.extend(config_meta(&shape.params));
    Ok(CsvDoc {
        meta,
        header: vec!["x".into(), "T".into()],
        rows: prof
            .xs
            .iter()
            .zip(&prof.temps)
            .map(|(x, t)| vec![fmt17(*x), fmt17(*t)])
            .collect(),
    })
}

fn config_meta(params: &ModelParams) -> Vec<(String, String)> {
    vec![
        ("eps".into(), fmt17(params.eps)),
        ("kappa_eps".into(), fmt17(params.kappa_eps)),
        ("kappa_t".into(), fmt17(params.kappa_t)),
        ("alpha".into(), fmt17(params.alpha)),
        ("k".into(), fmt17(params.k_scale)),
        ("t_plus".into(), fmt17(params.t_plus)),
    ]
}

fn cmd_profile(
    argv: &[String],
    cfg: &ConfigOpts,
    points: usize,
    out: Option<&Path>,
) -> Result<()> {
    let config = cfg.resolve()?;
    let shape = config.shape()?;
    let doc = profile_csv(&shape, points)?;
    for (k, v) in &doc.meta {
        println!("{k} = {v}");
    }
    if let Some(path) = out {
        let o = emit(path, &doc.render())?;
        write_manifest(&out_dir(path), argv, &config, &[o])?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_flux(cfg: &ConfigOpts) -> Result<()> {
    let config = cfg.resolve()?;
    let shape = config.shape()?;
    let phi = flux_shape(&shape)?;
    println!("flux = {}", fmt17(phi));
    println!(
        "resistance = {}",
        fmt17(shape.params.t_plus / phi)
    );
    println!(
        "c_eff_formula = {}",
        fmt17(crate::analytic1d::effective_conductivity(&shape.params))
    );
    println!(
        "t_star_formula = {}",
        fmt17(crate::analytic1d::barrier_height(&shape.params))
    );
    Ok(())
}

fn cmd_hitprob(
    a: f64,
    b: f64,
    x: &str,
    beta_plus: f64,
    beta_minus: f64,
    walls: bool,
) -> Result<()> {
    let start = StartPos::parse(x)?;
    let (p_left, p_right, formula_path) = if walls {
        if beta_plus != beta_minus {
            return Err(BarrierError::parameter(
                "--walls requires beta_plus == beta_minus",
            ));
        }
        if a != -1.0 || b != 1.0 {
            return Err(BarrierError::parameter(
                "--walls is defined on the interval [-1, 1]",
            ));
        }
        let p = hit_prob_reflected_system(beta_plus, start)?;
        (p, 1.0 - p, "reflected_system")
    } else {
        let q = HittingQuery {
            a,
            b,
            start,
            mp: MembraneParams::new(beta_plus, beta_minus)?,
        };
        (
            hit_prob_membrane(&q)?,
            hit_prob_membrane_complement(&q)?,
            "membrane_closed_form",
        )
    };
    println!(
        "{}",
        serde_json::json!({
            "p_left": fmt17(p_left),
            "p_right": fmt17(p_right),
            "formula_path": formula_path,
        })
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_snob(
    argv: &[String],
    beta_plus: f64,
    beta_minus: f64,
    x0: &str,
    a: f64,
    b: f64,
    paths: u64,
    step: f64,
    seed: u64,
    walls: bool,
    out: Option<&Path>,
) -> Result<()> {
    let mp = MembraneParams::new(beta_plus, beta_minus)?;
    let start = StartPos::parse(x0)?;
    let spec = if walls {
        ProcessSpec::SnobReflectedElastic(mp)
    } else {
        ProcessSpec::Snob(mp)
    };
    // batches are independent (master_seed, batch) path streams; the summary
    // aggregates them
    let n_batches = 10u64.min(paths.max(1));
    let mut records = Vec::new();
    let mut hits_weighted = 0.0f64;
    let mut total = 0u64;
    for batch in 0..n_batches {
        let n_b = paths / n_batches + u64::from(batch < paths % n_batches);
        if n_b == 0 {
            continue;
        }
        let s = mc_exit_probability(spec, a, b, start, n_b, step, seed ^ (batch + 1))?;
        hits_weighted += s.estimate * n_b as f64;
        total += n_b;
        records.push(serde_json::json!({
            "kind": "batch",
            "batch": batch,
            "n_paths": n_b,
            "seed": s.seed,
            "estimate": fmt17(s.estimate),
            "std_error": fmt17(s.std_error),
        }));
    }
    let p = hits_weighted / total as f64;
    let se = (p * (1.0 - p) / total as f64).sqrt();
    let exact = if walls {
        None
    } else {
        Some(hit_prob_membrane(&HittingQuery { a, b, start, mp })?)
    };
    let mut summary = serde_json::json!({
        "kind": "summary",
        "walls": walls,
        "beta_plus": beta_plus,
        "beta_minus": beta_minus,
        "a": a,
        "b": b,
        "x0": x0,
        "n_paths": total,
        "step": step,
        "seed": seed,
        "estimate": fmt17(p),
        "std_error": fmt17(se),
    });
    if let Some(e) = exact {
        summary["exact"] = serde_json::Value::String(fmt17(e));
    }
    println!("{summary}");
    if let Some(path) = out {
        let mut body = String::new();
        for r in &records {
            let _ = writeln!(body, "{r}");
        }
        let _ = writeln!(body, "{summary}");
        let o = emit(path, &body)?;
        let cfg = Config {
            seed,
            ..Config::default()
        };
        write_manifest(&out_dir(path), argv, &cfg, &[o])?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sde(
    argv: &[String],
    cfg: &ConfigOpts,
    x0: f64,
    y0: f64,
    paths: u64,
    step: f64,
    tilde: bool,
    fk: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let config = cfg.resolve()?;
    let shape = config.shape()?;
    let record = if let Some(t) = fk {
        let summary = feynman_kac_shape(&shape, |_, _| 0.0, x0, y0, t, paths, step, config.seed)?;
        serde_json::json!({
            "kind": "feynman_kac",
            "x0": x0,
            "y0": y0,
            "t": t,
            "n_paths": summary.n_paths,
            "step": step,
            "seed": summary.seed,
            "estimate": fmt17(summary.estimate),
            "std_error": fmt17(summary.std_error),
        })
    } else {
        let summary = if tilde {
            mc_exit_left_xtilde_shape(&shape, x0, paths, step, config.seed)?
        } else {
            mc_exit_left_xeps_shape(&shape, x0, paths, step, config.seed)?
        };
        let exact = exit_prob_exact_shape(&shape, x0, -1.0, 1.0)?;
        let z = (summary.estimate - exact) / summary.std_error.max(f64::MIN_POSITIVE);
        serde_json::json!({
            "kind": "sde_exit_left",
            "process": if tilde { "xtilde" } else { "xeps" },
            "x0": x0,
            "n_paths": summary.n_paths,
            "step": step,
            "seed": summary.seed,
            "estimate": fmt17(summary.estimate),
            "std_error": fmt17(summary.std_error),
            "exact": fmt17(exact),
            "z_score": fmt17(z),
        })
    };
    println!("{record}");
    if let Some(path) = out {
        let o = emit(path, &format!("{record}\n"))?;
        write_manifest(&out_dir(path), argv, &config, &[o])?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_limits(
    argv: &[String],
    alpha: f64,
    k: f64,
    eps_list: &str,
    schedule: &str,
    out: Option<&Path>,
) -> Result<()> {
    let eps_values: Vec<f64> = eps_list
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| {
                BarrierError::parameter(format!("bad eps value '{s}' in --eps-list"))
            })
        })
        .collect::<Result<_>>()?;
    let params_list: Vec<ModelParams> = eps_values
        .iter()
        .map(|&eps| match schedule {
            "critical" => Ok(ModelParams::with_scaling_law(eps, 1.0, alpha, k, 2.0)),
            "log" => {
                let kappa_t = 1.0;
                Ok(ModelParams {
                    eps,
                    kappa_eps: kappa_t / (1.0 / (k * eps)).exp(),
                    kappa_t,
                    alpha,
                    k_scale: k,
                    t_plus: 2.0,
                })
            }
            other => Err(BarrierError::parameter(format!(
                "unknown schedule '{other}' (expected critical or log)"
            ))),
        })
        .collect::<Result<_>>()?;
    let rows = key_identity_curve(&params_list, &CutoffProfile::piecewise_power_bare())?;
    let mut meta = vec![
        ("alpha".into(), fmt17(alpha)),
        ("k".into(), fmt17(k)),
        ("schedule".into(), schedule.to_string()),
    ];
    if schedule == "critical" {
        if let Ok(b) = beta_limit(alpha, k) {
            meta.push(("beta_limit".into(), fmt17(b)));
        }
        if alpha < 0.5 {
            meta.push((
                "p_plus_exact_limit".into(),
                fmt17(p_plus_small_alpha_exact_limit(alpha)?),
            ));
        }
    } else if schedule == "log" {
        meta.push(("beta_limit".into(), fmt17(k / 4.0)));
    }
    // regime classification of the chosen schedule (JSON summary)
    let regime = match schedule {
        // matches the kappa_eps = (K eps)^2 kappa_t family used for the rows
        "critical" => classify_regime(alpha, |eps| 1.0 / (k * eps).powi(2)),
        _ => classify_regime(alpha, |eps| (1.0 / (k * eps)).exp()),
    }?;
    let regime_name = match regime.regime {
        Regime::HardMembrane => "hard_membrane",
        Regime::PureBrownian => "pure_brownian",
        Regime::NonPermeable => "non_permeable",
        Regime::SkewLimit => "skew_limit",
    };
    let mut summary = serde_json::json!({
        "kind": "summary",
        "alpha": alpha,
        "K": k,
        "schedule": schedule,
        "regime": regime_name,
        "note": regime.note,
    });
    if let Some(bp) = regime.beta_plus {
        summary["beta_plus"] = serde_json::Value::String(fmt17(bp));
    }
    if let Some(bm) = regime.beta_minus {
        summary["beta_minus"] = serde_json::Value::String(fmt17(bm));
    }
    if let Some(s) = regime.fitted_slope {
        summary["fitted_slope"] = serde_json::Value::String(fmt17(s));
    }
    if let Some(g) = regime.gamma {
        summary["gamma"] = serde_json::Value::String(fmt17(g));
    }
    println!("{summary}");
    for (kk, v) in &meta {
        println!("{kk} = {v}");
    }
    let doc = CsvDoc {
        meta,
        header: vec![
            "eps".into(),
            "p_plus".into(),
            "p_over_eps".into(),
            "beta_estimate".into(),
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    fmt17(r.eps),
                    fmt17(r.p_plus),
                    fmt17(r.p_over_eps),
                    fmt17(r.beta_estimate),
                ]
            })
            .collect(),
    };
    for r in &rows {
        println!(
            "eps {} : p_plus/eps = {} beta_estimate = {}",
            fmt17(r.eps),
            fmt17(r.p_over_eps),
            fmt17(r.beta_estimate)
        );
    }
    if let Some(path) = out {
        let o = emit(path, &doc.render())?;
        let cfg = Config::default();
        write_manifest(&out_dir(path), argv, &cfg, &[o])?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_spectral(
    argv: &[String],
    n: u32,
    eps: f64,
    probe: usize,
    out: Option<&Path>,
) -> Result<()> {
    let params = ModelParams {
        eps,
        kappa_eps: 0.004,
        kappa_t: 0.1,
        alpha: 1.0,
        k_scale: 1.0,
        t_plus: 2.0,
    };
    let shape = Shape::new(params, CutoffProfile::arctan_example())?;
    let set = build_index_set(n)?;
    let rep = remainder_bound(&set, &shape, probe.max(2))?;
    let mut meta = vec![
        ("N".into(), n.to_string()),
        ("card_pp".into(), set.card_pp.to_string()),
        ("c_n".into(), fmt17(set.c_n)),
        ("analytic_bound".into(), fmt17(rep.analytic_bound)),
        ("measured_sup_r".into(), fmt17(rep.measured_sup)),
    ];
    meta.extend(config_meta(&params));
    for (k, v) in &meta {
        println!("{k} = {v}");
    }
    if let Some(path) = out {
        let mut rows = Vec::new();
        let m = probe.max(2);
        for i in 0..m {
            let x = -0.95 + 1.9 * i as f64 / (m - 1) as f64;
            let cov = covariance_diagonal(&set, &shape, x, 0.0)?;
            let r_norm = (cov.r[0][0] * cov.r[0][0]
                + cov.r[0][1] * cov.r[0][1]
                + cov.r[1][0] * cov.r[1][0]
                + cov.r[1][1] * cov.r[1][1])
                .sqrt();
            rows.push(vec![
                fmt17(x),
                fmt17(cov.q_bar[0][0]),
                fmt17(cov.q_bar[1][1]),
                fmt17(cov.q_bar[0][1]),
                fmt17(r_norm),
            ]);
        }
        let doc = CsvDoc {
            meta,
            header: vec![
                "x".into(),
                "qbar_11".into(),
                "qbar_22".into(),
                "qbar_12".into(),
                "r_norm".into(),
            ],
            rows,
        };
        let o = emit(path, &doc.render())?;
        let cfg = Config {
            params,
            profile: ProfileChoice::Arctan,
            seed: DEFAULT_SEED,
        };
        write_manifest(&out_dir(path), argv, &cfg, &[o])?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_pde(
    argv: &[String],
    cfg: &ConfigOpts,
    nx: usize,
    ny: usize,
    steady: bool,
    t_final: Option<f64>,
    dt: Option<f64>,
    graded: bool,
    out: &Path,
) -> Result<()> {
    let config = cfg.resolve()?;
    let shape = config.shape()?;
    let grid = assemble(&shape, nx, ny, graded)?;
    let transient = t_final.is_some() && !steady;
    let field = if transient {
        let t_final = t_final.unwrap();
        let dt = dt.ok_or_else(|| {
            BarrierError::parameter("--t-final requires --dt")
        })?;
        let mut f = Field2D::constant(nx, ny, 0.0);
        let steps = (t_final / dt).ceil() as usize;
        for _ in 0..steps {
            f = step_transient(&grid, &f, dt)?;
        }
        f
    } else {
        solve_steady(&grid)?
    };
    let mut meta = config_meta(&shape.params);
    meta.push(("nx".into(), nx.to_string()));
    meta.push(("ny".into(), ny.to_string()));
    meta.push(("graded".into(), graded.to_string()));
    meta.push((
        "mode".into(),
        if transient { "transient".into() } else { "steady".to_string() },
    ));
    let mut rows = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = (j as f64 + 0.5) * grid.dy;
        for i in 0..nx {
            rows.push(vec![
                fmt17(grid.x_centers[i]),
                fmt17(y),
                fmt17(field.at(i, j)),
            ]);
        }
    }
    let doc = CsvDoc {
        meta: meta.clone(),
        header: vec!["x".into(), "y".into(), "T".into()],
        rows,
    };
    let mut outputs = vec![emit(out, &doc.render())?];
    if !transient {
        let fluxes = column_fluxes(&grid, &field);
        let flux_doc = CsvDoc {
            meta,
            header: vec!["face".into(), "x_face".into(), "flux".into()],
            rows: fluxes
                .iter()
                .enumerate()
                .map(|(i, f)| vec![i.to_string(), fmt17(grid.x_edges[i]), fmt17(*f)])
                .collect(),
        };
        let stem = out
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("pde");
        let flux_path = out_dir(out).join(format!("{stem}_flux.csv"));
        outputs.push(emit(&flux_path, &flux_doc.render())?);
        println!("flux_mean = {}", fmt17(fluxes.iter().sum::<f64>() / fluxes.len() as f64));
    }
    write_manifest(&out_dir(out), argv, &config, &outputs)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// The three reference profiles: the smooth example barrier at eps = 0.2,
/// the same barrier deep in the scaling regime at eps = 0.01 with
/// kappa_eps = eps^2 kappa_T, and the barrier-free linear profile.
fn cmd_reproduce_fig1(argv: &[String], dir: &Path) -> Result<()> {
    let magenta_params = ModelParams {
        eps: 0.2,
        kappa_eps: 0.004,
        kappa_t: 0.1,
        alpha: 1.0,
        k_scale: 1.0,
        t_plus: 2.0,
    };
    let blue_params = ModelParams {
        eps: 0.01,
        kappa_eps: 1e-5,
        kappa_t: 0.1,
        alpha: 1.0,
        k_scale: 1.0,
        t_plus: 2.0,
    };
    let cases: Vec<(&str, Shape)> = vec![
        (
            "magenta",
            Shape::new(magenta_params, CutoffProfile::arctan_example())?,
        ),
        (
            "blue",
            Shape::new(blue_params, CutoffProfile::arctan_example())?,
        ),
        ("grey", Shape::constant(magenta_params, 1.0)),
    ];
    let mut outputs = Vec::new();
    for (name, shape) in &cases {
        let doc = profile_csv(shape, 601)?;
        let path = dir.join(format!("{name}.csv"));
        outputs.push(emit(&path, &doc.render())?);
        let t_star = doc
            .meta
            .iter()
            .find(|(k, _)| k == "t_star_quadrature")
            .map(|(_, v)| v.clone())
            .unwrap_or_default();
        println!("{name}: t_star_quadrature = {t_star}");
    }
    let cfg = Config {
        params: magenta_params,
        profile: ProfileChoice::Arctan,
        seed: DEFAULT_SEED,
    };
    write_manifest(dir, argv, &cfg, &outputs)?;
    println!("wrote {} profiles to {}", cases.len(), dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// entry point

fn init_threads(cap: Option<usize>) {
    let n = cap.or_else(|| {
        std::env::var("BARRIER_LAB_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(n) = n {
        if n >= 1 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Run the CLI on an argument vector; returns the process exit code
/// (0 success, 2 parameter error, 3 numeric failure).
pub fn run(argv: &[String]) -> i32 {
    let args = match CliArgs::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            // clap handles --help/--version through this path with success
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_threads(args.threads);
    let result = match &args.cmd {
        Cmd::Profile { cfg, grid_n, out } => cmd_profile(argv, cfg, *grid_n, out.as_deref()),
        Cmd::Flux { cfg } => cmd_flux(cfg),
        Cmd::Hitprob {
            a,
            b,
            x,
            beta_plus,
            beta_minus,
            walls,
        } => cmd_hitprob(*a, *b, x, *beta_plus, *beta_minus, *walls),
        Cmd::Snob {
            beta_plus,
            beta_minus,
            x0,
            a,
            b,
            paths,
            step,
            seed,
            walls,
            out,
        } => cmd_snob(
            argv,
            *beta_plus,
            *beta_minus,
            x0,
            *a,
            *b,
            *paths,
            *step,
            *seed,
            *walls,
            out.as_deref(),
        ),
        Cmd::Sde {
            cfg,
            x0,
            y0,
            paths,
            step,
            tilde,
            fk,
            out,
        } => cmd_sde(argv, cfg, *x0, *y0, *paths, *step, *tilde, *fk, out.as_deref()),
        Cmd::Limits {
            alpha,
            k,
            eps_list,
            schedule,
            out,
        } => cmd_limits(argv, *alpha, *k, eps_list, schedule, out.as_deref()),
        Cmd::Spectral {
            n,
            eps,
            probe_grid,
            out,
        } => cmd_spectral(argv, *n, *eps, *probe_grid, out.as_deref()),
        Cmd::Pde {
            cfg,
            nx,
            ny,
            steady,
            t_final,
            dt,
            graded,
            out,
        } => cmd_pde(argv, cfg, *nx, *ny, *steady, *t_final, *dt, *graded, out),
        Cmd::ReproduceFig1 { out_dir } => cmd_reproduce_fig1(argv, out_dir),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_minimal_applies_scaling_law() {
        let cfg = parse_config("eps = 0.01\nalpha = 1\nk = 1\nkappa_t = 0.1\nscaling = auto\n")
            .unwrap();
        assert!((cfg.params.kappa_eps - 1e-5).abs() < 1e-20);
        assert_eq!(cfg.params.t_plus, 2.0, "T_plus defaults to 2");
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        let err = parse_config("epz = 0.01\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
        assert!(matches!(err, BarrierError::Parameter(_)));
        let err = parse_config("kappa_t = -1\nscaling = auto\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = parse_config("eps\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn config_comments_and_spacing() {
        let cfg = parse_config(
            "# full-line comment\n  eps = 0.02  # trailing comment\n\nseed = 99\n",
        )
        .unwrap();
        assert_eq!(cfg.params.eps, 0.02);
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn config_scaling_conflicts() {
        assert!(parse_config("kappa_eps = 1e-5\n").is_err());
        assert!(parse_config("scaling = explicit\n").is_err());
        let cfg = parse_config("scaling = explicit\nkappa_eps = 0.004\neps = 0.2\nprofile = arctan\n").unwrap();
        assert_eq!(cfg.params.kappa_eps, 0.004);
    }

    #[test]
    fn separation_violation_is_parameter_error() {
        let err = parse_config("eps = 0.2\n").unwrap_err();
        assert!(err.to_string().contains("separation"), "{err}");
        assert_eq!(err.exit_code(), 2);
        // the smooth example profile is exempt
        assert!(parse_config("eps = 0.2\nprofile = arctan\n").is_ok());
    }

    #[test]
    fn config_tabulated_profile_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("chi.csv");
        // linear ramp to the plateau, with the required 2*eps breakpoint
        std::fs::write(&table, "x,chi\n0,0\n0.02,1\n1,1\n").unwrap();
        let cfg = parse_config(&format!(
            "eps = 0.01\nprofile_table = {}\n",
            table.display()
        ))
        .unwrap();
        let shape = cfg.shape().unwrap();
        assert!(shape.chibar(0.0).abs() < 1e-12);
        assert!((shape.chibar(0.5) - 1.0).abs() < 1e-12);
        let mid = shape.chibar(0.01);
        assert!(mid > 0.1 && mid < 0.9, "ramp midpoint {mid}");
        assert_eq!(shape.chibar(-0.01), mid, "evenness");
        // malformed rows are parameter errors
        std::fs::write(&table, "x,chi\n0,zero\n").unwrap();
        assert!(cfg.shape().is_err());
    }

    #[test]
    fn fmt17_round_trips() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, 1e-300, -2.5e17] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_renders_meta_then_header() {
        let doc = CsvDoc {
            meta: vec![("a".into(), "1".into())],
            header: vec!["x".into(), "y".into()],
            rows: vec![vec!["0".into(), "1".into()]],
        };
        assert_eq!(doc.render(), "# a = 1\nx,y\n0,1\n");
    }

    fn run_vec(args: &[&str]) -> i32 {
        let argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        run(&argv)
    }

    #[test]
    fn hitprob_subcommand_reference_value() {
        // closed-form path: P from 0+ with symmetric beta = 1 is 1/3
        let code = run_vec(&[
            "barrier-lab",
            "hitprob",
            "--a",
            "-1",
            "--b",
            "1",
            "--x",
            "+0",
            "--beta-plus",
            "1",
            "--beta-minus",
            "1",
        ]);
        assert_eq!(code, 0);
    }

    #[test]
    fn profile_with_large_eps_exits_2() {
        let code = run_vec(&["barrier-lab", "profile", "--eps", "0.2"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn unknown_subcommand_exits_2() {
        assert_eq!(run_vec(&["barrier-lab", "frobnicate"]), 2);
    }
}
