//! Run configuration, read from a TOML file.
//!
//! ```toml
//! [instance]
//! preset = "vol02"          # or strike/rate/vol/dt, optionally with [grid]
//!
//! [solver]
//! scheme = "both"           # lower | upper | both
//! n = 1000
//! tol = 0.001
//!
//! [output]
//! eval_points = [32, 34, 36, 38, 40, 42, 44, 46]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use convexvi_core::bermudan::{self, PutParams};
use convexvi_core::{ApproxTarget, Grid, ResidualRule};
use serde::Deserialize;

/// Problems with a configuration file; maps to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Lower,
    Upper,
    Both,
}

impl SchemeChoice {
    pub fn lower(self) -> bool {
        matches!(self, SchemeChoice::Lower | SchemeChoice::Both)
    }

    pub fn upper(self) -> bool {
        matches!(self, SchemeChoice::Upper | SchemeChoice::Both)
    }
}

/// Disturbance sampling used with the tangent (lower) scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerSampling {
    LocalAverage,
    MonteCarlo,
}

impl fmt::Display for LowerSampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LowerSampling::LocalAverage => "local_average",
            LowerSampling::MonteCarlo => "monte_carlo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChoice {
    PerAction,
    Maximand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualChoice {
    GridValues,
    TangentCoefficients,
    Values,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    preset: Option<String>,
    strike: Option<f64>,
    rate: Option<f64>,
    vol: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lo: f64,
    hi: f64,
    points: usize,
}

fn default_scheme() -> SchemeChoice {
    SchemeChoice::Both
}
fn default_n() -> usize {
    1000
}
fn default_lower_sampling() -> LowerSampling {
    LowerSampling::LocalAverage
}
fn default_tol() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    convexvi_core::bellman::DEFAULT_MAX_ITER
}
fn default_target() -> TargetChoice {
    TargetChoice::PerAction
}
fn default_residual() -> ResidualChoice {
    ResidualChoice::GridValues
}
fn default_mass() -> f64 {
    0.999999999
}
fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default = "default_scheme")]
    scheme: SchemeChoice,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_lower_sampling")]
    lower_sampling: LowerSampling,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default = "default_target")]
    target: TargetChoice,
    #[serde(default = "default_residual")]
    residual: ResidualChoice,
    #[serde(default = "default_mass")]
    truncation_mass: f64,
    #[serde(default = "default_seed")]
    seed: u64,
}

impl Default for RawSolver {
    fn default() -> Self {
        toml::from_str("").expect("all solver fields have defaults")
    }
}

fn default_eval_points() -> Vec<f64> {
    bermudan::table_z0()
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_out_dir")]
    dir: PathBuf,
    #[serde(default = "default_eval_points")]
    eval_points: Vec<f64>,
    #[serde(default = "default_true")]
    curve: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        toml::from_str("").expect("all output fields have defaults")
    }
}

fn default_paths() -> usize {
    100_000
}
fn default_tail() -> f64 {
    1e-4
}
fn default_chain() -> Vec<usize> {
    vec![250, 500, 1000]
}
fn default_probes() -> usize {
    64
}
fn default_pairs() -> usize {
    50
}

fn default_chain_tol() -> f64 {
    1e-6
}

fn default_chain_max_iter() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    #[serde(default = "default_paths")]
    paths: usize,
    #[serde(default = "default_tail")]
    tail_bound: f64,
    #[serde(default)]
    antithetic: bool,
    #[serde(default = "default_chain")]
    chain: Vec<usize>,
    #[serde(default = "default_probes")]
    probes: usize,
    #[serde(default = "default_pairs")]
    contraction_pairs: usize,
    #[serde(default = "default_chain_tol")]
    chain_tol: f64,
    #[serde(default = "default_chain_max_iter")]
    chain_max_iter: usize,
}

impl Default for RawVerify {
    fn default() -> Self {
        toml::from_str("").expect("all verify fields have defaults")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    instance: RawInstance,
    grid: Option<RawGrid>,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    verify: RawVerify,
}

/// Settings of the `verify` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub paths: usize,
    pub tail_bound: f64,
    pub antithetic: bool,
    pub chain: Vec<usize>,
    pub probes: usize,
    pub contraction_pairs: usize,
    /// Stopping tolerance for the chain solves, which compare fixed points;
    /// applied to grid values only.
    pub chain_tol: f64,
    pub chain_max_iter: usize,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Preset name, if the instance came from one.
    pub preset: Option<String>,
    pub params: PutParams,
    pub grid: Grid,
    pub scheme: SchemeChoice,
    pub n: usize,
    pub lower_sampling: LowerSampling,
    pub tol: f64,
    pub max_iter: usize,
    pub target: ApproxTarget,
    pub residual: ResidualRule,
    pub truncation_mass: f64,
    pub seed: u64,
    pub eval_points: Vec<f64>,
    pub out_dir: PathBuf,
    pub curve: bool,
    pub verify: VerifyConfig,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.to_owned(), source },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: PathBuf::from("<config>"), source: Box::new(e) })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let invalid = |msg: String| ConfigError::Invalid(msg);
        let inst = raw.instance;
        let explicit = [inst.strike, inst.rate, inst.vol, inst.dt];
        let (preset, params, preset_grid) = match &inst.preset {
            Some(name) => {
                let p = bermudan::preset(name).ok_or_else(|| {
                    let known: Vec<&str> = bermudan::PRESETS.iter().map(|p| p.name).collect();
                    invalid(format!("unknown preset '{name}' (known: {})", known.join(", ")))
                })?;
                let params = PutParams {
                    strike: inst.strike.unwrap_or(p.params.strike),
                    rate: inst.rate.unwrap_or(p.params.rate),
                    vol: inst.vol.unwrap_or(p.params.vol),
                    dt: inst.dt.unwrap_or(p.params.dt),
                };
                (Some(name.clone()), params, Some(p.grid()))
            }
            None => match explicit {
                [Some(strike), Some(rate), Some(vol), Some(dt)] => (None, PutParams { strike, rate, vol, dt }, None),
                _ => return Err(invalid("instance needs a preset or all of strike, rate, vol, dt".into())),
            },
        };
        params.validate().map_err(|e| invalid(e.to_string()))?;

        let grid = match (raw.grid, preset_grid) {
            (Some(g), _) => Grid::uniform(g.lo, g.hi, g.points).map_err(|e| invalid(format!("grid: {e}")))?,
            (None, Some(g)) => g,
            (None, None) => return Err(invalid("a [grid] section is required without a preset".into())),
        };

        let s = raw.solver;
        if s.n == 0 {
            return Err(invalid("solver.n must be at least 1".into()));
        }
        if !(s.tol > 0.0) {
            return Err(invalid(format!("solver.tol must be positive, got {}", s.tol)));
        }
        if s.max_iter == 0 {
            return Err(invalid("solver.max_iter must be at least 1".into()));
        }
        if !(s.truncation_mass > 0.0 && s.truncation_mass < 1.0) {
            return Err(invalid(format!("solver.truncation_mass must lie in (0, 1), got {}", s.truncation_mass)));
        }

        let out = raw.output;
        let (lo, hi) = grid.hull();
        if let Some(z) = out.eval_points.iter().find(|&&z| !(z >= lo && z <= hi)) {
            return Err(invalid(format!("eval point {z} lies outside the grid hull [{lo}, {hi}]")));
        }
        if out.eval_points.is_empty() {
            return Err(invalid("output.eval_points is empty".into()));
        }

        let v = raw.verify;
        if v.chain.is_empty() || v.chain.contains(&0) {
            return Err(invalid("verify.chain needs positive sampling sizes".into()));
        }
        if !(v.chain_tol > 0.0) {
            return Err(invalid(format!("verify.chain_tol must be positive, got {}", v.chain_tol)));
        }
        if v.chain_max_iter == 0 {
            return Err(invalid("verify.chain_max_iter must be at least 1".into()));
        }
        if v.probes < 2 {
            return Err(invalid("verify.probes must be at least 2".into()));
        }
        if v.paths < convexvi_core::oracle::MIN_PATHS {
            return Err(invalid(format!("verify.paths must be at least {}", convexvi_core::oracle::MIN_PATHS)));
        }

        Ok(RunConfig {
            preset,
            params,
            grid,
            scheme: s.scheme,
            n: s.n,
            lower_sampling: s.lower_sampling,
            tol: s.tol,
            max_iter: s.max_iter,
            target: match s.target {
                TargetChoice::PerAction => ApproxTarget::PerAction,
                TargetChoice::Maximand => ApproxTarget::Maximand,
            },
            residual: match s.residual {
                ResidualChoice::GridValues => ResidualRule::GridValues,
                ResidualChoice::TangentCoefficients => ResidualRule::TangentCoefficients,
                ResidualChoice::Values => ResidualRule::Values,
            },
            truncation_mass: s.truncation_mass,
            seed: s.seed,
            eval_points: out.eval_points,
            out_dir: out.dir,
            curve: out.curve,
            verify: VerifyConfig {
                paths: v.paths,
                tail_bound: v.tail_bound,
                antithetic: v.antithetic,
                chain: v.chain,
                probes: v.probes,
                contraction_pairs: v.contraction_pairs,
                chain_tol: v.chain_tol,
                chain_max_iter: v.chain_max_iter,
            },
        })
    }

    /// Same instance and settings under the preset's published grid, for
    /// building configurations in code.
    pub fn for_preset(name: &str) -> Result<Self, ConfigError> {
        Self::from_toml(&format!("[instance]\npreset = \"{name}\"\n"))
    }
}
