//! Building the instance, running the two schemes and writing artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use convexvi_core::bermudan::{self, UNEXERCISED};
use convexvi_core::sampling::{
    make_equiprob_partition, make_extreme_upper, make_local_average, make_monte_carlo, truncate,
};
use convexvi_core::{reward_seed, solve_fixed_point, FixedPointResult, LogNormal, Model, Sampling, SchemeConfig};

use crate::config::{LowerSampling, RunConfig};
use crate::RunError;

/// Points in the dense curve output.
pub const CURVE_POINTS: usize = 512;

/// The put model and its disturbance law.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: Model,
    pub dist: LogNormal,
}

impl Instance {
    pub fn new(cfg: &RunConfig) -> Result<Self, RunError> {
        let (model, dist) = bermudan::build_put_model(cfg.params)?;
        Ok(Instance { model, dist })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

impl Bound {
    pub fn name(self) -> &'static str {
        match self {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
        }
    }
}

/// Sampling of size `n` for the given bound under `cfg`.
pub fn sampling_for(cfg: &RunConfig, inst: &Instance, bound: Bound, n: usize) -> Result<Sampling, RunError> {
    Ok(match bound {
        Bound::Lower => match cfg.lower_sampling {
            LowerSampling::LocalAverage => make_local_average(&make_equiprob_partition(&inst.dist, n)?, &inst.dist)?,
            LowerSampling::MonteCarlo => make_monte_carlo(&inst.dist, n, cfg.seed)?,
        },
        Bound::Upper => {
            let t = truncate(inst.dist, cfg.truncation_mass)?;
            make_extreme_upper(&make_equiprob_partition(&t, n)?, &t)?
        }
    })
}

pub fn scheme_for(cfg: &RunConfig, bound: Bound) -> SchemeConfig {
    let base = match bound {
        Bound::Lower => SchemeConfig::tangent(cfg.grid.clone()),
        Bound::Upper => SchemeConfig::interp(cfg.grid.clone(), cfg.params.left_extension()),
    };
    base.with_target(cfg.target).with_residual(cfg.residual)
}

/// One solved scheme.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub bound: Bound,
    pub result: FixedPointResult,
    pub sampling: Sampling,
    pub wall: Duration,
}

impl SchemeRun {
    pub fn value(&self, z: f64) -> f64 {
        self.result.value.eval(UNEXERCISED, z)
    }
}

pub fn solve_bound(cfg: &RunConfig, inst: &Instance, bound: Bound, n: usize) -> Result<SchemeRun, RunError> {
    let start = Instant::now();
    let sampling = sampling_for(cfg, inst, bound, n)?;
    let scheme = scheme_for(cfg, bound);
    let seed = reward_seed(&inst.model);
    let result =
        solve_fixed_point(&inst.model, std::slice::from_ref(&sampling), &scheme, &seed, cfg.tol, cfg.max_iter)?;
    let wall = start.elapsed();
    log::info!(
        "{} scheme: {} iterations, converged={}, {:.3}s",
        bound.name(),
        result.iterations,
        result.converged,
        wall.as_secs_f64()
    );
    bermudan::exercise_boundary_gap(&cfg.params, &result.value, &cfg.grid);
    Ok(SchemeRun { bound, result, sampling, wall })
}

/// Both (or one) schemes of a run.
#[derive(Debug, Clone)]
pub struct Solution {
    pub lower: Option<SchemeRun>,
    pub upper: Option<SchemeRun>,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|r| r.result.converged)
    }
}

pub fn solve(cfg: &RunConfig) -> Result<Solution, RunError> {
    let inst = Instance::new(cfg)?;
    let lower = if cfg.scheme.lower() { Some(solve_bound(cfg, &inst, Bound::Lower, cfg.n)?) } else { None };
    let upper = if cfg.scheme.upper() { Some(solve_bound(cfg, &inst, Bound::Upper, cfg.n)?) } else { None };
    Ok(Solution { lower, upper })
}

fn fmt5(x: f64) -> String {
    let s = format!("{x:.5}");
    if s == "-0.00000" {
        "0.00000".to_owned()
    } else {
        s
    }
}

/// `z0,lower,upper,gap` with five decimals; columns of an omitted scheme
/// (and the gap) are left out. The gap is computed from the printed values.
pub fn results_csv(cfg: &RunConfig, sol: &Solution) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["z0"];
    if sol.lower.is_some() {
        header.push("lower");
    }
    if sol.upper.is_some() {
        header.push("upper");
    }
    if sol.lower.is_some() && sol.upper.is_some() {
        header.push("gap");
    }
    w.write_record(&header)?;
    for &z in &cfg.eval_points {
        let mut row = vec![fmt5(z)];
        let lo = sol.lower.as_ref().map(|r| fmt5(r.value(z)));
        let up = sol.upper.as_ref().map(|r| fmt5(r.value(z)));
        row.extend(lo.iter().cloned());
        row.extend(up.iter().cloned());
        if let (Some(l), Some(u)) = (&lo, &up) {
            let gap = u.parse::<f64>().expect("formatted float") - l.parse::<f64>().expect("formatted float");
            row.push(fmt5(gap));
        }
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// `z,lower,upper` at [`CURVE_POINTS`] equally spaced points of the grid hull.
pub fn curve_csv(cfg: &RunConfig, sol: &Solution) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["z"];
    header.extend(sol.lower.as_ref().map(|_| "lower"));
    header.extend(sol.upper.as_ref().map(|_| "upper"));
    w.write_record(&header)?;
    let (lo, hi) = cfg.grid.hull();
    for i in 0..CURVE_POINTS {
        let z = lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64;
        let mut row = vec![format!("{z:.6}")];
        row.extend(sol.lower.iter().chain(&sol.upper).map(|r| format!("{:.8}", r.value(z))));
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

pub fn run_log(cfg: &RunConfig, sol: &Solution, total: Duration) -> String {
    let mut s = String::new();
    let instance = cfg.preset.as_deref().unwrap_or("custom");
    let p = cfg.params;
    let _ = writeln!(s, "instance: {instance} (strike={}, rate={}, vol={}, dt={})", p.strike, p.rate, p.vol, p.dt);
    let (lo, hi) = cfg.grid.hull();
    let _ = writeln!(s, "grid: {} points on [{lo}, {hi}]", cfg.grid.len());
    let _ = writeln!(
        s,
        "n: {}, tol: {}, max_iter: {}, target: {}, residual: {}",
        cfg.n,
        cfg.tol,
        cfg.max_iter,
        cfg.target.as_str(),
        cfg.residual.as_str()
    );
    for run in sol.lower.iter().chain(&sol.upper) {
        let r = &run.result;
        let _ = writeln!(s, "[{}]", run.bound.name());
        let _ = writeln!(s, "scheme: {}", r.scheme.kind.as_str());
        let _ = writeln!(s, "sampling: {}", r.sampling_id);
        let _ = writeln!(s, "iterations: {}", r.iterations);
        let _ = writeln!(s, "converged: {}", r.converged);
        let _ = writeln!(s, "wall_time_s: {:.3}", run.wall.as_secs_f64());
        let hist: Vec<String> = r.residual_history.iter().map(|x| format!("{x:.3e}")).collect();
        let _ = writeln!(s, "residuals: {}", hist.join(" "));
    }
    let _ = writeln!(s, "total_wall_time_s: {:.3}", total.as_secs_f64());
    s
}

/// Writes `results.csv`, `run.log` and (if enabled) `curve.csv` into `dir`.
pub fn write_artifacts(cfg: &RunConfig, sol: &Solution, dir: &Path, total: Duration) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), results_csv(cfg, sol)?)?;
    fs::write(dir.join("run.log"), run_log(cfg, sol, total))?;
    if cfg.curve {
        fs::write(dir.join("curve.csv"), curve_csv(cfg, sol)?)?;
    }
    Ok(())
}
