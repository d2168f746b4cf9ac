//! Independent checks on the bounds: Monte Carlo values of stationary
//! policies simulated with exact disturbances, and plain value iteration
//! on a dense grid.
//!
//! Simulation sample `i` draws its uniforms from ChaCha8 seeded with `seed`
//! on stream `i`, so samples can be produced in any order (or in parallel)
//! and reduce to the same estimate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bellman::{GreedyPolicy, Grid};
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::pwl::ConvexFunction;
use crate::sampling::{open_unit, Sampling};
use crate::sum::pairwise_sum;

/// Minimum number of simulated paths.
pub const MIN_PATHS: usize = 100;

/// Stationary decision rule.
pub trait Policy {
    fn action(&self, p: usize, z: f64) -> usize;
}

impl Policy for GreedyPolicy {
    fn action(&self, p: usize, z: f64) -> usize {
        GreedyPolicy::action(self, p, z)
    }
}

/// Adapts a closure `(p, z) -> a` to [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F: Fn(usize, f64) -> usize> Policy for FnPolicy<F> {
    fn action(&self, p: usize, z: f64) -> usize {
        (self.0)(p, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub horizon: usize,
    /// Bound on the discounted reward beyond the horizon.
    pub tail_bound: f64,
}

impl McEstimate {
    /// Reduce per-sample values (one per path, or one per antithetic pair)
    /// in index order.
    pub fn from_samples(samples: &[f64], paths: usize, horizon: usize, tail_bound: f64) -> Self {
        let n = samples.len() as f64;
        let mean = pairwise_sum(samples) / n;
        let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let stderr = if samples.len() > 1 { libm::sqrt(pairwise_sum(&dev) / (n - 1.0) / n) } else { 0.0 };
        McEstimate { mean, stderr, paths, horizon, tail_bound }
    }
}

/// `β^T c_r sup b / (1 - β c_b)`.
pub fn tail_bound(model: &Model, horizon: usize) -> f64 {
    let rate = 1.0 - model.beta * model.bound_cb;
    libm::pow(model.beta, horizon as f64) * model.bound_cr * sup_bound(model) / rate
}

fn sup_bound(model: &Model) -> f64 {
    let (lo, hi) = model.state_range;
    (0..model.num_discrete())
        .map(|p| {
            let b = model.bound(p);
            if b.slope == 0.0 {
                b.constant
            } else {
                b.eval(lo).max(b.eval(hi))
            }
        })
        .fold(0.0, f64::max)
}

/// Smallest horizon whose [`tail_bound`] is at most `cap`.
pub fn default_horizon(model: &Model, cap: f64) -> Result<usize> {
    let rate = 1.0 - model.beta * model.bound_cb;
    let scale = model.bound_cr * sup_bound(model) / rate;
    if !scale.is_finite() || !(cap > 0.0) || !(rate > 0.0) {
        return Err(Error::InvalidArgument(format!("no finite horizon reaches tail bound {cap}")));
    }
    if scale <= cap {
        return Ok(0);
    }
    let t = libm::ceil(libm::log(cap / scale) / libm::log(model.beta));
    let mut t = t.max(0.0) as usize;
    while t > 0 && tail_bound(model, t - 1) <= cap {
        t -= 1;
    }
    while tail_bound(model, t) > cap {
        t += 1;
    }
    Ok(t)
}

/// Simulation settings shared by every sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub p0: usize,
    pub z0: f64,
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    /// Pair path `2j` with `2j + 1` using `u` and `1 - u` disturbances.
    pub antithetic: bool,
}

impl McConfig {
    pub fn num_samples(&self) -> usize {
        if self.antithetic {
            self.paths / 2
        } else {
            self.paths
        }
    }

    fn check(&self, model: &Model) -> Result<()> {
        if self.paths < MIN_PATHS {
            return Err(Error::InvalidArgument(format!("need at least {MIN_PATHS} paths, got {}", self.paths)));
        }
        if self.antithetic && !self.paths.is_multiple_of(2) {
            return Err(Error::InvalidArgument("antithetic sampling needs an even path count".into()));
        }
        if self.p0 >= model.num_discrete() || !self.z0.is_finite() {
            return Err(Error::InvalidArgument(format!("bad start state ({}, {})", self.p0, self.z0)));
        }
        Ok(())
    }
}

/// Discrete states that are absorbing under every action and pay nothing.
fn dead_states(model: &Model) -> Vec<bool> {
    (0..model.num_discrete())
        .map(|p| {
            (0..model.num_actions()).all(|a| {
                model.alpha(a, p, p) == 1.0
                    && model.reward(p, a).pieces().iter().all(|l| l.slope == 0.0 && l.intercept == 0.0)
            })
        })
        .collect()
}

struct PathSim<'a, D: ?Sized, P: ?Sized> {
    model: &'a Model,
    dist: &'a D,
    policy: &'a P,
    dead: Vec<bool>,
    cfg: McConfig,
}

impl<D: Distribution + ?Sized, P: Policy + ?Sized> PathSim<'_, D, P> {
    fn sample(&self, i: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(i as u64);
        if !self.cfg.antithetic {
            return self.path(&mut rng, false);
        }
        let mut twin = rng.clone();
        0.5 * (self.path(&mut rng, false) + self.path(&mut twin, true))
    }

    fn path(&self, rng: &mut ChaCha8Rng, flip: bool) -> f64 {
        let m = self.model;
        let (mut p, mut z) = (self.cfg.p0, self.cfg.z0);
        let mut disc = 1.0;
        let mut total = 0.0;
        for _ in 0..self.cfg.horizon {
            if self.dead[p] {
                break;
            }
            let a = self.policy.action(p, z);
            total += disc * m.reward(p, a).eval(z);
            disc *= m.beta;
            let row = m.alpha_row(a, p);
            p = if row.iter().filter(|&&x| x > 0.0).count() == 1 {
                row.iter().position(|&x| x > 0.0).unwrap()
            } else {
                pick(row, open_unit(rng))
            };
            let u = open_unit(rng);
            let w = self.dist.quantile(if flip { 1.0 - u } else { u });
            z = m.apply_dynamics(w, z);
        }
        total
    }
}

fn pick(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &x) in row.iter().enumerate() {
        acc += x;
        if u < acc {
            return j;
        }
    }
    row.iter().rposition(|&x| x > 0.0).unwrap_or(row.len() - 1)
}

/// Value of sample `i` (a path, or an antithetic pair average). Exposed so
/// callers can evaluate samples in parallel and reduce with
/// [`McEstimate::from_samples`].
pub fn mc_sample<D: Distribution + ?Sized, P: Policy + ?Sized>(
    model: &Model,
    dist: &D,
    policy: &P,
    cfg: &McConfig,
    i: usize,
) -> f64 {
    PathSim { model, dist, policy, dead: dead_states(model), cfg: *cfg }.sample(i)
}

/// Batch form of [`mc_sample`] for the index range `range`.
pub fn mc_samples<D: Distribution + ?Sized, P: Policy + ?Sized>(
    model: &Model,
    dist: &D,
    policy: &P,
    cfg: &McConfig,
    range: core::ops::Range<usize>,
) -> Vec<f64> {
    let sim = PathSim { model, dist, policy, dead: dead_states(model), cfg: *cfg };
    range.map(|i| sim.sample(i)).collect()
}

/// Discounted reward of `policy` from `(p0, z0)`, averaged over simulated
/// paths with exact disturbances, truncated at `cfg.horizon`.
pub fn mc_policy_value<D: Distribution + ?Sized, P: Policy + ?Sized>(
    model: &Model,
    dist: &D,
    policy: &P,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.check(model)?;
    let samples = mc_samples(model, dist, policy, cfg, 0..cfg.num_samples());
    Ok(McEstimate::from_samples(&samples, cfg.paths, cfg.horizon, tail_bound(model, cfg.horizon)))
}

/// Checks a simulation configuration the way [`mc_policy_value`] does.
pub fn check_mc_config(model: &Model, cfg: &McConfig) -> Result<()> {
    cfg.check(model)
}

/// Value function tabulated on a grid, read back by chord interpolation
/// with the first chord extended to the left and a constant right tail.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTable {
    grid: Grid,
    uniform_step: Option<f64>,
    /// `values[p][i]` at `grid[i]`.
    pub values: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

impl DenseTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eval(&self, p: usize, z: f64) -> f64 {
        interp_row(self.grid.points(), self.uniform_step, &self.values[p], z)
    }
}

fn uniform_step(points: &[f64]) -> Option<f64> {
    let h = (points[points.len() - 1] - points[0]) / (points.len() - 1) as f64;
    let uniform = points.iter().enumerate().all(|(i, &g)| (g - (points[0] + h * i as f64)).abs() <= 1e-9 * h);
    uniform.then_some(h)
}

fn interp_row(g: &[f64], step: Option<f64>, v: &[f64], z: f64) -> f64 {
    let m = g.len();
    if z >= g[m - 1] {
        return v[m - 1];
    }
    let i = if z <= g[0] {
        0
    } else {
        match step {
            Some(h) => {
                let i = ((z - g[0]) / h) as usize;
                // guard the float division against landing one cell off
                if i + 1 < m && z > g[i + 1] {
                    i + 1
                } else if i > 0 && z < g[i] {
                    i - 1
                } else {
                    i.min(m - 2)
                }
            }
            None => g.partition_point(|&x| x <= z).saturating_sub(1).min(m - 2),
        }
    };
    let t = (z - g[i]) / (g[i + 1] - g[i]);
    v[i] + t * (v[i + 1] - v[i])
}

/// Plain value iteration `v ← max_a [r + β Σ α Σ ρ v(f(w, ·))]` with values
/// stored on `grid`, started from the reward and stopped when no grid value
/// moves by more than `tol`.
pub fn dense_grid_vi(model: &Model, sampling: &Sampling, grid: &Grid, tol: f64, max_iter: usize) -> Result<DenseTable> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let g = grid.points();
    let step = uniform_step(g);
    let (np, na) = (model.num_discrete(), model.num_actions());
    let rewards: Vec<Vec<Vec<f64>>> =
        (0..np).map(|p| (0..na).map(|a| g.iter().map(|&z| model.reward(p, a).eval(z)).collect()).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..np)
        .map(|p| (0..g.len()).map(|i| (0..na).map(|a| rewards[p][a][i]).fold(f64::NEG_INFINITY, f64::max)).collect())
        .collect();
    // successor positions depend only on (w, z), not on the iterate
    let next_z: Vec<Vec<f64>> =
        g.iter().map(|&z| sampling.points().iter().map(|&w| model.apply_dynamics(w, z)).collect()).collect();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut expect = vec![vec![0.0; g.len()]; np];
    while iterations < max_iter {
        for (q, row) in expect.iter_mut().enumerate() {
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = sampling
                    .weights()
                    .iter()
                    .zip(&next_z[i])
                    .map(|(&rho, &zn)| rho * interp_row(g, step, &v[q], zn))
                    .sum();
            }
        }
        let mut next = vec![vec![0.0; g.len()]; np];
        for p in 0..np {
            for i in 0..g.len() {
                let mut best = f64::NEG_INFINITY;
                for a in 0..na {
                    let cont: f64 = model.alpha_row(a, p).iter().enumerate().map(|(q, &al)| al * expect[q][i]).sum();
                    best = best.max(rewards[p][a][i] + model.beta * cont);
                }
                next[p][i] = best;
            }
        }
        residual =
            next.iter().zip(&v).flat_map(|(a, b)| a.iter().zip(b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        iterations += 1;
        if residual <= tol {
            break;
        }
    }
    let converged = residual <= tol;
    if !converged {
        log::warn!("dense grid value iteration stopped after {iterations} sweeps, residual {residual}");
    }
    Ok(DenseTable { grid: grid.clone(), uniform_step: step, values: v, iterations, converged, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bermudan::{build_put_model, PutParams, CONTINUE, EXERCISE};
    use crate::sampling::{make_equiprob_partition, make_local_average};

    fn put() -> (Model, crate::dist::LogNormal) {
        build_put_model(PutParams { strike: 40.0, rate: 0.15, vol: 0.2, dt: 0.25 }).unwrap()
    }

    fn cfg(z0: f64, horizon: usize) -> McConfig {
        McConfig { p0: 0, z0, horizon, paths: 200, seed: 7, antithetic: false }
    }

    #[test]
    fn always_exercise_is_deterministic() {
        let (m, d) = put();
        let est = mc_policy_value(&m, &d, &FnPolicy(|_, _| EXERCISE), &cfg(32.0, 100)).unwrap();
        assert_eq!(est.mean, 8.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn never_exercise_is_worthless() {
        let (m, d) = put();
        let est = mc_policy_value(&m, &d, &FnPolicy(|_, _| CONTINUE), &cfg(32.0, 100)).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn horizon_meets_cap() {
        let (m, _) = put();
        let t = default_horizon(&m, 1e-4).unwrap();
        assert!(tail_bound(&m, t) <= 1e-4);
        assert!(tail_bound(&m, t - 1) > 1e-4);
        // 40 / (1 - β) · β^T ≤ 1e-4
        let beta = m.beta;
        let direct = libm::ceil(libm::log(1e-4 * (1.0 - beta) / 40.0) / libm::log(beta)) as usize;
        assert_eq!(t, direct);
    }

    #[test]
    fn samples_are_order_independent() {
        let (m, d) = put();
        let policy = FnPolicy(|_, z: f64| if z < 36.0 { EXERCISE } else { CONTINUE });
        let c = McConfig { antithetic: true, ..cfg(40.0, 200) };
        let all = mc_samples(&m, &d, &policy, &c, 0..100);
        let back: Vec<f64> = (0..100).rev().map(|i| mc_sample(&m, &d, &policy, &c, i)).collect();
        for (i, x) in all.iter().enumerate() {
            assert_eq!(*x, back[99 - i]);
        }
        let a = mc_policy_value(&m, &d, &policy, &c).unwrap();
        let b = mc_policy_value(&m, &d, &policy, &c).unwrap();
        assert_eq!(a, b);
        assert!(mc_policy_value(&m, &d, &policy, &McConfig { paths: 10, ..c }).is_err());
    }

    #[test]
    fn threshold_policy_value_is_plausible() {
        let (m, d) = put();
        let policy = FnPolicy(|_, z: f64| if z < 36.0 { EXERCISE } else { CONTINUE });
        let c = McConfig { paths: 20_000, ..cfg(40.0, default_horizon(&m, 1e-4).unwrap()) };
        let est = mc_policy_value(&m, &d, &policy, &c).unwrap();
        // any feasible policy sits below the option value (~1.7)
        assert!(est.mean > 1.2 && est.mean < 1.75 + 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn dense_vi_zero_discount_is_reward() {
        let (m, d) = put();
        let mut m0 = m.clone();
        m0.beta = 0.0;
        let s = make_local_average(&make_equiprob_partition(&d, 50).unwrap(), &d).unwrap();
        let grid = Grid::uniform(20.0, 60.0, 81).unwrap();
        let t = dense_grid_vi(&m0, &s, &grid, 1e-9, 10).unwrap();
        assert!(t.converged);
        for (i, &z) in grid.points().iter().enumerate() {
            assert_eq!(t.values[0][i], (40.0 - z).max(0.0));
            assert_eq!(t.values[1][i], 0.0);
        }
    }

    #[test]
    fn dense_vi_is_deterministic_and_sane() {
        let (m, d) = put();
        let s = make_local_average(&make_equiprob_partition(&d, 200).unwrap(), &d).unwrap();
        let grid = Grid::uniform(10.0, 130.0, 241).unwrap();
        let a = dense_grid_vi(&m, &s, &grid, 1e-7, 5000).unwrap();
        let b = dense_grid_vi(&m, &s, &grid, 1e-7, 5000).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
        assert!((a.eval(0, 32.0) - 8.0).abs() < 1e-9);
        let v40 = a.eval(0, 40.0);
        assert!(v40 > 1.6 && v40 < 1.8, "{v40}");
    }

    #[test]
    fn interp_row_matches_generic_search() {
        let g: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = g.iter().map(|x| x * x).collect();
        let h = uniform_step(&g);
        assert!(h.is_some());
        for k in 0..400 {
            let z = -0.5 + k as f64 * 0.005;
            assert!((interp_row(&g, h, &v, z) - interp_row(&g, None, &v, z)).abs() < 1e-12, "z={z}");
        }
    }
}
