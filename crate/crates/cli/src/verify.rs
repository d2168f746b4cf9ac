//! Independent checks on a configured run: a Monte Carlo bracket, the
//! sampling-refinement chain and the contraction ratio.

use std::fmt;

use convexvi_core::bermudan::UNEXERCISED;
use convexvi_core::oracle::{self, McConfig, McEstimate, Policy};
use convexvi_core::sampling::{make_equiprob_partition, refines, truncate};
use convexvi_core::{
    bellman_step, contraction_modulus, successor_points, weighted_distance, AffinePiece, CompositeConvex, ConvexPwl,
    Distribution, GreedyPolicy, MaxAffine, Model, ResidualRule, Sampling, SchemeConfig, Summand,
};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{LowerSampling, RunConfig};
use crate::solve::{scheme_for, solve_bound, Bound, Instance, SchemeRun};
use crate::RunError;

/// Slack allowed in the pointwise ordering checks.
pub const ORDER_SLACK: f64 = 1e-6;
/// Slack on the contraction ratio.
pub const CONTRACTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

/// Monte Carlo value of [`oracle::mc_policy_value`], with samples spread
/// over the rayon pool. Samples are collected in index order before the
/// reduction, so the estimate does not depend on the thread count.
pub fn mc_policy_value_par<D, P>(model: &Model, dist: &D, policy: &P, cfg: &McConfig) -> Result<McEstimate, RunError>
where
    D: Distribution + Sync + ?Sized,
    P: Policy + Sync + ?Sized,
{
    oracle::check_mc_config(model, cfg)?;
    const CHUNK: usize = 1024;
    let n = cfg.num_samples();
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| oracle::mc_samples(model, dist, policy, cfg, c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect();
    let samples: Vec<f64> = chunks.concat();
    Ok(McEstimate::from_samples(&samples, cfg.paths, cfg.horizon, oracle::tail_bound(model, cfg.horizon)))
}

/// One start state of the Monte Carlo bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketPoint {
    pub z0: f64,
    pub lower: f64,
    pub upper: f64,
    pub mc: McEstimate,
}

impl BracketPoint {
    /// `lower - 3σ - tail ≤ mc ≤ upper + 3σ`.
    pub fn holds(&self) -> bool {
        let s = 3.0 * self.mc.stderr;
        self.mc.mean >= self.lower - s - self.mc.tail_bound && self.mc.mean <= self.upper + s
    }
}

pub fn check_mc_bracket(points: &[BracketPoint]) -> CheckReport {
    let failing: Vec<String> = points
        .iter()
        .filter(|p| !p.holds())
        .map(|p| format!("z0={} mc={:.5}±{:.5} not in [{:.5}, {:.5}]", p.z0, p.mc.mean, p.mc.stderr, p.lower, p.upper))
        .collect();
    let detail = if failing.is_empty() {
        let worst = points.iter().map(|p| p.mc.stderr).fold(0.0, f64::max);
        format!("{} start prices inside the bracket (max stderr {worst:.5})", points.len())
    } else {
        failing.join("; ")
    };
    CheckReport { name: "mc_bracket", passed: failing.is_empty(), detail }
}

/// Simulates the greedy policy of the lower fixed point from every eval point.
pub fn mc_bracket_points(
    cfg: &RunConfig,
    inst: &Instance,
    lower: &SchemeRun,
    upper: &SchemeRun,
) -> Result<Vec<BracketPoint>, RunError> {
    let scheme = scheme_for(cfg, Bound::Lower);
    let policy = GreedyPolicy::new(&inst.model, std::slice::from_ref(&lower.sampling), &scheme, &lower.result.value)?;
    let horizon = oracle::default_horizon(&inst.model, cfg.verify.tail_bound)?;
    let mut out = Vec::with_capacity(cfg.eval_points.len());
    for (i, &z0) in cfg.eval_points.iter().enumerate() {
        let mc_cfg = McConfig {
            p0: UNEXERCISED,
            z0,
            horizon,
            paths: cfg.verify.paths,
            seed: cfg.seed.wrapping_add(i as u64),
            antithetic: cfg.verify.antithetic,
        };
        let mc = mc_policy_value_par(&inst.model, &inst.dist, &policy, &mc_cfg)?;
        log::info!("z0={z0}: mc={:.5} stderr={:.5}", mc.mean, mc.stderr);
        out.push(BracketPoint { z0, lower: lower.value(z0), upper: upper.value(z0), mc });
    }
    Ok(out)
}

/// `count` equally spaced points across the grid hull.
pub fn probe_points(cfg: &RunConfig, count: usize) -> Vec<f64> {
    let (lo, hi) = cfg.grid.hull();
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Values of lower and upper fixed points at the probes, per chain entry.
#[derive(Debug, Clone)]
pub struct ChainLevel {
    pub n: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Whether both solves met the chain tolerance.
    pub converged: bool,
}

/// The run configuration with the chain's stopping rule: `verify.chain_tol`
/// on grid values, at most `verify.chain_max_iter` sweeps.
pub fn chain_config(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        tol: cfg.verify.chain_tol,
        residual: ResidualRule::Values,
        max_iter: cfg.verify.chain_max_iter,
        ..cfg.clone()
    }
}

pub fn chain_levels(cfg: &RunConfig, inst: &Instance, probes: &[f64]) -> Result<Vec<ChainLevel>, RunError> {
    let cfg = &chain_config(cfg);
    cfg.verify
        .chain
        .iter()
        .map(|&n| {
            let lo = solve_bound(cfg, inst, Bound::Lower, n)?;
            let up = solve_bound(cfg, inst, Bound::Upper, n)?;
            Ok(ChainLevel {
                n,
                lower: probes.iter().map(|&z| lo.value(z)).collect(),
                upper: probes.iter().map(|&z| up.value(z)).collect(),
                converged: lo.result.converged && up.result.converged,
            })
        })
        .collect()
}

/// Lower values non-decreasing and upper values non-increasing along the
/// chain, lower ≤ upper at every level, all up to [`ORDER_SLACK`].
pub fn check_chain(levels: &[ChainLevel], probes: &[f64]) -> CheckReport {
    let mut problems = Vec::new();
    for l in levels {
        for (i, (&a, &b)) in l.lower.iter().zip(&l.upper).enumerate() {
            if a > b + ORDER_SLACK {
                problems.push(format!("n={}: lower {a:.7} > upper {b:.7} at z={}", l.n, probes[i]));
            }
        }
    }
    for w in levels.windows(2) {
        let (c, f) = (&w[0], &w[1]);
        for i in 0..probes.len() {
            if f.lower[i] < c.lower[i] - ORDER_SLACK {
                problems.push(format!(
                    "lower decreases by {:.2e} from n={} to n={} at z={:.3}",
                    c.lower[i] - f.lower[i],
                    c.n,
                    f.n,
                    probes[i]
                ));
            }
            if f.upper[i] > c.upper[i] + ORDER_SLACK {
                problems.push(format!(
                    "upper increases by {:.2e} from n={} to n={} at z={:.3}",
                    f.upper[i] - c.upper[i],
                    c.n,
                    f.n,
                    probes[i]
                ));
            }
        }
    }
    let ns: Vec<String> = levels.iter().map(|l| l.n.to_string()).collect();
    let mut detail = if problems.is_empty() {
        format!("n in {{{}}} ordered at {} probes", ns.join(", "), probes.len())
    } else {
        let count = problems.len();
        problems.truncate(3);
        format!("{} ({count} violations)", problems.join("; "))
    };
    let unconverged: Vec<String> = levels.iter().filter(|l| !l.converged).map(|l| l.n.to_string()).collect();
    if !unconverged.is_empty() {
        detail.push_str(&format!("; chain tolerance not reached for n in {{{}}}", unconverged.join(", ")));
    }
    CheckReport { name: "monotone_chain", passed: problems.is_empty(), detail }
}

/// Whether each chain entry's partition refines the previous one.
pub fn chain_refines(cfg: &RunConfig, inst: &Instance) -> Result<bool, RunError> {
    let t = truncate(inst.dist, cfg.truncation_mass)?;
    for w in cfg.verify.chain.windows(2) {
        let full = refines(&make_equiprob_partition(&inst.dist, w[1])?, &make_equiprob_partition(&inst.dist, w[0])?);
        let trunc = refines(&make_equiprob_partition(&t, w[1])?, &make_equiprob_partition(&t, w[0])?);
        if !(full && trunc) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// A random convex, non-increasing, bounded value function for a
/// two-state model: per state the maximum of a few decreasing lines and a
/// constant floor.
pub fn random_value(rng: &mut ChaCha8Rng, num_states: usize, scale: f64) -> CompositeConvex {
    let states = (0..num_states)
        .map(|_| {
            let k = 1 + (rng.next_u64() % 5) as usize;
            let mut pieces: Vec<AffinePiece> = (0..k)
                .map(|_| {
                    let slope = -unit(rng) * 1.5;
                    let root = scale * (0.5 + 2.5 * unit(rng));
                    AffinePiece::new(slope, -slope * root)
                })
                .collect();
            pieces.push(AffinePiece::new(0.0, scale * 0.25 * unit(rng)));
            let f = MaxAffine::new(pieces).expect("finite pieces").simplify();
            vec![Summand::new(f.into(), ConvexPwl::zero(), 0.0)]
        })
        .collect();
    CompositeConvex::new(states).expect("non-empty states")
}

/// Ratio of one-step output distance (at grid points) to input distance
/// (at every state the step reads).
pub fn contraction_ratio(
    model: &Model,
    samplings: &[Sampling],
    scheme: &SchemeConfig,
    v1: &CompositeConvex,
    v2: &CompositeConvex,
) -> Result<f64, RunError> {
    let inputs = successor_points(model, samplings, &scheme.grid);
    let d_in = weighted_distance(v1, v2, model, &inputs);
    let t1 = bellman_step(model, samplings, scheme, v1)?;
    let t2 = bellman_step(model, samplings, scheme, v2)?;
    let d_out = weighted_distance(&t1, &t2, model, scheme.grid.points());
    Ok(if d_in > 0.0 { d_out / d_in } else { 0.0 })
}

pub fn check_contraction(cfg: &RunConfig, inst: &Instance, n: usize) -> Result<CheckReport, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    let mut bound: f64 = 0.0;
    let mut passed = true;
    for b in [Bound::Lower, Bound::Upper] {
        let s = crate::solve::sampling_for(cfg, inst, b, n)?;
        let scheme = scheme_for(cfg, b);
        let modulus = contraction_modulus(&inst.model, &scheme, &probe_points(cfg, 256))?;
        bound = bound.max(modulus);
        for _ in 0..cfg.verify.contraction_pairs {
            let v1 = random_value(&mut rng, inst.model.num_discrete(), cfg.params.strike);
            let v2 = random_value(&mut rng, inst.model.num_discrete(), cfg.params.strike);
            let r = contraction_ratio(&inst.model, std::slice::from_ref(&s), &scheme, &v1, &v2)?;
            worst = worst.max(r);
            passed &= r <= modulus + CONTRACTION_SLACK;
        }
    }
    Ok(CheckReport {
        name: "contraction",
        passed,
        detail: format!(
            "max ratio {worst:.6} against modulus {bound:.6} over {} pairs per scheme",
            cfg.verify.contraction_pairs
        ),
    })
}

/// Runs the three checks and returns their reports.
pub fn verify(cfg: &RunConfig) -> Result<Vec<CheckReport>, RunError> {
    let inst = Instance::new(cfg)?;
    let mut reports = Vec::new();

    let lower = solve_bound(cfg, &inst, Bound::Lower, cfg.n)?;
    let upper = solve_bound(cfg, &inst, Bound::Upper, cfg.n)?;
    reports.push(check_mc_bracket(&mc_bracket_points(cfg, &inst, &lower, &upper)?));

    let probes = probe_points(cfg, cfg.verify.probes);
    let mut chain = check_chain(&chain_levels(cfg, &inst, &probes)?, &probes);
    if cfg.lower_sampling == LowerSampling::MonteCarlo {
        chain.detail.push_str(" (Monte Carlo lower sampling carries no ordering guarantee)");
    }
    if !chain_refines(cfg, &inst)? {
        chain.passed = false;
        chain.detail = format!("chain {:?} is not a refinement chain; {}", cfg.verify.chain, chain.detail);
    }
    reports.push(chain);

    reports.push(check_contraction(cfg, &inst, cfg.n)?);
    Ok(reports)
}
