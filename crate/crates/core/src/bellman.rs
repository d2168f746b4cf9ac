//! The modified transition operator, the two function approximation
//! schemes, the modified Bellman operator and its fixed-point iteration.
//!
//! For a value function `v` (one convex function per discrete state) the
//! modified Bellman operator is
//!
//! ```text
//! (T v)(p, z) = max_a [ S r(p, ·, a)(z) + β · S (K_a v)(p, ·)(z) ]
//! (K_a v)(p, z) = Σ_p' α_a(p, p') Σ_k ρ_k v(p', f(w_k, z))
//! ```
//!
//! where `S` is either the tangent envelope on a grid or the knot
//! interpolant on a grid. `S` only ever needs values and subgradients of its
//! argument at grid points, so `K_a v` is probed there and never formed as a
//! function.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{BoundFn, Model};
use crate::pwl::{AffinePiece, CompositeConvex, ConvexFunction, ConvexPwl, KnotInterp, MaxAffine, Summand, TIE_TOL};
use crate::sampling::Sampling;

/// Default cap on value-iteration sweeps.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Strictly increasing grid of at least two state points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a grid needs at least two points".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("grid points must be finite and strictly increasing".into()));
        }
        Ok(Grid { points })
    }

    /// `count` equally spaced points from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(lo < hi) {
            return Err(Error::InvalidArgument(format!("bad uniform grid [{lo}, {hi}] x {count}")));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
        points[count - 1] = hi;
        Grid::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    /// True iff every point of `coarse` is (within 1e-10) a point of `self`.
    pub fn refines(&self, coarse: &Grid) -> bool {
        coarse.points.iter().all(|&c| {
            let i = self.points.partition_point(|&f| f < c - 1e-10 * c.abs().max(1.0));
            i < self.points.len() && (self.points[i] - c).abs() <= 1e-10 * c.abs().max(1.0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// Maximum of tangents at the grid points; under-estimates convex functions.
    Tangent,
    /// Chord interpolation on the grid; over-estimates non-increasing convex
    /// functions.
    Interp,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::Tangent => "tangent",
            SchemeKind::Interp => "interp",
        }
    }
}

/// What the stopping residual compares between consecutive sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualRule {
    /// Values of `K_a v` at the grid points, and for the tangent scheme
    /// also its slopes there.
    #[default]
    GridValues,
    /// For the tangent scheme, the coefficients (intercept and slope) of the
    /// tangents at the grid points; values only for interpolation.
    TangentCoefficients,
    /// Values at the grid points only. Max-slope tangents can flip between
    /// two subgradients forever when a successor point sits on a kink, so
    /// this is the rule to use for very small tolerances.
    Values,
}

impl ResidualRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResidualRule::GridValues => "grid_values",
            ResidualRule::TangentCoefficients => "tangent_coefficients",
            ResidualRule::Values => "values",
        }
    }
}

/// Which functions the scheme approximates at each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApproxTarget {
    /// `S r(p, ·, a)` and `S K_a v(p, ·)` separately for every action, then
    /// the exact maximum over actions.
    #[default]
    PerAction,
    /// The whole maximand `max_a [r + β K_a v](p, ·)`, one function per
    /// discrete state. Bounds are looser, since the kink of the maximum at the
    /// decision boundary is smoothed by the scheme.
    Maximand,
}

impl ApproxTarget {
    pub fn as_str(&self) -> &'static str {
        match self {
            ApproxTarget::PerAction => "per_action",
            ApproxTarget::Maximand => "maximand",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub grid: Grid,
    /// Exact form of the approximated functions left of the first grid
    /// point (interpolation scheme only).
    pub left_ext: Option<AffinePiece>,
    /// Add the identically-zero piece to every tangent envelope.
    pub include_zero_tangent: bool,
    pub residual: ResidualRule,
    pub target: ApproxTarget,
}

impl SchemeConfig {
    pub fn tangent(grid: Grid) -> Self {
        SchemeConfig {
            kind: SchemeKind::Tangent,
            grid,
            left_ext: None,
            include_zero_tangent: true,
            residual: ResidualRule::GridValues,
            target: ApproxTarget::PerAction,
        }
    }

    pub fn interp(grid: Grid, left_ext: AffinePiece) -> Self {
        SchemeConfig {
            kind: SchemeKind::Interp,
            grid,
            left_ext: Some(left_ext),
            include_zero_tangent: false,
            residual: ResidualRule::GridValues,
            target: ApproxTarget::PerAction,
        }
    }

    pub fn with_target(mut self, target: ApproxTarget) -> Self {
        self.target = target;
        self
    }

    pub fn with_residual(mut self, residual: ResidualRule) -> Self {
        self.residual = residual;
        self
    }
}

/// Maximum of the tangents of `h` at the grid points (max-slope
/// subgradients), plus the zero piece if requested. Never exceeds `h`.
pub fn tangent_approx<F: ConvexFunction + ?Sized>(h: &F, grid: &Grid, include_zero: bool) -> MaxAffine {
    let probes: Vec<(f64, f64)> = grid.points().iter().map(|&g| h.value_and_slope(g)).collect();
    tangents_from_probes(grid, &probes, include_zero)
}

fn tangents_from_probes(grid: &Grid, probes: &[(f64, f64)], include_zero: bool) -> MaxAffine {
    let mut pieces: Vec<AffinePiece> =
        grid.points().iter().zip(probes).map(|(&g, &(value, slope))| AffinePiece::through(slope, g, value)).collect();
    if include_zero {
        pieces.push(AffinePiece::ZERO);
    }
    MaxAffine::new(pieces).expect("finite probes give finite tangents").simplify()
}

/// Knot interpolant of `h` on the scheme grid with the configured left
/// extension. If `h` does not pass through the left extension at the first
/// grid point a warning is logged and the first chord is extended to the
/// left instead.
pub fn interp_approx<F: ConvexFunction + ?Sized>(h: &F, config: &SchemeConfig) -> Result<KnotInterp> {
    let values: Vec<f64> = config.grid.points().iter().map(|&g| h.eval(g)).collect();
    knots_from_values(config, values, true)
}

fn knots_from_values(config: &SchemeConfig, values: Vec<f64>, warn: bool) -> Result<KnotInterp> {
    let left =
        config.left_ext.ok_or_else(|| Error::InvalidArgument("interpolation scheme needs a left extension".into()))?;
    let g = config.grid.points();
    let anchored = if (left.eval(g[0]) - values[0]).abs() <= 1e-9 * (1.0 + values[0].abs()) {
        AffinePiece::through(left.slope, g[0], values[0])
    } else {
        if warn {
            log::warn!(
                "left extension gives {} at z={} but the function is {}; re-anchoring",
                left.eval(g[0]),
                g[0],
                values[0]
            );
        }
        let first_chord = (values[1] - values[0]) / (g[1] - g[0]);
        AffinePiece::through(first_chord, g[0], values[0])
    };
    KnotInterp::new(g.to_vec(), values, anchored)
}

fn approx_from_probes(config: &SchemeConfig, probes: &[(f64, f64)], warn: bool) -> Result<ConvexPwl> {
    Ok(match config.kind {
        SchemeKind::Tangent => tangents_from_probes(&config.grid, probes, config.include_zero_tangent).into(),
        SchemeKind::Interp => knots_from_values(config, probes.iter().map(|p| p.0).collect(), warn)?.into(),
    })
}

/// Apply the configured scheme to an arbitrary convex function.
pub fn approximate<F: ConvexFunction + ?Sized>(h: &F, config: &SchemeConfig) -> Result<ConvexPwl> {
    Ok(match config.kind {
        SchemeKind::Tangent => tangent_approx(h, &config.grid, config.include_zero_tangent).into(),
        SchemeKind::Interp => interp_approx(h, config)?.into(),
    })
}

fn sampling_for(samplings: &[Sampling], a: usize) -> &Sampling {
    if samplings.len() == 1 {
        &samplings[0]
    } else {
        &samplings[a]
    }
}

fn check_samplings(model: &Model, samplings: &[Sampling]) -> Result<()> {
    if samplings.len() == 1 || samplings.len() == model.num_actions() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{} samplings for {} actions (pass one per action, or one shared)",
            samplings.len(),
            model.num_actions()
        )))
    }
}

/// `(K_a v)(p, z)` and its slope in `z`, by the chain rule through the
/// affine dynamics. `samplings` holds one sampling per action, or a single
/// shared one.
pub fn apply_transition(
    model: &Model,
    samplings: &[Sampling],
    v: &CompositeConvex,
    p: usize,
    a: usize,
    z: f64,
) -> (f64, f64) {
    let s = sampling_for(samplings, a);
    let dynamics = model.dynamics;
    let mut value = 0.0;
    let mut slope = 0.0;
    for (next, &alpha) in model.alpha_row(a, p).iter().enumerate() {
        if alpha == 0.0 {
            continue;
        }
        let (mut ev, mut es) = (0.0, 0.0);
        for (&w, &rho) in s.points().iter().zip(s.weights()) {
            let (val, d) = v.value_and_slope(next, dynamics.apply(w, z));
            ev += rho * val;
            es += rho * dynamics.coef(w) * d;
        }
        value += alpha * ev;
        slope += alpha * es;
    }
    (value, slope)
}

/// The modified Bellman operator with the reward approximations cached.
#[derive(Debug, Clone)]
pub struct ModifiedBellman<'a> {
    model: &'a Model,
    samplings: &'a [Sampling],
    config: &'a SchemeConfig,
    // S r(p, ·, a) at index p * A + a
    rewards: Vec<ConvexPwl>,
}

/// Values and slopes at every grid point of the functions the scheme
/// approximates: `K_a v` indexed `[p * A + a][i]` for
/// [`ApproxTarget::PerAction`], the maximand indexed `[p][i]` for
/// [`ApproxTarget::Maximand`].
pub type GridProbes = Vec<Vec<(f64, f64)>>;

impl<'a> ModifiedBellman<'a> {
    pub fn new(model: &'a Model, samplings: &'a [Sampling], config: &'a SchemeConfig) -> Result<Self> {
        check_samplings(model, samplings)?;
        let mut rewards = Vec::with_capacity(model.num_discrete() * model.num_actions());
        for p in 0..model.num_discrete() {
            for a in 0..model.num_actions() {
                let r = model.reward(p, a);
                for &k in r.breakpoints() {
                    if config.grid.points().iter().any(|&g| (g - k).abs() <= 1e-9) {
                        log::debug!("grid point within 1e-9 of a reward kink at z={k} (p={p}, a={a})");
                    }
                }
                let probes: Vec<(f64, f64)> = config.grid.points().iter().map(|&g| r.value_and_slope(g)).collect();
                rewards.push(approx_from_probes(config, &probes, false)?);
            }
        }
        Ok(ModifiedBellman { model, samplings, config, rewards })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn config(&self) -> &SchemeConfig {
        self.config
    }

    /// Cached `S r(p, ·, a)`.
    pub fn reward_approx(&self, p: usize, a: usize) -> &ConvexPwl {
        &self.rewards[p * self.model.num_actions() + a]
    }

    pub fn probe(&self, v: &CompositeConvex) -> GridProbes {
        let (np, na) = (self.model.num_discrete(), self.model.num_actions());
        let grid = self.config.grid.points();
        match self.config.target {
            ApproxTarget::PerAction => {
                let mut out = Vec::with_capacity(np * na);
                for p in 0..np {
                    for a in 0..na {
                        out.push(
                            grid.iter().map(|&g| apply_transition(self.model, self.samplings, v, p, a, g)).collect(),
                        );
                    }
                }
                out
            }
            ApproxTarget::Maximand => (0..np).map(|p| grid.iter().map(|&g| self.maximand(v, p, g)).collect()).collect(),
        }
    }

    /// `max_a [r + β K_a v](p, z)` with the max-slope subgradient among the
    /// maximising actions.
    fn maximand(&self, v: &CompositeConvex, p: usize, z: f64) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for a in 0..self.model.num_actions() {
            let (rv, rs) = self.model.reward(p, a).value_and_slope(z);
            let (kv, ks) = apply_transition(self.model, self.samplings, v, p, a, z);
            let (val, slope) = (rv + self.model.beta * kv, rs + self.model.beta * ks);
            if (val - best.0).abs() <= TIE_TOL * (1.0 + val.abs()) {
                best.1 = best.1.max(slope);
            } else if val > best.0 {
                best = (val, slope);
            }
        }
        best
    }

    /// Assemble `T v` from grid probes.
    pub fn assemble(&self, probes: &GridProbes, warn: bool) -> Result<CompositeConvex> {
        let (np, na) = (self.model.num_discrete(), self.model.num_actions());
        let mut states = Vec::with_capacity(np);
        for p in 0..np {
            match self.config.target {
                ApproxTarget::PerAction => {
                    let mut summands = Vec::with_capacity(na);
                    for a in 0..na {
                        let idx = p * na + a;
                        let cont = approx_from_probes(self.config, &probes[idx], warn)?;
                        summands.push(Summand::new(self.rewards[idx].clone(), cont, self.model.beta));
                    }
                    states.push(summands);
                }
                ApproxTarget::Maximand => {
                    let whole = approx_from_probes(self.config, &probes[p], warn)?;
                    states.push(alloc::vec![Summand::new(whole, ConvexPwl::zero(), self.model.beta)]);
                }
            }
        }
        CompositeConvex::new(states)
    }

    pub fn step(&self, v: &CompositeConvex) -> Result<CompositeConvex> {
        self.step_with_probes(v).map(|(f, _)| f)
    }

    pub fn step_with_probes(&self, v: &CompositeConvex) -> Result<(CompositeConvex, GridProbes)> {
        if v.num_states() != self.model.num_discrete() {
            return Err(Error::DimensionMismatch(format!(
                "value function has {} states, model has {}",
                v.num_states(),
                self.model.num_discrete()
            )));
        }
        let probes = self.probe(v);
        // Continuation functions routinely miss the reward's left extension
        // at the first grid point; that is expected, so stay quiet here.
        let next = self.assemble(&probes, false)?;
        Ok((next, probes))
    }

    /// Stopping residual between consecutive probe sets, per
    /// [`ResidualRule`]; the interpolation scheme always compares values only.
    /// Per-action probes are compared after discounting, i.e. as the change
    /// of the continuation term `β S K_a v` at the grid points.
    pub fn residual(&self, prev: &GridProbes, next: &GridProbes) -> f64 {
        let grid = self.config.grid.points();
        let rule = match self.config.kind {
            SchemeKind::Tangent => Some(self.config.residual),
            SchemeKind::Interp => None,
        };
        let scale = match self.config.target {
            ApproxTarget::PerAction => self.model.beta,
            ApproxTarget::Maximand => 1.0,
        };
        let r = prev
            .iter()
            .zip(next)
            .flat_map(|(a, b)| a.iter().zip(b).zip(grid))
            .map(|((&(v0, d0), &(v1, d1)), &g)| match rule {
                None | Some(ResidualRule::Values) => (v1 - v0).abs(),
                Some(ResidualRule::GridValues) => (v1 - v0).abs().max((d1 - d0).abs()),
                Some(ResidualRule::TangentCoefficients) => ((v1 - d1 * g) - (v0 - d0 * g)).abs().max((d1 - d0).abs()),
            })
            .fold(0.0, f64::max);
        scale * r
    }

    /// Probes of what a value function already carries: its continuation
    /// parts (zero where it has none) per action, or its own values for the
    /// maximand target.
    fn carried_probes(&self, v: &CompositeConvex) -> GridProbes {
        let (np, na) = (self.model.num_discrete(), self.model.num_actions());
        let grid = self.config.grid.points();
        if self.config.target == ApproxTarget::Maximand {
            return (0..np).map(|p| grid.iter().map(|&g| v.value_and_slope(p, g)).collect()).collect();
        }
        let mut out = Vec::with_capacity(np * na);
        for p in 0..np {
            for a in 0..na {
                out.push(match v.summands(p).get(a) {
                    Some(s) if v.summands(p).len() == na => grid.iter().map(|&g| s.cont.value_and_slope(g)).collect(),
                    _ => alloc::vec![(0.0, 0.0); grid.len()],
                });
            }
        }
        out
    }
}

/// One application of the modified Bellman operator.
pub fn bellman_step(
    model: &Model,
    samplings: &[Sampling],
    config: &SchemeConfig,
    v: &CompositeConvex,
) -> Result<CompositeConvex> {
    ModifiedBellman::new(model, samplings, config)?.step(v)
}

/// The reward function as a value function: `v_0(p, z) = max_a r(p, z, a)`.
pub fn reward_seed(model: &Model) -> CompositeConvex {
    let states = (0..model.num_discrete())
        .map(|p| {
            (0..model.num_actions())
                .map(|a| Summand::new(model.reward(p, a).clone().into(), ConvexPwl::zero(), model.beta))
                .collect()
        })
        .collect();
    CompositeConvex::new(states).expect("model has states and actions")
}

/// Output of [`solve_fixed_point`].
#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub value: CompositeConvex,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub scheme: SchemeConfig,
    pub sampling_id: String,
}

impl FixedPointResult {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }
}

fn sampling_id(samplings: &[Sampling]) -> String {
    let s = &samplings[0];
    format!("{}:n={}", s.kind().as_str(), s.len())
}

/// Iterate the modified Bellman operator from `v0` until the grid residual
/// (see [`ModifiedBellman::residual`]) is at most `tol`, or `max_iter`
/// sweeps have been made. Non-convergence is reported through
/// [`FixedPointResult::converged`], not as an error.
pub fn solve_fixed_point(
    model: &Model,
    samplings: &[Sampling],
    config: &SchemeConfig,
    v0: &CompositeConvex,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let op = ModifiedBellman::new(model, samplings, config)?;
    let mut value = v0.clone();
    let mut prev = op.carried_probes(v0);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let (next, probes) = op.step_with_probes(&value)?;
        let r = op.residual(&prev, &probes);
        history.push(r);
        value = next;
        prev = probes;
        if r <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("value iteration stopped after {max_iter} sweeps without reaching tolerance {tol}");
    }
    Ok(FixedPointResult {
        value,
        iterations: history.len(),
        residual_history: history,
        converged,
        scheme: config.clone(),
        sampling_id: sampling_id(samplings),
    })
}

/// Stationary rule choosing the maximising action of `S r + β S K_a v`,
/// the per-action right-hand side of the modified Bellman operator, whatever
/// target the scheme itself uses; ties go to the lowest action index.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    rhs: CompositeConvex,
}

impl GreedyPolicy {
    pub fn new(model: &Model, samplings: &[Sampling], config: &SchemeConfig, v: &CompositeConvex) -> Result<Self> {
        let per_action = config.clone().with_target(ApproxTarget::PerAction);
        Ok(GreedyPolicy { rhs: bellman_step(model, samplings, &per_action, v)? })
    }

    /// Right-hand side value at `(p, z)` for every action.
    pub fn action_values(&self, p: usize, z: f64) -> Vec<f64> {
        self.rhs.summands(p).iter().map(|s| s.eval(z)).collect()
    }

    pub fn action(&self, p: usize, z: f64) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (a, s) in self.rhs.summands(p).iter().enumerate() {
            let v = s.eval(z);
            if v > best_val && (v - best_val).abs() > TIE_TOL * (1.0 + v.abs()) {
                best = a;
                best_val = v;
            }
        }
        best
    }
}

/// Greedy action at a single point; see [`GreedyPolicy`] to reuse the work.
pub fn greedy_policy(
    model: &Model,
    samplings: &[Sampling],
    config: &SchemeConfig,
    v: &CompositeConvex,
    p: usize,
    z: f64,
) -> Result<usize> {
    Ok(GreedyPolicy::new(model, samplings, config, v)?.action(p, z))
}

/// Every state `f(w, g)` reachable in one step from a grid point `g`, over
/// the points of all `samplings`. These are the only states at which the
/// modified Bellman operator reads its argument.
pub fn successor_points(model: &Model, samplings: &[Sampling], grid: &Grid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() * samplings.iter().map(|s| s.len()).sum::<usize>());
    for s in samplings {
        for &g in grid.points() {
            out.extend(s.points().iter().map(|&w| model.apply_dynamics(w, g)));
        }
    }
    out
}

/// `max_{p, z ∈ probes} |v1(p, z) - v2(p, z)| / b(p, z)`.
pub fn weighted_distance(v1: &CompositeConvex, v2: &CompositeConvex, model: &Model, probes: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for p in 0..model.num_discrete() {
        let b = model.bound(p);
        for &z in probes {
            d = d.max((v1.eval(p, z) - v2.eval(p, z)).abs() / b.eval(z));
        }
    }
    d
}

impl ConvexFunction for BoundFn {
    fn eval(&self, z: f64) -> f64 {
        BoundFn::eval(self, z)
    }
    fn subgradient(&self, _z: f64) -> f64 {
        self.slope
    }
}

/// `sup_{p, z ∈ probes} (S b)(p, z) / b(p, z)`.
pub fn approx_bound_norm(model: &Model, config: &SchemeConfig, probes: &[f64]) -> Result<f64> {
    let mut norm: f64 = 0.0;
    for p in 0..model.num_discrete() {
        let b = model.bound(p);
        let mut cfg = config.clone();
        if cfg.kind == SchemeKind::Interp {
            cfg.left_ext = Some(AffinePiece::new(b.slope, b.constant));
        }
        let sb = approximate(&b, &cfg)?;
        for &z in probes {
            norm = norm.max(sb.eval(z).abs() / b.eval(z));
        }
    }
    Ok(norm)
}

/// `β c_b ||S b||_b`, the contraction modulus of the modified operator.
pub fn contraction_modulus(model: &Model, config: &SchemeConfig, probes: &[f64]) -> Result<f64> {
    Ok(model.beta * model.bound_cb * approx_bound_norm(model, config, probes)?)
}
