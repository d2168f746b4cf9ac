//! Finite disturbance samplings `(points, weights)` and the interval
//! partitions they are built from.
//!
//! Four constructions are provided:
//!
//! * [`make_monte_carlo`]: i.i.d. draws with equal weights;
//! * [`make_representative`]: one point per (bounded) component, weighted by
//!   the component probability;
//! * [`make_local_average`]: the conditional mean of each component, which
//!   for a fixed partition minimises the mean square quantisation error and
//!   under-estimates expectations of convex functions (Jensen);
//! * [`make_extreme_upper`]: every component's mass split between its two
//!   endpoints so that the conditional mean is preserved (a mean-preserving
//!   spread), which over-estimates expectations of convex functions.
//!
//! Components are half-open intervals `(w_{k-1}, w_k]`.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Tolerance on probabilities summing to one.
pub const PROB_SUM_TOL: f64 = 1e-10;
/// Computed extreme-point weights below `-NEG_WEIGHT_TOL` are an error.
pub const NEG_WEIGHT_TOL: f64 = 1e-12;

/// Which construction produced a [`Sampling`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingKind {
    MonteCarlo,
    Representative,
    LocalAverage,
    ExtremeUpper,
}

impl SamplingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingKind::MonteCarlo => "monte_carlo",
            SamplingKind::Representative => "representative",
            SamplingKind::LocalAverage => "local_average",
            SamplingKind::ExtremeUpper => "extreme_upper",
        }
    }
}

/// A discretised disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    points: Vec<f64>,
    weights: Vec<f64>,
    kind: SamplingKind,
}

impl Sampling {
    pub fn new(points: Vec<f64>, weights: Vec<f64>, kind: SamplingKind) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("weights must be non-negative and points finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidArgument(alloc::format!("weights sum to {total}, not 1")));
        }
        Ok(Sampling { points, weights, kind })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> SamplingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ_k weight_k * g(point_k)`.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&w, &rho)| rho * g(w)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|w| w)
    }
}

/// Ordered interval partition with component probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    boundaries: Vec<f64>,
    probs: Vec<f64>,
}

impl Partition {
    /// `boundaries` has `n + 1` strictly increasing entries (ends may be
    /// infinite); `probs` has `n` positive entries summing to one.
    pub fn new(boundaries: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 || probs.len() + 1 != boundaries.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} boundaries for {} components",
                boundaries.len(),
                probs.len()
            )));
        }
        if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("partition boundaries must be strictly increasing".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidArgument("every component needs positive probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidArgument(alloc::format!("component probabilities sum to {total}")));
        }
        Ok(Partition { boundaries, probs })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `(w_{k-1}, w_k]`
    pub fn component(&self, k: usize) -> (f64, f64) {
        (self.boundaries[k], self.boundaries[k + 1])
    }

    pub fn is_bounded(&self) -> bool {
        self.boundaries[0].is_finite() && self.boundaries[self.boundaries.len() - 1].is_finite()
    }

    /// Largest component width.
    pub fn diameter(&self) -> f64 {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Uniform variate on the open interval `(0, 1)` from 53 random bits.
#[inline]
pub(crate) fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `n` i.i.d. draws by inverse transform of a seeded ChaCha8 stream, each
/// with weight `1/n`.
pub fn make_monte_carlo<D: Distribution + ?Sized>(dist: &D, n: usize, seed: u64) -> Result<Sampling> {
    if n == 0 {
        return Err(Error::InvalidArgument("sampling size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| dist.quantile(open_unit(&mut rng))).collect();
    Sampling::new(points, alloc::vec![1.0 / n as f64; n], SamplingKind::MonteCarlo)
}

/// `n` components of probability `1/n` each, with boundaries at the
/// `k/n` quantiles. Quantiles that fail (non-finite or out of order) are
/// clipped to the support.
pub fn make_equiprob_partition<D: Distribution + ?Sized>(dist: &D, n: usize) -> Result<Partition> {
    if n == 0 {
        return Err(Error::InvalidArgument("partition size must be at least 1".into()));
    }
    let (lo, hi) = dist.support();
    let mut boundaries = Vec::with_capacity(n + 1);
    boundaries.push(lo);
    for k in 1..n {
        let q = dist.quantile(k as f64 / n as f64);
        let q = if q.is_nan() { lo } else { q.clamp(lo, hi) };
        boundaries.push(q);
    }
    boundaries.push(hi);
    Partition::new(boundaries, alloc::vec![1.0 / n as f64; n])
}

/// Where in a component a representative point is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepresentativeRule {
    Midpoint,
    /// The left endpoint, even though it is excluded from the half-open
    /// component.
    Left,
    Right,
}

pub fn make_representative(part: &Partition, rule: RepresentativeRule) -> Result<Sampling> {
    if !part.is_bounded() {
        return Err(Error::UnboundedComponent);
    }
    let points = (0..part.len())
        .map(|k| {
            let (a, b) = part.component(k);
            match rule {
                RepresentativeRule::Midpoint => 0.5 * (a + b),
                RepresentativeRule::Left => a,
                RepresentativeRule::Right => b,
            }
        })
        .collect();
    Sampling::new(points, part.probs.clone(), SamplingKind::Representative)
}

/// Conditional means of the components, weighted by component probability.
pub fn make_local_average<D: Distribution + ?Sized>(part: &Partition, dist: &D) -> Result<Sampling> {
    let points = (0..part.len())
        .map(|k| {
            let (a, b) = part.component(k);
            dist.cond_mean(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    Sampling::new(points, part.probs.clone(), SamplingKind::LocalAverage)
}

fn same_boundary(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-10 * a.abs().max(1.0)
}

/// True iff every boundary of `coarse` is (within `1e-10`) a boundary of
/// `fine`, i.e. every fine component lies inside a coarse one.
pub fn refines(fine: &Partition, coarse: &Partition) -> bool {
    let fb = fine.boundaries();
    coarse.boundaries().iter().all(|&c| {
        let i = fb.partition_point(|&f| f < c);
        (i < fb.len() && same_boundary(fb[i], c)) || (i > 0 && same_boundary(fb[i - 1], c))
    })
}

/// A law restricted to `[lo, hi]` and renormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDistribution<D> {
    base: D,
    lo: f64,
    hi: f64,
    // P(W <= lo) under the base law
    p_lo: f64,
    mass: f64,
    normalizer: f64,
}

impl<D: Distribution> TruncatedDistribution<D> {
    pub fn base(&self) -> &D {
        &self.base
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `1 / P(lo <= W <= hi)`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `Λ(a, b) = E[W 1(W ∈ [a, b])]` under the truncated law.
    pub fn lambda(&self, a: f64, b: f64) -> f64 {
        self.partial_mean(a, b)
    }
}

impl<D: Distribution> Distribution for TruncatedDistribution<D> {
    fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            0.0
        } else if x >= self.hi {
            1.0
        } else {
            (self.base.prob(self.lo, x) * self.normalizer).min(1.0)
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            self.lo
        } else if u >= 1.0 {
            self.hi
        } else {
            self.base.quantile(self.p_lo + u * self.mass).clamp(self.lo, self.hi)
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn prob(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.lo), b.min(self.hi));
        if b <= a {
            return 0.0;
        }
        self.base.prob(a, b) * self.normalizer
    }

    fn partial_mean(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.lo), b.min(self.hi));
        if b <= a {
            return 0.0;
        }
        self.base.partial_mean(a, b) * self.normalizer
    }

    fn mean(&self) -> Option<f64> {
        Some(self.base.partial_mean(self.lo, self.hi) * self.normalizer)
    }
}

/// Keep the central `mass` of `dist`, cutting `(1 - mass) / 2` from each
/// tail.
pub fn truncate<D: Distribution>(dist: D, mass: f64) -> Result<TruncatedDistribution<D>> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("truncation mass {mass} must lie in (0, 1)")));
    }
    let tail = 0.5 * (1.0 - mass);
    let lo = dist.quantile(tail);
    let hi = dist.quantile(1.0 - tail);
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument("truncation quantiles are not finite".into()));
    }
    Ok(TruncatedDistribution { base: dist, lo, hi, p_lo: tail, mass, normalizer: 1.0 / mass })
}

/// Mean-preserving spread over the endpoints `e_1 < … < e_{n+1}` of an
/// equal-probability partition of a bounded law.
///
/// Component `k = [e_k, e_{k+1}]` sends mass `(e_{k+1}/n - Λ_k)/(e_{k+1}-e_k)`
/// to its left endpoint and `(Λ_k - e_k/n)/(e_{k+1}-e_k)` to its right one,
/// where `Λ_k = E[W 1(W ∈ [e_k, e_{k+1}])]`; this is the expectation of the
/// barycentric weights `(e_{k+1}-w)/(e_{k+1}-e_k)` and `(w-e_k)/(e_{k+1}-e_k)`.
pub fn make_extreme_upper<D: Distribution + ?Sized>(part: &Partition, tdist: &D) -> Result<Sampling> {
    if !part.is_bounded() {
        return Err(Error::UnboundedComponent);
    }
    let n = part.len();
    let target = 1.0 / n as f64;
    for k in 0..n {
        let (a, b) = part.component(k);
        let p_part = part.probs()[k];
        let p_law = tdist.prob(a, b);
        if (p_part - target).abs() > 1e-12 || (p_law - target).abs() > 1e-6 * target {
            return Err(Error::NotEquiprobable);
        }
    }
    let e = part.boundaries();
    let mut weights = alloc::vec![0.0; n + 1];
    for k in 0..n {
        let (a, b) = (e[k], e[k + 1]);
        let rho = part.probs()[k];
        let lambda = tdist.partial_mean(a, b);
        let width = b - a;
        weights[k] += (b * rho - lambda) / width;
        weights[k + 1] += (lambda - a * rho) / width;
    }
    for (j, w) in weights.iter_mut().enumerate() {
        if *w < -NEG_WEIGHT_TOL {
            return Err(Error::NegativeWeight { index: j, weight: *w });
        }
        *w = w.max(0.0);
    }
    Sampling::new(e.to_vec(), weights, SamplingKind::ExtremeUpper)
}
