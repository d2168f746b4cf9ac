//! Exact one-dimensional convex piecewise-linear functions.
//!
//! Two representations are used by the solver: [`MaxAffine`], the pointwise
//! maximum of affine pieces (tangent scheme), and [`KnotInterp`], chord
//! interpolation between knots with an affine left extension and a constant
//! right tail (interpolation scheme). [`CompositeConvex`] holds one value
//! function per discrete state as a maximum over actions of
//! `reward(z) + discount * continuation(z)`; sums are never formed
//! symbolically.
//!
//! Subgradients are always the *largest* active slope, so that probing a
//! function at a kink is deterministic.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative tolerance used to decide that two values are tied.
pub const TIE_TOL: f64 = 1e-12;

#[inline]
fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * (1.0 + a.abs().max(b.abs()))
}

/// A scalar convex function that can be probed for values and subgradients.
pub trait ConvexFunction {
    fn eval(&self, z: f64) -> f64;

    /// The largest slope among the pieces active at `z`.
    fn subgradient(&self, z: f64) -> f64;

    fn value_and_slope(&self, z: f64) -> (f64, f64) {
        (self.eval(z), self.subgradient(z))
    }
}

impl<F: ConvexFunction + ?Sized> ConvexFunction for &F {
    fn eval(&self, z: f64) -> f64 {
        (**self).eval(z)
    }
    fn subgradient(&self, z: f64) -> f64 {
        (**self).subgradient(z)
    }
    fn value_and_slope(&self, z: f64) -> (f64, f64) {
        (**self).value_and_slope(z)
    }
}

/// `z ↦ slope * z + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePiece {
    pub slope: f64,
    pub intercept: f64,
}

impl AffinePiece {
    pub const ZERO: AffinePiece = AffinePiece { slope: 0.0, intercept: 0.0 };

    pub const fn new(slope: f64, intercept: f64) -> Self {
        AffinePiece { slope, intercept }
    }

    /// The line with `slope` passing through `(z, value)`.
    pub fn through(slope: f64, z: f64, value: f64) -> Self {
        AffinePiece { slope, intercept: value - slope * z }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        self.slope * z + self.intercept
    }

    pub fn is_finite(&self) -> bool {
        self.slope.is_finite() && self.intercept.is_finite()
    }
}

impl ConvexFunction for AffinePiece {
    fn eval(&self, z: f64) -> f64 {
        AffinePiece::eval(self, z)
    }
    fn subgradient(&self, _z: f64) -> f64 {
        self.slope
    }
}

/// Supporting line of `f` at `z`, using the max-slope subgradient.
pub fn tangent_at<F: ConvexFunction + ?Sized>(f: &F, z: f64) -> AffinePiece {
    let (value, slope) = f.value_and_slope(z);
    AffinePiece::through(slope, z, value)
}

/// Pointwise maximum of a non-empty set of affine pieces.
///
/// A `MaxAffine` is either *raw* (pieces as given, evaluated by a linear
/// scan) or *simplified* (the upper envelope: pieces sorted by increasing
/// slope with the breakpoints between neighbours, evaluated by binary
/// search). [`MaxAffine::simplify`] converts the former into the latter.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAffine {
    pieces: Vec<AffinePiece>,
    // breaks[i] separates pieces[i] and pieces[i + 1]; present iff simplified.
    breaks: Option<Vec<f64>>,
}

impl MaxAffine {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidArgument("max-affine function needs at least one piece".into()));
        }
        if let Some(p) = pieces.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("non-finite affine piece {p:?}")));
        }
        Ok(MaxAffine { pieces, breaks: None })
    }

    /// The identically-zero function.
    pub fn zero() -> Self {
        MaxAffine { pieces: alloc::vec![AffinePiece::ZERO], breaks: Some(Vec::new()) }
    }

    pub fn constant(c: f64) -> Self {
        MaxAffine { pieces: alloc::vec![AffinePiece::new(0.0, c)], breaks: Some(Vec::new()) }
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn is_simplified(&self) -> bool {
        self.breaks.is_some()
    }

    /// Breakpoints of a simplified function (empty for a raw one).
    pub fn breakpoints(&self) -> &[f64] {
        self.breaks.as_deref().unwrap_or(&[])
    }

    /// Drop every piece that does not attain the maximum on a set of
    /// positive length. Pieces whose slopes agree within [`TIE_TOL`] are
    /// treated as parallel and only the highest survives.
    pub fn simplify(&self) -> MaxAffine {
        if self.breaks.is_some() {
            return self.clone();
        }
        let mut sorted = self.pieces.clone();
        sorted.sort_by(|a, b| a.slope.total_cmp(&b.slope).then_with(|| b.intercept.total_cmp(&a.intercept)));

        let mut hull: Vec<AffinePiece> = Vec::with_capacity(sorted.len());
        for line in sorted {
            if let Some(last) = hull.last() {
                if tied(last.slope, line.slope) {
                    // sorted by descending intercept within a slope
                    continue;
                }
            }
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if intersect(&a, &line) <= intersect(&a, &b) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(line);
        }
        let breaks = hull.windows(2).map(|w| intersect(&w[0], &w[1])).collect();
        MaxAffine { pieces: hull, breaks: Some(breaks) }
    }

    /// Index range of pieces that may be active at `z` (simplified form).
    #[inline]
    fn candidates(&self, breaks: &[f64], z: f64) -> core::ops::Range<usize> {
        let idx = breaks.partition_point(|&b| b < z);
        let lo = idx.saturating_sub(1);
        let hi = (idx + 2).min(self.pieces.len());
        lo..hi
    }

    fn active(&self, z: f64) -> (f64, f64) {
        let range = match &self.breaks {
            Some(b) => self.candidates(b, z),
            None => 0..self.pieces.len(),
        };
        let pieces = &self.pieces[range];
        let best = pieces.iter().map(|p| p.eval(z)).fold(f64::NEG_INFINITY, f64::max);
        let slope = pieces.iter().filter(|p| tied(p.eval(z), best)).map(|p| p.slope).fold(f64::NEG_INFINITY, f64::max);
        (best, slope)
    }
}

/// Abscissa where `b` (larger slope) overtakes `a`.
#[inline]
fn intersect(a: &AffinePiece, b: &AffinePiece) -> f64 {
    (a.intercept - b.intercept) / (b.slope - a.slope)
}

impl ConvexFunction for MaxAffine {
    fn eval(&self, z: f64) -> f64 {
        match &self.breaks {
            Some(b) => {
                let r = self.candidates(b, z);
                self.pieces[r].iter().map(|p| p.eval(z)).fold(f64::NEG_INFINITY, f64::max)
            }
            None => self.pieces.iter().map(|p| p.eval(z)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn subgradient(&self, z: f64) -> f64 {
        self.active(z).1
    }

    fn value_and_slope(&self, z: f64) -> (f64, f64) {
        self.active(z)
    }
}

/// Chord interpolation of a convex function on knots `g_1 < … < g_m`, exact
/// affine extension left of `g_1` and constant `values[m-1]` right of `g_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotInterp {
    knots: Vec<f64>,
    values: Vec<f64>,
    chords: Vec<f64>,
    left_ext: AffinePiece,
}

impl KnotInterp {
    /// Builds the interpolant. `left_ext` must pass through the first knot;
    /// chord slopes must be non-decreasing (up to rounding).
    pub fn new(knots: Vec<f64>, values: Vec<f64>, left_ext: AffinePiece) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::DimensionMismatch(alloc::format!("{} knots but {} values", knots.len(), values.len())));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("knots must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || !left_ext.is_finite() {
            return Err(Error::InvalidArgument("non-finite interpolation data".into()));
        }
        if !tied_loose(left_ext.eval(knots[0]), values[0]) {
            return Err(Error::InvalidArgument(alloc::format!(
                "left extension gives {} at the first knot, expected {}",
                left_ext.eval(knots[0]),
                values[0]
            )));
        }
        let chords: Vec<f64> =
            knots.windows(2).zip(values.windows(2)).map(|(g, v)| (v[1] - v[0]) / (g[1] - g[0])).collect();
        for (i, w) in chords.windows(2).enumerate() {
            if w[1] < w[0] - slope_tol(w[0]) {
                return Err(Error::NotConvexOnGrid { index: i + 1 });
            }
        }
        Ok(KnotInterp { knots, values, chords, left_ext })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn chord_slopes(&self) -> &[f64] {
        &self.chords
    }

    pub fn left_ext(&self) -> AffinePiece {
        self.left_ext
    }

    pub fn right_ext_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

fn tied_loose(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn slope_tol(d: f64) -> f64 {
    1e-10 + 1e-9 * d.abs()
}

impl ConvexFunction for KnotInterp {
    fn eval(&self, z: f64) -> f64 {
        let m = self.knots.len();
        if z <= self.knots[0] {
            return self.left_ext.eval(z);
        }
        if z > self.knots[m - 1] {
            return self.values[m - 1];
        }
        // g_i < z <= g_{i+1}
        let i = self.knots.partition_point(|&g| g < z) - 1;
        self.chords[i] * (z - self.knots[i]) + self.values[i]
    }

    fn subgradient(&self, z: f64) -> f64 {
        let m = self.knots.len();
        let last_chord = |i: usize| if i == 0 { self.left_ext.slope } else { self.chords[i - 1] };
        if z < self.knots[0] {
            return self.left_ext.slope;
        }
        if z > self.knots[m - 1] {
            return 0.0;
        }
        // number of knots <= z, at least 1 here
        let idx = self.knots.partition_point(|&g| g <= z);
        let right = if idx == m { 0.0 } else { self.chords[idx - 1] };
        if self.knots[idx - 1] == z {
            right.max(last_chord(idx - 1))
        } else {
            right
        }
    }

    fn value_and_slope(&self, z: f64) -> (f64, f64) {
        let m = self.knots.len();
        if z < self.knots[0] {
            return (self.left_ext.eval(z), self.left_ext.slope);
        }
        if z > self.knots[m - 1] {
            return (self.values[m - 1], 0.0);
        }
        let idx = self.knots.partition_point(|&g| g <= z);
        if self.knots[idx - 1] == z {
            return (self.values[idx - 1], self.subgradient(z));
        }
        let i = idx - 1;
        (self.chords[i] * (z - self.knots[i]) + self.values[i], self.chords[i])
    }
}

/// One of the two convex piecewise-linear representations.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexPwl {
    MaxAffine(MaxAffine),
    Knot(KnotInterp),
}

impl ConvexPwl {
    pub fn zero() -> Self {
        ConvexPwl::MaxAffine(MaxAffine::zero())
    }

    /// Abscissae where the slope may jump.
    pub fn kinks(&self) -> &[f64] {
        match self {
            ConvexPwl::MaxAffine(f) => f.breakpoints(),
            ConvexPwl::Knot(f) => f.knots(),
        }
    }
}

impl From<MaxAffine> for ConvexPwl {
    fn from(f: MaxAffine) -> Self {
        ConvexPwl::MaxAffine(f)
    }
}

impl From<KnotInterp> for ConvexPwl {
    fn from(f: KnotInterp) -> Self {
        ConvexPwl::Knot(f)
    }
}

impl ConvexFunction for ConvexPwl {
    fn eval(&self, z: f64) -> f64 {
        match self {
            ConvexPwl::MaxAffine(f) => f.eval(z),
            ConvexPwl::Knot(f) => f.eval(z),
        }
    }
    fn subgradient(&self, z: f64) -> f64 {
        match self {
            ConvexPwl::MaxAffine(f) => f.subgradient(z),
            ConvexPwl::Knot(f) => f.subgradient(z),
        }
    }
    fn value_and_slope(&self, z: f64) -> (f64, f64) {
        match self {
            ConvexPwl::MaxAffine(f) => f.value_and_slope(z),
            ConvexPwl::Knot(f) => f.value_and_slope(z),
        }
    }
}

/// `reward(z) + discount * cont(z)` for one (state, action) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Summand {
    pub reward: ConvexPwl,
    pub cont: ConvexPwl,
    pub discount: f64,
}

impl Summand {
    pub fn new(reward: ConvexPwl, cont: ConvexPwl, discount: f64) -> Self {
        Summand { reward, cont, discount }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        self.reward.eval(z) + self.discount * self.cont.eval(z)
    }

    #[inline]
    pub fn value_and_slope(&self, z: f64) -> (f64, f64) {
        let (rv, rs) = self.reward.value_and_slope(z);
        let (cv, cs) = self.cont.value_and_slope(z);
        (rv + self.discount * cv, rs + self.discount * cs)
    }
}

/// A value function over (discrete state, continuous state): for each
/// discrete state, the maximum over actions of the summands.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeConvex {
    states: Vec<Vec<Summand>>,
}

impl CompositeConvex {
    /// `states[p][a]`; every state needs at least one summand.
    pub fn new(states: Vec<Vec<Summand>>) -> Result<Self> {
        if states.is_empty() || states.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidArgument("every discrete state needs at least one summand".into()));
        }
        Ok(CompositeConvex { states })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn summands(&self, p: usize) -> &[Summand] {
        &self.states[p]
    }

    pub fn eval(&self, p: usize, z: f64) -> f64 {
        self.states[p].iter().map(|s| s.eval(z)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value and the largest slope among the maximising summands.
    pub fn value_and_slope(&self, p: usize, z: f64) -> (f64, f64) {
        let summands = &self.states[p];
        if summands.len() == 1 {
            return summands[0].value_and_slope(z);
        }
        let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in summands {
            let (v, d) = s.value_and_slope(z);
            if v > best.0 && !tied(v, best.0) {
                best = (v, d);
            } else if tied(v, best.0) {
                best = (best.0.max(v), best.1.max(d));
            }
        }
        best
    }

    pub fn subgradient(&self, p: usize, z: f64) -> f64 {
        self.value_and_slope(p, z).1
    }

    /// View of a single discrete state as a scalar convex function.
    pub fn state(&self, p: usize) -> StateSlice<'_> {
        StateSlice { f: self, p }
    }
}

/// One discrete state of a [`CompositeConvex`].
#[derive(Debug, Clone, Copy)]
pub struct StateSlice<'a> {
    f: &'a CompositeConvex,
    p: usize,
}

impl ConvexFunction for StateSlice<'_> {
    fn eval(&self, z: f64) -> f64 {
        self.f.eval(self.p, z)
    }
    fn subgradient(&self, z: f64) -> f64 {
        self.f.subgradient(self.p, z)
    }
    fn value_and_slope(&self, z: f64) -> (f64, f64) {
        self.f.value_and_slope(self.p, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn payoff() -> MaxAffine {
        MaxAffine::new(vec![AffinePiece::new(-1.0, 40.0), AffinePiece::ZERO]).unwrap()
    }

    struct Square;
    impl ConvexFunction for Square {
        fn eval(&self, z: f64) -> f64 {
            z * z
        }
        fn subgradient(&self, z: f64) -> f64 {
            2.0 * z
        }
    }

    #[test]
    fn eval_examples() {
        assert_eq!(payoff().eval(32.0), 8.0);
        assert_eq!(payoff().simplify().eval(32.0), 8.0);
        assert_eq!(MaxAffine::zero().eval(17.3), 0.0);
        let k = KnotInterp::new(vec![1.0, 3.0], vec![4.0, 0.0], AffinePiece::new(-2.0, 6.0)).unwrap();
        assert_eq!(k.eval(2.0), 2.0);
        assert_eq!(k.eval(0.0), 6.0);
        assert_eq!(k.eval(10.0), 0.0);
        assert_eq!(k.right_ext_value(), 0.0);
    }

    #[test]
    fn subgradient_examples() {
        for f in [payoff(), payoff().simplify()] {
            assert_eq!(f.subgradient(50.0), 0.0);
            assert_eq!(f.subgradient(30.0), -1.0);
            // both pieces are 0 at the kink; the larger slope wins
            assert_eq!(f.pieces().iter().map(|p| p.eval(40.0)).collect::<Vec<_>>(), vec![0.0, 0.0]);
            assert_eq!(f.subgradient(40.0), 0.0);
        }
    }

    #[test]
    fn knot_subgradient_takes_right_chord_at_knots() {
        let k = KnotInterp::new(vec![0.0, 1.0, 2.0], vec![2.0, 0.5, 0.0], AffinePiece::new(-3.0, 2.0)).unwrap();
        assert_eq!(k.subgradient(-1.0), -3.0);
        assert_eq!(k.subgradient(0.0), -1.5);
        assert_eq!(k.subgradient(0.5), -1.5);
        assert_eq!(k.subgradient(1.0), -0.5);
        assert_eq!(k.subgradient(2.0), 0.0);
        assert_eq!(k.subgradient(5.0), 0.0);
    }

    #[test]
    fn knot_interp_rejects_concave_data() {
        let err = KnotInterp::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.5], AffinePiece::new(1.0, 0.0));
        assert_eq!(err, Err(Error::NotConvexOnGrid { index: 1 }));
        let err = KnotInterp::new(vec![0.0, 1.0], vec![0.0, 1.0], AffinePiece::new(1.0, 5.0));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn tangent_examples() {
        assert_eq!(tangent_at(&payoff(), 30.0), AffinePiece::new(-1.0, 40.0));
        assert_eq!(tangent_at(&payoff(), 50.0), AffinePiece::new(0.0, 0.0));
        let t = tangent_at(&Square, 3.0);
        assert_eq!(t, AffinePiece::new(6.0, -9.0));
        let mut z = -7.3;
        for _ in 0..10 {
            assert!(t.eval(z) <= z * z + 1e-12);
            z += 1.9;
        }
    }

    #[test]
    fn simplify_examples() {
        let f = MaxAffine::new(vec![AffinePiece::new(-1.0, 40.0), AffinePiece::new(-1.0, 39.0), AffinePiece::ZERO])
            .unwrap();
        assert_eq!(f.simplify().pieces(), &[AffinePiece::new(-1.0, 40.0), AffinePiece::ZERO]);

        assert_eq!(MaxAffine::zero().simplify().pieces(), &[AffinePiece::ZERO]);

        let f = MaxAffine::new(vec![
            AffinePiece::new(-2.0, 10.0),
            AffinePiece::new(-1.0, 5.0),
            AffinePiece::ZERO,
            AffinePiece::new(1.0, -100.0),
        ])
        .unwrap();
        let s = f.simplify();
        // (1, -100) overtakes zero at z = 100
        assert!(s.pieces().contains(&AffinePiece::new(1.0, -100.0)));
        assert_eq!(s.breakpoints().last(), Some(&100.0));
        // (-1, 5) only touches the max at z = 5, where all three meet
        assert!(!s.pieces().contains(&AffinePiece::new(-1.0, 5.0)));
        assert_eq!(s.eval(200.0), 100.0);
    }

    #[test]
    fn rejects_empty_or_nonfinite() {
        assert!(MaxAffine::new(vec![]).is_err());
        assert!(MaxAffine::new(vec![AffinePiece::new(f64::NAN, 0.0)]).is_err());
        assert!(CompositeConvex::new(vec![vec![]]).is_err());
    }

    #[test]
    fn composite_is_max_of_summands() {
        let s0 = Summand::new(payoff().into(), ConvexPwl::zero(), 0.9);
        let s1 = Summand::new(ConvexPwl::zero(), MaxAffine::constant(2.0).into(), 0.5);
        let f = CompositeConvex::new(vec![vec![s0.clone(), s1.clone()]]).unwrap();
        for z in [0.0, 20.0, 38.5, 39.0, 40.0, 60.0] {
            assert_eq!(f.eval(0, z), s0.eval(z).max(s1.eval(z)));
        }
        // at z = 39 both give 1; max slope is 0
        assert_eq!(f.value_and_slope(0, 39.0), (1.0, 0.0));
        assert_eq!(f.value_and_slope(0, 30.0), (10.0, -1.0));
    }

    fn arb_pieces() -> impl Strategy<Value = Vec<AffinePiece>> {
        prop::collection::vec((-5.0..5.0f64, -50.0..50.0f64), 1..12)
            .prop_map(|v| v.into_iter().map(|(s, b)| AffinePiece::new(s, b)).collect())
    }

    proptest! {
        #[test]
        fn max_affine_is_convex(pieces in arb_pieces(), z1 in -30.0..30.0f64, d1 in 0.01..10.0f64, d2 in 0.01..10.0f64) {
            let f = MaxAffine::new(pieces).unwrap();
            let (z2, z3) = (z1 + d1, z1 + d1 + d2);
            let (f1, f2, f3) = (f.eval(z1), f.eval(z2), f.eval(z3));
            let chord = f1 + (f3 - f1) * (z2 - z1) / (z3 - z1);
            prop_assert!(f2 <= chord + 1e-12 * (1.0 + chord.abs()));
        }

        #[test]
        fn simplify_preserves_values(pieces in arb_pieces(), seed in 0u64..1000) {
            let f = MaxAffine::new(pieces).unwrap();
            let s = f.simplify();
            // no piece of the envelope is dominated: breakpoints strictly increase
            prop_assert!(s.breakpoints().windows(2).all(|w| w[0] < w[1]));
            let mut x = seed as f64;
            for i in 0..1000 {
                x = (x * 1.618_033_988_75 + i as f64 * 0.37).rem_euclid(200.0);
                let z = x - 100.0;
                let (a, b) = (f.eval(z), s.eval(z));
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "z={} raw={} simplified={}", z, a, b);
                prop_assert_eq!(f.subgradient(z), s.subgradient(z));
            }
        }

        #[test]
        fn knot_value_and_slope_agree(
            raw in prop::collection::vec(-3.0..3.0f64, 2..20),
            left in -10.0..0.0f64,
            z in -5.0..25.0f64,
        ) {
            // integer knots, convex values from cumulative non-decreasing slopes
            let mut slopes = raw.clone();
            slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let knots: Vec<f64> = (0..=slopes.len()).map(|i| i as f64).collect();
            let mut values = vec![0.0];
            for d in &slopes {
                values.push(values.last().unwrap() + d);
            }
            let ext = AffinePiece::through(left.min(slopes[0]), 0.0, 0.0);
            let k = KnotInterp::new(knots, values, ext).unwrap();
            for x in [z, z.round()] {
                let (v, d) = k.value_and_slope(x);
                prop_assert!((v - k.eval(x)).abs() <= 1e-12 * (1.0 + v.abs()));
                prop_assert_eq!(d, k.subgradient(x));
            }
        }

        #[test]
        fn tangents_support(pieces in arb_pieces(), z in -40.0..40.0f64, probe in -100.0..100.0f64) {
            let f = MaxAffine::new(pieces).unwrap().simplify();
            let t = tangent_at(&f, z);
            prop_assert!(t.eval(probe) <= f.eval(probe) + 1e-12 * (1.0 + f.eval(probe).abs()));
        }
    }
}
