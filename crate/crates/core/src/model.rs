//! Contracting MDP instances with a finite chain, finite actions, convex
//! rewards and affine-in-state disturbance dynamics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::pwl::{ConvexFunction, MaxAffine};

/// `f(w, z) = coef(w) * z + offset(w)` with `coef` and `offset` affine in `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineDynamics {
    /// `(c0, c1)`: `coef(w) = c0 + c1 * w`.
    pub coef: (f64, f64),
    /// `(o0, o1)`: `offset(w) = o0 + o1 * w`.
    pub offset: (f64, f64),
}

impl AffineDynamics {
    /// `f(w, z) = w * z`.
    pub const MULTIPLICATIVE: AffineDynamics = AffineDynamics { coef: (0.0, 1.0), offset: (0.0, 0.0) };
    /// `f(w, z) = z + w`.
    pub const ADDITIVE: AffineDynamics = AffineDynamics { coef: (1.0, 0.0), offset: (0.0, 1.0) };

    #[inline]
    pub fn coef(&self, w: f64) -> f64 {
        self.coef.0 + self.coef.1 * w
    }

    #[inline]
    pub fn offset(&self, w: f64) -> f64 {
        self.offset.0 + self.offset.1 * w
    }

    #[inline]
    pub fn apply(&self, w: f64, z: f64) -> f64 {
        self.coef(w) * z + self.offset(w)
    }
}

/// Positive bounding function `b(p, z) = constant + slope * z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundFn {
    pub constant: f64,
    pub slope: f64,
}

impl BoundFn {
    pub const fn constant(c: f64) -> Self {
        BoundFn { constant: c, slope: 0.0 }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        self.constant + self.slope * z
    }
}

/// A breached modelling assumption, reported by [`Model::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assumption: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.assumption, self.detail)
    }
}

/// A contracting MDP with discrete component `p ∈ 0..num_discrete` and
/// scalar continuous component `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    num_discrete: usize,
    num_actions: usize,
    /// `transitions[a][p * num_discrete + p']`
    transitions: Vec<Vec<f64>>,
    /// `rewards[p * num_actions + a]`
    rewards: Vec<MaxAffine>,
    pub beta: f64,
    pub bound_cr: f64,
    pub bound_cb: f64,
    bound: Vec<BoundFn>,
    pub dynamics: AffineDynamics,
    /// Interval the continuous state lives in; ends may be infinite.
    pub state_range: (f64, f64),
}

/// Tolerance on row sums of the transition matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

impl Model {
    /// Shape checks only; use [`Model::validate`] for the contraction
    /// assumptions.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_discrete: usize,
        num_actions: usize,
        transitions: Vec<Vec<f64>>,
        rewards: Vec<MaxAffine>,
        beta: f64,
        bound_cr: f64,
        bound_cb: f64,
        bound: Vec<BoundFn>,
        dynamics: AffineDynamics,
    ) -> Result<Self> {
        if num_discrete == 0 || num_actions == 0 {
            return Err(Error::InvalidArgument("need at least one discrete state and one action".into()));
        }
        if transitions.len() != num_actions || transitions.iter().any(|t| t.len() != num_discrete * num_discrete) {
            return Err(Error::DimensionMismatch(format!(
                "expected {num_actions} transition matrices of size {num_discrete}x{num_discrete}"
            )));
        }
        if rewards.len() != num_discrete * num_actions {
            return Err(Error::DimensionMismatch(format!(
                "expected {} rewards, got {}",
                num_discrete * num_actions,
                rewards.len()
            )));
        }
        if bound.len() != num_discrete {
            return Err(Error::DimensionMismatch(format!(
                "expected {num_discrete} bounding functions, got {}",
                bound.len()
            )));
        }
        let rewards = rewards.into_iter().map(|r| r.simplify()).collect();
        Ok(Model {
            num_discrete,
            num_actions,
            transitions,
            rewards,
            beta,
            bound_cr,
            bound_cb,
            bound,
            dynamics,
            state_range: (f64::NEG_INFINITY, f64::INFINITY),
        })
    }

    pub fn with_state_range(mut self, lo: f64, hi: f64) -> Self {
        self.state_range = (lo, hi);
        self
    }

    pub fn num_discrete(&self) -> usize {
        self.num_discrete
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn alpha(&self, a: usize, p: usize, next: usize) -> f64 {
        self.transitions[a][p * self.num_discrete + next]
    }

    /// Row `p` of the transition matrix for action `a`.
    pub fn alpha_row(&self, a: usize, p: usize) -> &[f64] {
        &self.transitions[a][p * self.num_discrete..(p + 1) * self.num_discrete]
    }

    pub fn reward(&self, p: usize, a: usize) -> &MaxAffine {
        &self.rewards[p * self.num_actions + a]
    }

    pub fn bound(&self, p: usize) -> BoundFn {
        self.bound[p]
    }

    pub fn apply_dynamics(&self, w: f64, z: f64) -> f64 {
        self.dynamics.apply(w, z)
    }

    /// Finite probe points spread over the state range plus every reward kink.
    pub fn probe_points(&self) -> Vec<f64> {
        let lo = if self.state_range.0.is_finite() { self.state_range.0 } else { -1e3 };
        let hi = if self.state_range.1.is_finite() { self.state_range.1 } else { 1e3 };
        let n = 257;
        let mut pts: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        for r in &self.rewards {
            pts.extend(r.breakpoints().iter().copied().filter(|z| (lo..=hi).contains(z)));
        }
        pts
    }

    /// Check the contraction assumptions; an empty list means all hold.
    /// Each violation names the assumption it breaches.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for a in 0..self.num_actions {
            for p in 0..self.num_discrete {
                let row = self.alpha_row(a, p);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
                    out.push(Violation {
                        assumption: "stochastic matrix",
                        detail: format!("row {p} of action {a} sums to {sum} or has negative entries"),
                    });
                }
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            out.push(Violation {
                assumption: "bounded contraction",
                detail: format!("discount {} must lie in (0, 1)", self.beta),
            });
        }
        if !(self.bound_cr >= 0.0) || !(self.bound_cb >= 0.0) {
            out.push(Violation {
                assumption: "bounded contraction",
                detail: format!("bound constants c_r={} c_b={} must be non-negative", self.bound_cr, self.bound_cb),
            });
        }
        if !(self.beta * self.bound_cb < 1.0) {
            out.push(Violation {
                assumption: "bounded contraction",
                detail: format!("beta * c_b = {} must be < 1", self.beta * self.bound_cb),
            });
        }
        let probes = self.probe_points();
        for p in 0..self.num_discrete {
            let b = self.bound[p];
            if let Some(z) = probes.iter().find(|&&z| !(b.eval(z) > 0.0)) {
                out.push(Violation {
                    assumption: "bounded contraction",
                    detail: format!("bounding function of state {p} is not positive at z={z}"),
                });
                continue;
            }
            for a in 0..self.num_actions {
                let r = self.reward(p, a);
                if let Some(z) = probes.iter().find(|&&z| r.eval(z).abs() > self.bound_cr * b.eval(z) * (1.0 + 1e-12)) {
                    out.push(Violation {
                        assumption: "bounded contraction",
                        detail: format!("|r({p}, {z}, {a})| exceeds c_r * b"),
                    });
                }
            }
        }
        out
    }

    /// Violations of the modified-operator contraction condition
    /// `beta * c_b * ||S b||_b < 1` (checked strictly), given `||S b||_b`.
    pub fn validate_scheme(&self, approx_bound_norm: f64) -> Vec<Violation> {
        let mut out = self.validate();
        let modulus = self.beta * self.bound_cb * approx_bound_norm;
        if !(modulus < 1.0) {
            out.push(Violation {
                assumption: "approximate contraction",
                detail: format!("beta * c_b * ||S b||_b = {modulus} must be < 1"),
            });
        }
        out
    }
}
