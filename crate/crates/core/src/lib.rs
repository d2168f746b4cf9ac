//! Modified value iteration for infinite-horizon contracting Markov decision
//! processes whose value functions are convex in a scalar continuous state.
//!
//! The value function at every iterate is kept as an exact convex
//! piecewise-linear object ([`pwl`]). Two approximation schemes are
//! provided: tangent envelopes, which together with local-average disturbance
//! sampling give non-decreasing lower bounds, and knot interpolation, which
//! together with extreme-point (mean-preserving spread) sampling gives
//! non-increasing upper bounds.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration and the
//! command line live in the companion `convexvi` crate.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bellman;
pub mod bermudan;
pub mod dist;
pub mod error;
pub mod model;
pub mod oracle;
pub mod pwl;
pub mod sampling;

mod sum;

pub use bellman::{
    apply_transition, approximate, bellman_step, contraction_modulus, greedy_policy, interp_approx, reward_seed,
    solve_fixed_point, successor_points, tangent_approx, weighted_distance, ApproxTarget, FixedPointResult,
    GreedyPolicy, Grid, ModifiedBellman, ResidualRule, SchemeConfig, SchemeKind,
};
pub use dist::{Distribution, LogNormal, Uniform};
pub use error::{Error, Result};
pub use model::{AffineDynamics, BoundFn, Model, Violation};
pub use pwl::{AffinePiece, CompositeConvex, ConvexFunction, ConvexPwl, KnotInterp, MaxAffine, Summand};
pub use sampling::{Partition, RepresentativeRule, Sampling, SamplingKind, TruncatedDistribution};
