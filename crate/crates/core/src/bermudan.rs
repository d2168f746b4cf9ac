//! Perpetual Bermudan put: exercisable once at any of the equally spaced
//! dates `0, Δ, 2Δ, …`, on an asset with lognormal growth factor per period.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bellman::{Grid, SchemeConfig};
use crate::dist::LogNormal;
use crate::error::{Error, Result};
use crate::model::{AffineDynamics, BoundFn, Model};
use crate::pwl::{AffinePiece, CompositeConvex, MaxAffine};

pub use crate::dist::{lognormal_cond_mean, normal_cdf};

/// Discrete state: option still alive.
pub const UNEXERCISED: usize = 0;
/// Discrete state: option exercised (absorbing, no further reward).
pub const EXERCISED: usize = 1;
/// Action: hold.
pub const CONTINUE: usize = 0;
/// Action: exercise now.
pub const EXERCISE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PutParams {
    pub strike: f64,
    /// Interest rate per annum.
    pub rate: f64,
    /// Volatility per annum.
    pub vol: f64,
    /// Years between exercise dates.
    pub dt: f64,
}

impl PutParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.strike) && ok(self.rate) && ok(self.vol) && ok(self.dt) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("put parameters must be positive and finite: {self:?}")))
        }
    }

    pub fn beta(&self) -> f64 {
        libm::exp(-self.rate * self.dt)
    }

    /// Log-mean and log-sd of the one-period growth factor.
    pub fn log_params(&self) -> (f64, f64) {
        ((self.rate - 0.5 * self.vol * self.vol) * self.dt, self.vol * libm::sqrt(self.dt))
    }

    /// `(K - z)^+` as a max of affine pieces.
    pub fn payoff(&self) -> MaxAffine {
        MaxAffine::new(vec![AffinePiece::new(-1.0, self.strike), AffinePiece::ZERO]).expect("finite pieces")
    }

    /// Left extension used by the interpolation scheme: the payoff line
    /// `K - z`, exact wherever immediate exercise is optimal.
    pub fn left_extension(&self) -> AffinePiece {
        AffinePiece::new(-1.0, self.strike)
    }
}

/// Two discrete states, two actions, multiplicative dynamics `z' = W z`,
/// bound `b ≡ K` with `c_r = c_b = 1`.
pub fn build_put_model(params: PutParams) -> Result<(Model, LogNormal)> {
    params.validate()?;
    // transitions[a][p * 2 + p']
    let hold = vec![1.0, 0.0, 0.0, 1.0];
    let exercise = vec![0.0, 1.0, 0.0, 1.0];
    let mut rewards = vec![MaxAffine::zero(); 4];
    rewards[UNEXERCISED * 2 + EXERCISE] = params.payoff();
    let k = params.strike;
    let model = Model::new(
        2,
        2,
        vec![hold, exercise],
        rewards,
        params.beta(),
        1.0,
        1.0,
        vec![BoundFn::constant(k); 2],
        AffineDynamics::MULTIPLICATIVE,
    )?
    .with_state_range(0.0, f64::INFINITY);
    let (mu, sigma) = params.log_params();
    Ok((model, LogNormal::new(mu, sigma)?))
}

/// Value of the perpetual American put (continuous exercise); an upper
/// reference for the Bermudan price up to discretisation effects.
pub fn perpetual_american_reference(params: &PutParams, z0: f64) -> f64 {
    let gamma = 2.0 * params.rate / (params.vol * params.vol);
    let zstar = gamma * params.strike / (1.0 + gamma);
    if z0 <= zstar {
        params.strike - z0
    } else {
        (params.strike - zstar) * libm::pow(z0 / zstar, -gamma)
    }
}

/// Named instance: parameters plus the grid used with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub params: PutParams,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
}

impl Preset {
    pub fn grid(&self) -> Grid {
        Grid::uniform(self.grid_lo, self.grid_hi, self.grid_points).expect("preset grids are valid")
    }

    pub fn tangent_scheme(&self) -> SchemeConfig {
        SchemeConfig::tangent(self.grid())
    }

    pub fn interp_scheme(&self) -> SchemeConfig {
        SchemeConfig::interp(self.grid(), self.params.left_extension())
    }
}

const fn quarterly(vol: f64) -> PutParams {
    PutParams { strike: 40.0, rate: 0.15, vol, dt: 0.25 }
}

pub const PRESETS: [Preset; 3] = [
    Preset { name: "vol01", params: quarterly(0.1), grid_lo: 20.0, grid_hi: 70.0, grid_points: 51 },
    Preset { name: "vol02", params: quarterly(0.2), grid_lo: 20.0, grid_hi: 120.0, grid_points: 101 },
    Preset { name: "vol03", params: quarterly(0.3), grid_lo: 20.0, grid_hi: 420.0, grid_points: 401 },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Initial asset prices reported for the presets.
pub fn table_z0() -> Vec<f64> {
    (0..8).map(|i| 32.0 + 2.0 * i as f64).collect()
}

/// Checks that the solved value equals the payoff at the first grid point,
/// i.e. that the grid starts inside the exercise region. Returns the gap.
pub fn exercise_boundary_gap(params: &PutParams, value: &CompositeConvex, grid: &Grid) -> f64 {
    let g1 = grid.points()[0];
    let gap = (value.eval(UNEXERCISED, g1) - (params.strike - g1)).abs();
    if gap > 1e-6 {
        log::warn!("value at the first grid point z={g1} differs from the payoff by {gap}; the grid may start above the exercise boundary");
    }
    gap
}
