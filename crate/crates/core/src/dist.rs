//! Disturbance laws: the standard normal, the lognormal and the uniform.

use libm::{erfc, exp, log, sqrt};

use crate::error::{Error, Result};

const SQRT_2: f64 = core::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal CDF, computed from `erfc` so that the lower tail keeps
/// full relative precision.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal survival function `1 - Φ(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    exp(-0.5 * x * x) / SQRT_2PI
}

/// `Φ(b) - Φ(a)` for `a <= b`, taken on whichever tail avoids cancellation.
pub fn normal_prob(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// Standard normal quantile: Wichura's AS 241 rational approximation
/// followed by one Newton step on [`normal_cdf`].
pub fn normal_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let x = as241(u);
    // Newton on whichever tail is small, to keep relative precision.
    let pdf = normal_pdf(x);
    if pdf <= 0.0 {
        return x;
    }
    let step = if u < 0.5 { (normal_cdf(x) - u) / pdf } else { ((1.0 - u) - normal_sf(x)) / pdf };
    if step.is_finite() {
        x - step
    } else {
        x
    }
}

#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r + 67265.770_927_008_700) * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545_4 * r + 28729.085_735_721_942) * r + 39307.895_800_092_710) * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = sqrt(-log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414_1e-4 * r + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_61) * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344_9e-4) * r + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_05)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4) * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// A univariate disturbance law.
///
/// Intervals are half-open `(a, b]`; for continuous laws the convention is
/// immaterial.
pub trait Distribution {
    fn cdf(&self, x: f64) -> f64;

    /// Inverse of [`Distribution::cdf`] on `(0, 1)`.
    fn quantile(&self, u: f64) -> f64;

    /// Closure of the support, `(lo, hi)`; either end may be infinite.
    fn support(&self) -> (f64, f64);

    /// `P(a < W <= b)`.
    fn prob(&self, a: f64, b: f64) -> f64 {
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// `E[W 1(a < W <= b)]`.
    fn partial_mean(&self, a: f64, b: f64) -> f64;

    /// `E[W]`, or `None` when the mean is not finite.
    fn mean(&self) -> Option<f64>;

    /// `E[W | a < W <= b]`.
    fn cond_mean(&self, a: f64, b: f64) -> Result<f64> {
        if self.mean().is_none() {
            return Err(Error::InfiniteMean);
        }
        let p = self.prob(a, b);
        if !(p > 0.0) {
            return Err(Error::ZeroProbability { lo: a, hi: b });
        }
        let m = self.partial_mean(a, b) / p;
        // rounding may push the ratio a hair outside the interval
        let (lo, hi) = self.support();
        Ok(m.clamp(a.max(lo), b.min(hi)))
    }
}

/// `W = exp(mu + sigma * N)` with `N` standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "lognormal needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(LogNormal { mu, sigma })
    }

    fn std_score(&self, x: f64, shift: f64) -> f64 {
        if x <= 0.0 {
            f64::NEG_INFINITY
        } else if x == f64::INFINITY {
            f64::INFINITY
        } else {
            (log(x) - self.mu) / self.sigma - shift
        }
    }
}

impl Distribution for LogNormal {
    fn cdf(&self, x: f64) -> f64 {
        normal_cdf(self.std_score(x, 0.0))
    }

    fn quantile(&self, u: f64) -> f64 {
        exp(self.mu + self.sigma * normal_quantile(u))
    }

    fn support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn prob(&self, a: f64, b: f64) -> f64 {
        normal_prob(self.std_score(a, 0.0), self.std_score(b, 0.0)).max(0.0)
    }

    fn partial_mean(&self, a: f64, b: f64) -> f64 {
        let full = exp(self.mu + 0.5 * self.sigma * self.sigma);
        full * normal_prob(self.std_score(a, self.sigma), self.std_score(b, self.sigma)).max(0.0)
    }

    fn mean(&self) -> Option<f64> {
        Some(exp(self.mu + 0.5 * self.sigma * self.sigma))
    }
}

/// `E[W | a < W <= b]` for `W = exp(mu + sigma N)`.
pub fn lognormal_cond_mean(mu: f64, sigma: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0 <= a && a < b) {
        return Err(Error::InvalidArgument(alloc::format!("need 0 <= a < b, got ({a}, {b})")));
    }
    LogNormal::new(mu, sigma)?.cond_mean(a, b)
}

/// Uniform on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("uniform needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(Uniform { lo, hi })
    }
}

impl Distribution for Uniform {
    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.lo + u.clamp(0.0, 1.0) * (self.hi - self.lo)
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn partial_mean(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.lo);
        let b = b.min(self.hi);
        if b <= a {
            return 0.0;
        }
        0.5 * (b * b - a * a) / (self.hi - self.lo)
    }

    fn mean(&self) -> Option<f64> {
        Some(0.5 * (self.lo + self.hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        // Mills-ratio asymptotics: phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6)
        let x: f64 = 8.0;
        let series = normal_pdf(x) / x * (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4) - 15.0 / x.powi(6) + 105.0 / x.powi(8));
        let v = normal_cdf(-8.0);
        assert!(v > 0.0);
        assert!((v - series).abs() / series < 1e-4, "{v} vs {series}");
        assert!((v - 6.22e-16).abs() < 0.01e-16);
    }

    #[test]
    fn normal_cdf_symmetry() {
        let mut x = -8.0;
        while x <= 8.0 {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() <= 1e-14, "x={x}");
            x += 0.0625;
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        // bisection on the implemented cdf for the 97.5% point
        let (mut lo, mut hi) = (1.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < 0.975 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((normal_quantile(0.975) - lo).abs() < 1e-13);
        assert!((lo - 1.959_963_984_540_054).abs() < 1e-12);
        for &u in &[5e-10, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
            let x = normal_quantile(u);
            let back = if u < 0.5 { normal_cdf(x) } else { 1.0 - normal_sf(x) };
            assert!((back - u).abs() <= 1e-14 * u.max(1e-3), "u={u} back={back}");
        }
    }

    #[test]
    fn lognormal_quantile_round_trip() {
        let d = LogNormal::new(0.0325, 0.1).unwrap();
        for &x in &[0.5, 0.9, 1.0, 1.033, 1.2, 1.7] {
            assert!((d.quantile(d.cdf(x)) - x).abs() < 1e-9);
        }
    }

    #[test]
    fn lognormal_cond_mean_examples() {
        let (mu, sigma) = (0.0325, 0.1);
        let full = lognormal_cond_mean(mu, sigma, 0.0, f64::INFINITY).unwrap();
        assert!((full - exp(mu + 0.5 * sigma * sigma)).abs() < 1e-15);
        // symmetric in log around the median: Jensen pushes the mean up
        let med = exp(mu);
        let m = lognormal_cond_mean(mu, sigma, med * exp(-0.2), med * exp(0.2)).unwrap();
        assert!(m > med);
        for &(a, b) in &[(0.0, 0.5), (0.9, 0.95), (1.0, 1.0001), (1.5, 4.0), (2.0, f64::INFINITY)] {
            let m = lognormal_cond_mean(mu, sigma, a, b).unwrap();
            assert!(a <= m && m <= b, "({a},{b}) -> {m}");
        }
        assert!(matches!(lognormal_cond_mean(mu, sigma, 1e6, 2e6), Err(Error::ZeroProbability { .. })));
        assert!(lognormal_cond_mean(mu, sigma, 2.0, 1.0).is_err());
    }

    #[test]
    fn uniform_cond_mean() {
        let u = Uniform::new(0.0, 1.0).unwrap();
        assert_eq!(u.cond_mean(0.0, 0.5).unwrap(), 0.25);
        assert_eq!(u.cond_mean(0.5, 1.0).unwrap(), 0.75);
        assert_eq!(u.mean(), Some(0.5));
    }
}
