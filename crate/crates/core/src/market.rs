//! Black-Scholes market primitives: the state price density at the horizon
//! and its truncated power moments.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::normal;
use crate::oracle;

/// Market and fund-size parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Risk-free rate per year.
    pub r: f64,
    /// Market price of risk `(mu - r) / sigma`.
    pub gamma: f64,
    /// Volatility of the risky asset; only the constant-mix benchmark needs it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Horizon in years.
    pub horizon: f64,
    /// Initial fund capital.
    pub v0: f64,
}

impl MarketParams {
    pub fn new(r: f64, gamma: f64, sigma: Option<f64>, horizon: f64, v0: f64) -> Result<Self> {
        let params = Self {
            r,
            gamma,
            sigma,
            horizon,
            v0,
        };
        params.validate()?;
        Ok(params)
    }

    /// r = 2%, γ = 40%, T = 1, v0 = 1 and σ = 20%.
    pub fn base_case() -> Self {
        Self {
            r: 0.02,
            gamma: 0.4,
            sigma: Some(0.2),
            horizon: 1.0,
            v0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r.is_finite() {
            return Err(invalid("r", "must be finite"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return Err(invalid("v0", format!("must be positive, got {}", self.v0)));
        }
        if let Some(sigma) = self.sigma {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(invalid("sigma", format!("must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rate(mut self, r: f64) -> Result<Self> {
        self.r = r;
        self.validate()?;
        Ok(self)
    }

    /// `(r + γ²/2) T`, minus the mean of `log Z̃_T`.
    pub fn log_drift(&self) -> f64 {
        (self.r + 0.5 * self.gamma * self.gamma) * self.horizon
    }

    /// `γ √T`, the standard deviation of `log Z̃_T`.
    pub fn log_vol(&self) -> f64 {
        self.gamma * self.horizon.sqrt()
    }

    /// `Z̃_T = exp(-(r + γ²/2) T - γ W_T)`.
    pub fn state_price_density(&self, w_t: f64) -> f64 {
        (-self.log_drift() - self.gamma * w_t).exp()
    }

    /// Kernel value for a standard-normal draw `u` (`W_T = √T u`).
    pub fn z_from_standard(&self, u: f64) -> f64 {
        (-self.log_drift() - self.log_vol() * u).exp()
    }

    /// Inverse of [`Self::z_from_standard`]; `z = 0` maps to `+∞`, `z = ∞` to `-∞`.
    pub fn standard_from_z(&self, z: f64) -> f64 {
        if z <= 0.0 {
            f64::INFINITY
        } else if z == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            (-z.ln() - self.log_drift()) / self.log_vol()
        }
    }

    /// `E[Z̃_T^k 1{a < Z̃_T < b}]`. `a = 0` and `b = ∞` are allowed.
    pub fn partial_power_expectation(&self, k: f64, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0) || b.is_nan() {
            return Err(invalid("a", format!("lower bound must be >= 0, got {a}")));
        }
        if a > b {
            return Err(invalid("b", format!("upper bound {b} below lower bound {a}")));
        }
        if a == b {
            return Ok(0.0);
        }
        let vol = self.log_vol();
        let shift = k * vol;
        // d_x decreases in x, so d_b + kσ is the lower normal limit.
        let lo = self.standard_from_z(b) + shift;
        let hi = self.standard_from_z(a) + shift;
        let scale = (-k * self.log_drift() + 0.5 * shift * shift).exp();
        Ok(scale * normal::interval(lo, hi))
    }

    /// `P(a < Z̃_T < b)`.
    pub fn band_probability(&self, a: f64, b: f64) -> Result<f64> {
        self.partial_power_expectation(0.0, a, b)
    }

    /// `n` i.i.d. draws of `Z̃_T`, reproducible from `seed`.
    ///
    /// The draws coincide with the ones the Monte Carlo oracle consumes for the
    /// same seed, so oracle estimates can be replayed from this sequence.
    pub fn sample_z(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                field: "n",
                reason: "sample size must be positive".into(),
            });
        }
        let mut out = Vec::with_capacity(n);
        oracle::for_each_normal(seed, n, |u| out.push(self.z_from_standard(u)));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MarketParams {
        MarketParams::base_case()
    }

    #[test]
    fn state_price_density_examples() {
        let m = base();
        assert!((m.state_price_density(0.0) - (-0.10f64).exp()).abs() < 1e-15);
        assert!((m.state_price_density(1.0) - (-0.50f64).exp()).abs() < 1e-15);
        assert!((m.state_price_density(0.0) - 0.904_837).abs() < 1e-6);
        assert!((m.state_price_density(1.0) - 0.606_531).abs() < 1e-6);
    }

    #[test]
    fn vanishing_market_price_of_risk_limit() {
        // The formula itself at γ = 0 (the constructor rejects it).
        let m = MarketParams { gamma: 0.0, ..base() };
        for w in [-2.0, 0.0, 0.7, 3.0] {
            assert!((m.state_price_density(w) - (-0.02f64).exp()).abs() < 1e-15);
        }
        assert!(MarketParams::new(0.02, 0.0, None, 1.0, 1.0).is_err());
    }

    #[test]
    fn partial_moments_trivial_cases() {
        let m = base();
        assert_eq!(m.partial_power_expectation(1.7, 0.4, 0.4).unwrap(), 0.0);
        assert!((m.partial_power_expectation(0.0, 0.0, f64::INFINITY).unwrap() - 1.0).abs() < 1e-15);
        let mean = m.partial_power_expectation(1.0, 0.0, f64::INFINITY).unwrap();
        assert!((mean - (-0.02f64).exp()).abs() < 1e-15);
        assert!((mean - 0.980_199).abs() < 1e-6);
        assert!(m.partial_power_expectation(1.0, 0.9, 0.3).is_err());
        assert!(m.partial_power_expectation(1.0, -0.1, 0.3).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(MarketParams::new(0.02, 0.4, None, 0.0, 1.0).is_err());
        assert!(MarketParams::new(0.02, 0.4, None, 1.0, -1.0).is_err());
        assert!(MarketParams::new(0.02, 0.4, Some(0.0), 1.0, 1.0).is_err());
        assert!(MarketParams::new(-0.02, 0.4, None, 1.0, 1.0).is_ok());
    }

    #[test]
    fn sampler_is_deterministic() {
        let m = base();
        let a = m.sample_z(7, 1000).unwrap();
        let b = m.sample_z(7, 1000).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, m.sample_z(8, 1000).unwrap());
        assert!(a.iter().all(|&z| z > 0.0));
        assert!(m.sample_z(7, 0).is_err());
    }

    #[test]
    fn standard_from_z_inverts() {
        let m = base();
        for u in [-3.0, -0.2, 0.0, 1.5] {
            assert!((m.standard_from_z(m.z_from_standard(u)) - u).abs() < 1e-13);
        }
        assert_eq!(m.standard_from_z(0.0), f64::INFINITY);
        assert_eq!(m.standard_from_z(f64::INFINITY), f64::NEG_INFINITY);
    }
}
