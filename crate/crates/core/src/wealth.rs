//! The manager's optimal terminal fund value.
//!
//! For a Lagrange multiplier `y`, the optimal fund value is a nonincreasing
//! function of the pricing kernel `z`, piecewise of the form
//! `scale * z^{-1/b} + shift` or constant on consecutive `z`-bands. Every
//! expectation of interest (budget, moments, utilities) is a sum over bands
//! of truncated power moments of `Z̃_T`.

use serde::Serialize;

use crate::envelope::ConcaveEnvelope;
use crate::error::{Error, Result};
use crate::fee::{FeeStructure, PayoffBranch};
use crate::market::MarketParams;
use crate::preferences::{CaseTag, HaraParams};
use crate::roots::brent;

/// Largest multiplier magnitude the budget search will consider (`2^60`).
const Y_LOG_LIMIT: f64 = 60.0 * std::f64::consts::LN_2;
/// Relative budget accuracy accepted at `y*`.
pub const BUDGET_TOLERANCE: f64 = 1e-11;
/// Variances at or below this are treated as a deterministic fund value.
pub const VARIANCE_FLOOR: f64 = 1e-16;

/// Shape of the optimal fund value on one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BandShape {
    Constant(f64),
    /// `scale * z^{-1/b_M} + shift`.
    Power {
        scale: f64,
        shift: f64,
    },
}

/// One piece of the optimal fund value, on `z ∈ (z_lo, z_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WealthBand {
    pub z_lo: f64,
    pub z_hi: f64,
    pub shape: BandShape,
    /// Payoff branch every fund value on this band falls into.
    #[serde(skip)]
    pub branch: PayoffBranch,
}

/// Optimal fund value for one fee structure.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalWealthSolution {
    pub envelope: ConcaveEnvelope,
    pub market: MarketParams,
    pub y_star: f64,
    /// Bands ordered by increasing `z`, covering `(0, ∞)`.
    pub bands: Vec<WealthBand>,
}

/// First two moments of the optimal fund value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub second: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        self.second - self.mean * self.mean
    }
}

/// Kernel-space breakpoints `q` such that the band edges are `q / y`.
#[derive(Debug, Clone, Copy)]
struct Breakpoints {
    /// End of the performance-fee power band.
    surplus_end: f64,
    /// End of the flat band at `Θ2` (cases B and C).
    kink_end: f64,
    /// End of the guarantee power band (case C) and start of the zero band.
    zero_start: f64,
}

fn breakpoints(env: &ConcaveEnvelope) -> Breakpoints {
    let kink = env.kink_marginal();
    match env.case {
        CaseTag::A => Breakpoints {
            surplus_end: env.slope,
            kink_end: env.slope,
            zero_start: env.slope,
        },
        CaseTag::B => Breakpoints {
            surplus_end: env.fee.alpha * kink,
            kink_end: env.slope,
            zero_start: env.slope,
        },
        CaseTag::C => Breakpoints {
            surplus_end: env.fee.alpha * kink,
            kink_end: kink,
            zero_start: env.slope,
        },
    }
}

fn bands_for(env: &ConcaveEnvelope, y: f64) -> Vec<WealthBand> {
    let bp = breakpoints(env);
    let b = env.hara.b;
    let (m, alpha) = (env.fee.m, env.fee.alpha);
    let (a, v0) = (env.hara.a, env.v0);
    let y_pow = y.powf(-1.0 / b);
    let mut bands = vec![WealthBand {
        z_lo: 0.0,
        z_hi: bp.surplus_end / y,
        shape: BandShape::Power {
            scale: alpha.powf(1.0 / b - 1.0) * y_pow,
            shift: (1.0 + m - m / alpha) * v0 - a / alpha,
        },
        branch: PayoffBranch::Surplus,
    }];
    if env.case != CaseTag::A {
        bands.push(WealthBand {
            z_lo: bp.surplus_end / y,
            z_hi: bp.kink_end / y,
            shape: BandShape::Constant(env.fee.surplus_threshold(v0)),
            branch: PayoffBranch::Surplus,
        });
    }
    if env.case == CaseTag::C {
        bands.push(WealthBand {
            z_lo: bp.kink_end / y,
            z_hi: bp.zero_start / y,
            shape: BandShape::Power {
                scale: y_pow,
                shift: v0 - a,
            },
            branch: PayoffBranch::Guarantee,
        });
    }
    bands.push(WealthBand {
        z_lo: bp.zero_start / y,
        z_hi: f64::INFINITY,
        shape: BandShape::Constant(0.0),
        branch: PayoffBranch::Loss,
    });
    bands
}

/// `E[Z̃ V(y, Z̃)]` for the band layout of multiplier `y`.
fn budget_of(env: &ConcaveEnvelope, market: &MarketParams, y: f64) -> Result<f64> {
    let inv_b = 1.0 / env.hara.b;
    let mut total = 0.0;
    for band in bands_for(env, y) {
        total += match band.shape {
            BandShape::Constant(0.0) => 0.0,
            BandShape::Constant(v) => v * market.partial_power_expectation(1.0, band.z_lo, band.z_hi)?,
            BandShape::Power { scale, shift } => {
                scale * market.partial_power_expectation(1.0 - inv_b, band.z_lo, band.z_hi)?
                    + shift * market.partial_power_expectation(1.0, band.z_lo, band.z_hi)?
            }
        };
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::NonFinite {
            context: "budget function h(y)",
        })
    }
}

impl OptimalWealthSolution {
    /// Solves the manager's problem for one fee.
    pub fn solve(fee: &FeeStructure, manager: &HaraParams, market: &MarketParams) -> Result<Self> {
        market.validate()?;
        let envelope = ConcaveEnvelope::build(fee, manager, market.v0)?;
        Self::from_envelope(envelope, market)
    }

    pub fn from_envelope(envelope: ConcaveEnvelope, market: &MarketParams) -> Result<Self> {
        let y_star = solve_y_star(&envelope, market)?;
        Ok(Self {
            bands: bands_for(&envelope, y_star),
            envelope,
            market: *market,
            y_star,
        })
    }

    pub fn case(&self) -> CaseTag {
        self.envelope.case
    }

    pub fn fee(&self) -> &FeeStructure {
        &self.envelope.fee
    }

    /// Band edges in `z`, excluding `0` and `∞`.
    pub fn z_thresholds(&self) -> Vec<f64> {
        self.bands[1..].iter().map(|b| b.z_lo).collect()
    }

    /// Band edges mapped to the standard-normal scale, `d(z) = (log(1/z) - (r + γ²/2)T) / (γ√T)`.
    pub fn standardized_thresholds(&self) -> Vec<f64> {
        self.z_thresholds()
            .into_iter()
            .map(|z| self.market.standard_from_z(z))
            .collect()
    }

    /// `h(y) = E[Z̃ v*(y, Z̃)]` for any multiplier, using this solution's envelope.
    pub fn budget(&self, y: f64) -> Result<f64> {
        budget_of(&self.envelope, &self.market, y)
    }

    /// `V*_T` as a function of the kernel value `z > 0`.
    pub fn optimal_terminal_value(&self, z: f64) -> f64 {
        let env = &self.envelope;
        let q = self.y_star * z;
        let bp = breakpoints(env);
        let surplus = || env.surplus_inverse(q);
        match env.case {
            CaseTag::A if q <= bp.surplus_end => surplus(),
            CaseTag::B | CaseTag::C if q < bp.surplus_end => surplus(),
            CaseTag::B | CaseTag::C if q <= bp.kink_end => env.fee.surplus_threshold(env.v0),
            CaseTag::C if q <= bp.zero_start => env.guarantee_inverse(q),
            _ => 0.0,
        }
    }

    /// `E[V*]` and `E[V*²]`.
    pub fn moments(&self) -> Result<Moments> {
        let inv_b = 1.0 / self.envelope.hara.b;
        let mkt = &self.market;
        let mut mean = 0.0;
        let mut second = 0.0;
        for band in &self.bands {
            let (lo, hi) = (band.z_lo, band.z_hi);
            match band.shape {
                BandShape::Constant(v) => {
                    if v != 0.0 {
                        let p = mkt.band_probability(lo, hi)?;
                        mean += v * p;
                        second += v * v * p;
                    }
                }
                BandShape::Power { scale, shift } => {
                    let p0 = mkt.band_probability(lo, hi)?;
                    let p1 = mkt.partial_power_expectation(-inv_b, lo, hi)?;
                    let p2 = mkt.partial_power_expectation(-2.0 * inv_b, lo, hi)?;
                    mean += scale * p1 + shift * p0;
                    second += scale * scale * p2 + 2.0 * scale * shift * p1 + shift * shift * p0;
                }
            }
        }
        if !(mean.is_finite() && second.is_finite()) {
            return Err(Error::NonFinite {
                context: "moments of the optimal fund value",
            });
        }
        Ok(Moments { mean, second })
    }

    /// `(E[V*] - v0 (1 + r)) / sd(V*)`.
    pub fn sharpe_ratio(&self) -> Result<f64> {
        let mom = self.moments()?;
        sharpe_from_moments(&mom, &self.market)
    }
}

pub(crate) fn sharpe_from_moments(mom: &Moments, market: &MarketParams) -> Result<f64> {
    let var = mom.variance();
    if !(var > VARIANCE_FLOOR) {
        return Err(Error::DegenerateVariance { variance: var });
    }
    Ok((mom.mean - market.v0 * (1.0 + market.r)) / var.sqrt())
}

/// Root of `h(y) = v0`. `h` is strictly decreasing, so the search runs on
/// `log y` from `[1e-6, 1e6]`, widening geometrically up to `2^{±60}`.
pub fn solve_y_star(env: &ConcaveEnvelope, market: &MarketParams) -> Result<f64> {
    let v0 = market.v0;
    let excess = |log_y: f64| match budget_of(env, market, log_y.exp()) {
        Ok(h) => h - v0,
        Err(_) => f64::NAN,
    };
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    while excess(lo) <= 0.0 {
        if lo <= -Y_LOG_LIMIT {
            return Err(bracket_error(lo, hi));
        }
        lo = (2.0 * lo - hi).max(-Y_LOG_LIMIT);
    }
    while !(excess(hi) < 0.0) {
        if hi >= Y_LOG_LIMIT {
            return Err(bracket_error(lo, hi));
        }
        hi = (2.0 * hi - lo).min(Y_LOG_LIMIT);
    }
    let log_y = brent("budget equation", excess, lo, hi, 1e-15)?;
    let y = log_y.exp();
    let residual = budget_of(env, market, y)? - v0;
    if residual.abs() > BUDGET_TOLERANCE * v0 {
        return Err(Error::RootFinding {
            context: "budget equation",
            reason: format!("residual {residual:e} above tolerance"),
            lo: lo.exp(),
            hi: hi.exp(),
        });
    }
    Ok(y)
}

fn bracket_error(lo: f64, hi: f64) -> Error {
    Error::RootFinding {
        context: "budget equation",
        reason: "multiplier bracket exceeded 2^60".into(),
        lo: lo.exp(),
        hi: hi.exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(m: f64, a: f64, c: f64) -> OptimalWealthSolution {
        let fee = FeeStructure::new(m, a, c).unwrap();
        OptimalWealthSolution::solve(&fee, &HaraParams::base_case(), &MarketParams::base_case()).unwrap()
    }

    #[test]
    fn budget_binds() {
        for (m, a, c) in [
            (0.0, 0.2, 0.0),
            (0.05, 0.375, 0.26),
            (0.05, 0.1, 0.26),
            (0.02, 0.4, 0.1),
        ] {
            let s = solve(m, a, c);
            assert!((s.budget(s.y_star).unwrap() - 1.0).abs() < 1e-9);
            assert!(s.budget(0.5 * s.y_star).unwrap() > 1.0);
            assert!(s.budget(2.0 * s.y_star).unwrap() < 1.0);
        }
    }

    #[test]
    fn band_values() {
        let s = solve(0.05, 0.1, 0.26);
        assert_eq!(s.case(), CaseTag::B);
        let th = s.z_thresholds();
        assert_eq!(s.optimal_terminal_value(2.0 * th[th.len() - 1]), 0.0);
        let mid = 0.5 * (th[0] + th[1]);
        assert_eq!(s.optimal_terminal_value(mid), 1.05);
    }

    #[test]
    fn variance_nonnegative() {
        let s = solve(0.0, 0.2, 0.0);
        let mom = s.moments().unwrap();
        assert!(mom.variance() > 0.0);
        assert!(s.sharpe_ratio().unwrap().is_finite());
    }
}
