//! Expected utilities of both parties at the optimal fund value.
//!
//! Each band of the optimal fund value contributes separately. On a constant
//! band the payoff is constant. On a power band the payoff plus the party's
//! shift is `k z^{-1/b_M} + l`: when `l` vanishes (always for the manager)
//! the expectation is a truncated power moment, otherwise it is integrated
//! numerically on the standard-normal scale.

use serde::Serialize;

use crate::error::Result;
use crate::fee::{FeeBounds, FeeStructure};
use crate::market::MarketParams;
use crate::normal;
use crate::optimize::{self, Options};
use crate::preferences::{CaseTag, HaraParams, Party};
use crate::quadrature::{integrate, Tolerance};
use crate::wealth::{BandShape, OptimalWealthSolution, WealthBand};

/// Half-width of the standard-normal window integrated over.
pub const W_TRUNCATION: f64 = 10.0;

/// Quadrature settings for the mixed expectation.
pub fn value_tolerance() -> Tolerance {
    Tolerance {
        relative: 1e-12,
        absolute: 1e-15,
        ..Tolerance::default()
    }
}

/// `(φ_M, φ_I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValuePair {
    pub phi_m: f64,
    pub phi_i: f64,
}

/// Market and both parties' preferences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Model {
    pub market: MarketParams,
    pub manager: HaraParams,
    pub investor: HaraParams,
}

/// Everything reported for one fee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeeEvaluation {
    pub fee: FeeStructure,
    pub case: CaseTag,
    pub y_star: f64,
    pub phi_m: f64,
    pub phi_i: f64,
    pub sharpe: f64,
}

impl Model {
    pub fn base_case() -> Self {
        Self {
            market: MarketParams::base_case(),
            manager: HaraParams::base_case(),
            investor: HaraParams::base_case(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.manager.validate()?;
        self.investor.validate()
    }

    pub fn solve(&self, fee: &FeeStructure) -> Result<OptimalWealthSolution> {
        OptimalWealthSolution::solve(fee, &self.manager, &self.market)
    }

    pub fn values(&self, fee: &FeeStructure) -> Result<ValuePair> {
        let sol = self.solve(fee)?;
        Ok(ValuePair {
            phi_m: manager_value(&sol)?,
            phi_i: investor_value(&sol, &self.investor)?,
        })
    }

    pub fn evaluate(&self, fee: &FeeStructure) -> Result<FeeEvaluation> {
        let sol = self.solve(fee)?;
        Ok(FeeEvaluation {
            fee: *fee,
            case: sol.case(),
            y_star: sol.y_star,
            phi_m: manager_value(&sol)?,
            phi_i: investor_value(&sol, &self.investor)?,
            sharpe: sol.sharpe_ratio()?,
        })
    }
}

/// `E[U(payoff(V*_T)) 1{band}]` for one party.
fn band_utility(sol: &OptimalWealthSolution, band: &WealthBand, hara: &HaraParams, party: Party) -> Result<f64> {
    let market = &sol.market;
    let v0 = market.v0;
    let fee = sol.fee();
    let affine = match party {
        Party::Manager => fee.manager_affine(v0, band.branch),
        Party::Investor => fee.investor_affine(v0, band.branch),
    };
    let prob = || market.band_probability(band.z_lo, band.z_hi);
    match band.shape {
        BandShape::Constant(v) => Ok(hara.utility(affine.at(v))? * prob()?),
        BandShape::Power { scale, shift } => {
            let k = affine.slope * scale;
            let l = affine.slope * shift + affine.intercept + hara.a;
            let e = 1.0 - hara.b;
            if k == 0.0 {
                return Ok(hara.utility(l - hara.a)? * prob()?);
            }
            let size = 1.0f64
                .max((affine.slope * shift).abs())
                .max(affine.intercept.abs() + hara.a.abs());
            if l.abs() <= 1e-12 * size {
                let moment = market.partial_power_expectation(-e / sol.envelope.hara.b, band.z_lo, band.z_hi)?;
                return Ok(k.powf(e) / e * moment);
            }
            mixed_expectation(market, sol.envelope.hara.b, k, l, e, band)
        }
    }
}

/// `E[(k Z^{-1/b_M} + l)^e / e · 1{band}]` by quadrature over `w`, where
/// `Z = exp(-(r + γ²/2)T - γ√T w)`.
fn mixed_expectation(market: &MarketParams, b_m: f64, k: f64, l: f64, e: f64, band: &WealthBand) -> Result<f64> {
    let w_lo = market.standard_from_z(band.z_hi).max(-W_TRUNCATION);
    let w_hi = market.standard_from_z(band.z_lo).min(W_TRUNCATION);
    if !(w_lo < w_hi) {
        return Ok(0.0);
    }
    let (drift, vol) = (market.log_drift(), market.log_vol());
    let f = |w: f64| {
        let base = (k * ((drift + vol * w) / b_m).exp() + l).max(0.0);
        base.powf(e) / e * normal::pdf(w)
    };
    Ok(integrate(f, w_lo, w_hi, value_tolerance())?.value)
}

/// `φ_M = E[Ũ_M(M(V*_T))]`.
pub fn manager_value(sol: &OptimalWealthSolution) -> Result<f64> {
    let hara = sol.envelope.hara;
    sol.bands
        .iter()
        .map(|band| band_utility(sol, band, &hara, Party::Manager))
        .sum()
}

/// `φ_I = E[Ũ_I(I(V*_T))]`.
pub fn investor_value(sol: &OptimalWealthSolution, investor: &HaraParams) -> Result<f64> {
    investor.check_for_fee(Party::Investor, sol.fee(), sol.market.v0)?;
    sol.bands
        .iter()
        .map(|band| band_utility(sol, band, investor, Party::Investor))
        .sum()
}

/// Result of a box-constrained investor-utility maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvestorOptimum {
    pub fee: FeeStructure,
    pub phi_i: f64,
    /// Best point of the seeding grid.
    pub grid_fee: FeeStructure,
    pub grid_phi_i: f64,
}

/// Evenly spaced points from `lo` to `hi` with spacing close to `step`.
pub fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let n = ((hi - lo) / step).round().max(1.0) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Maximizes `φ_I` over `bounds`: dense grid with the given steps, then
/// local refinement from the best grid point.
pub fn optimize_investor(model: &Model, bounds: &FeeBounds, steps: [f64; 3]) -> Result<InvestorOptimum> {
    let axes: Vec<Vec<f64>> = (0..3).map(|i| axis(bounds.lo[i], bounds.hi[i], steps[i])).collect();
    let mut best: Option<(FeeStructure, f64)> = None;
    let mut first_err = None;
    for &m in &axes[0] {
        for &a in &axes[1] {
            for &c in &axes[2] {
                let fee = FeeStructure::from_array([m, a, c]);
                match model.values(&fee) {
                    Ok(v) if best.is_none_or(|(_, b)| v.phi_i > b) => best = Some((fee, v.phi_i)),
                    Ok(_) => {}
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
        }
    }
    let Some((grid_fee, grid_phi_i)) = best else {
        return Err(first_err.expect("grid is nonempty"));
    };
    let objective = |x: [f64; 3]| model.values(&FeeStructure::from_array(x)).map(|v| (v.phi_i, 0.0));
    let sol = optimize::maximize(&objective, None, bounds, grid_fee.as_array(), &Options::default());
    let (fee, phi_i) = if sol.value >= grid_phi_i {
        (FeeStructure::from_array(sol.x), sol.value)
    } else {
        (grid_fee, grid_phi_i)
    };
    Ok(InvestorOptimum {
        fee,
        phi_i,
        grid_fee,
        grid_phi_i,
    })
}

/// Best `(m, α)` for the investor with `c = 0`.
pub fn optimize_traditional(model: &Model, m_range: (f64, f64), alpha_range: (f64, f64)) -> Result<InvestorOptimum> {
    let bounds = FeeBounds {
        lo: [m_range.0, alpha_range.0, 0.0],
        hi: [m_range.1, alpha_range.1, 0.0],
    };
    optimize_investor(model, &bounds, [0.0025, 0.005, 0.005])
}
