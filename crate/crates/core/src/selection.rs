//! Choosing one fee from the frontier by the fund's Sharpe ratio, sweeping
//! that choice over model parameters, and the constant-mix benchmark.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fee::FeeStructure;
use crate::normal;
use crate::pareto::{sweep_frontier, Frontier, ParetoPoint, Steps};
use crate::preferences::{HaraParams, Party};
use crate::quadrature::integrate;
use crate::valuation::{value_tolerance, Model, W_TRUNCATION};
use crate::wealth::VARIANCE_FLOOR;

/// How a preferred fee was picked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SelectionRule {
    /// Largest Sharpe ratio on the frontier.
    MaxSharpe,
    /// Largest Sharpe ratio among frontier points giving the manager at
    /// least `phi_m_floor`, the manager's value at `floor`.
    Floor { floor: FeeStructure, phi_m_floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreferredFee {
    pub fee: FeeStructure,
    pub sharpe: f64,
    pub phi_m: f64,
    pub phi_i: f64,
    pub phi_min: f64,
    pub rule: SelectionRule,
}

/// Highest Sharpe ratio among `points`; the earliest point wins ties.
fn best_sharpe<'a, I: Iterator<Item = &'a ParetoPoint>>(points: I) -> Option<&'a ParetoPoint> {
    points.fold(None, |best: Option<&ParetoPoint>, p| match best {
        Some(b) if b.sharpe >= p.sharpe => Some(b),
        _ => Some(p),
    })
}

fn preferred_from(p: &ParetoPoint, rule: SelectionRule) -> PreferredFee {
    PreferredFee {
        fee: p.fee,
        sharpe: p.sharpe,
        phi_m: p.phi_m,
        phi_i: p.phi_i,
        phi_min: p.phi_min,
        rule,
    }
}

/// Frontier point with the largest Sharpe ratio; ties go to the smaller `phi_min`.
pub fn preferred_fee(frontier: &Frontier) -> Result<PreferredFee> {
    best_sharpe(frontier.points.iter())
        .map(|p| preferred_from(p, SelectionRule::MaxSharpe))
        .ok_or(Error::EmptyFrontier)
}

/// As [`preferred_fee`], restricted to points where the manager is at least
/// as well off as under `floor`. `Ok(None)` means no frontier point qualifies.
pub fn constrained_preferred_fee(
    frontier: &Frontier,
    model: &Model,
    floor: &FeeStructure,
) -> Result<Option<PreferredFee>> {
    let phi_m_floor = model.values(floor)?.phi_m;
    Ok(constrained_by_value(frontier, *floor, phi_m_floor))
}

pub fn constrained_by_value(frontier: &Frontier, floor: FeeStructure, phi_m_floor: f64) -> Option<PreferredFee> {
    let rule = SelectionRule::Floor { floor, phi_m_floor };
    best_sharpe(frontier.points.iter().filter(|p| p.phi_m >= phi_m_floor)).map(|p| preferred_from(p, rule))
}

/// Parameter swept by [`sensitivity_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum SensitivityGrid {
    /// `(b_M, b_I)` pairs; both shifts stay at the base value.
    RiskAversion(Vec<(f64, f64)>),
    Rate(Vec<f64>),
    Gamma(Vec<f64>),
}

impl SensitivityGrid {
    pub fn models(&self, base: &Model) -> Vec<Model> {
        match self {
            SensitivityGrid::RiskAversion(pairs) => pairs
                .iter()
                .map(|&(bm, bi)| Model {
                    manager: HaraParams { b: bm, ..base.manager },
                    investor: HaraParams { b: bi, ..base.investor },
                    ..*base
                })
                .collect(),
            SensitivityGrid::Rate(rs) => rs
                .iter()
                .map(|&r| Model {
                    market: crate::market::MarketParams { r, ..base.market },
                    ..*base
                })
                .collect(),
            SensitivityGrid::Gamma(gs) => gs
                .iter()
                .map(|&gamma| Model {
                    market: crate::market::MarketParams { gamma, ..base.market },
                    ..*base
                })
                .collect(),
        }
    }
}

/// One cell of a sensitivity table.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCell {
    pub model: Model,
    pub result: std::result::Result<PreferredFee, String>,
}

/// Runs the whole pipeline (lattice, frontier, selection) once per cell.
/// Failures are kept per cell; the output is in grid order.
pub fn sensitivity_sweep(grid: &SensitivityGrid, base: &Model, steps: &Steps) -> Vec<SensitivityCell> {
    grid.models(base)
        .into_par_iter()
        .map(|model| {
            let result = model
                .validate()
                .and_then(|_| sweep_frontier(&model, steps))
                .and_then(|f| preferred_fee(&f))
                .map_err(|e| e.to_string());
            SensitivityCell { model, result }
        })
        .collect()
}

/// A fund held at a constant risky fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantMix {
    pub pi: f64,
    /// `None` for a riskless fund, whose Sharpe ratio is undefined.
    pub sharpe: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    pub phi_m: f64,
    pub phi_i: f64,
}

/// Constant-mix fund `V_T = v0 exp((r + πσγ - π²σ²/2)T + πσ√T N)` under `fee`.
pub fn constant_mix_benchmark(pi: f64, model: &Model, fee: &FeeStructure) -> Result<ConstantMix> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(invalid("pi", format!("risky fraction must lie in [0, 1], got {pi}")));
    }
    let market = &model.market;
    let sigma = market.sigma.ok_or_else(|| Error::Config {
        path: "market.sigma".into(),
        reason: "the constant-mix benchmark needs the risky asset's volatility".into(),
    })?;
    let t = market.horizon;
    let v0 = market.v0;
    let vol = pi * sigma * t.sqrt();
    let drift = (market.r + pi * sigma * market.gamma - 0.5 * pi * pi * sigma * sigma) * t;
    let mean = v0 * ((market.r + pi * sigma * market.gamma) * t).exp();
    let variance = mean * mean * (vol * vol).exp_m1();
    let sharpe = if variance > VARIANCE_FLOOR {
        Some((mean - v0 * (1.0 + market.r)) / variance.sqrt())
    } else {
        None
    };
    let value = |hara: &HaraParams, party: Party| -> Result<f64> {
        hara.check_for_fee(party, fee, v0)?;
        let payoff = |v: f64| match party {
            Party::Manager => fee.manager_payoff_unchecked(v0, v),
            Party::Investor => fee.investor_payoff_unchecked(v0, v),
        };
        if vol == 0.0 {
            return hara.utility(payoff(v0 * drift.exp()));
        }
        // Integrate piecewise between the payoff kinks.
        let w_of = |v: f64| ((v / v0).ln() - drift) / vol;
        let mut cuts = vec![-W_TRUNCATION];
        for kink in [fee.loss_threshold(v0), fee.surplus_threshold(v0)] {
            let w = w_of(kink);
            if w > -W_TRUNCATION && w < W_TRUNCATION {
                cuts.push(w);
            }
        }
        cuts.push(W_TRUNCATION);
        cuts.sort_by(f64::total_cmp);
        let f = |w: f64| {
            let v = v0 * (drift + vol * w).exp();
            hara.utility(payoff(v)).unwrap_or(f64::NAN) * normal::pdf(w)
        };
        let mut total = 0.0;
        for pair in cuts.windows(2) {
            total += integrate(f, pair[0], pair[1], value_tolerance())?.value;
        }
        Ok(total)
    };
    Ok(ConstantMix {
        pi,
        sharpe,
        mean,
        variance,
        phi_m: value(&model.manager, Party::Manager)?,
        phi_i: value(&model.investor, Party::Investor)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riskless_mix_has_no_sharpe() {
        let model = Model::base_case();
        let fee = FeeStructure::from_percent(5.0, 35.5, 26.0).unwrap();
        let cm = constant_mix_benchmark(0.0, &model, &fee).unwrap();
        assert_eq!(cm.sharpe, None);
        assert_eq!(cm.variance, 0.0);
    }

    #[test]
    fn full_risky_mix_sharpe() {
        let model = Model::base_case();
        let fee = FeeStructure::from_percent(5.0, 35.5, 26.0).unwrap();
        let cm = constant_mix_benchmark(1.0, &model, &fee).unwrap();
        assert!((cm.sharpe.unwrap() - 0.3815).abs() < 2e-3);
    }

    #[test]
    fn missing_volatility_is_a_config_error() {
        let mut model = Model::base_case();
        model.market.sigma = None;
        let fee = FeeStructure::from_percent(5.0, 35.5, 26.0).unwrap();
        assert!(matches!(
            constant_mix_benchmark(1.0, &model, &fee),
            Err(Error::Config { .. })
        ));
    }
}
