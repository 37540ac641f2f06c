//! First-best Pareto-optimal fees: maximize the investor's expected utility
//! subject to a floor on the manager's, over the admissible fee box.
//!
//! A full lattice over the box supplies the attainable range of `φ_M` and a
//! feasible starting point for every floor; a local constrained solve then
//! refines it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fee::{FeeBounds, FeeStructure};
use crate::optimize::{self, Options};
use crate::preferences::CaseTag;
use crate::valuation::{axis, FeeEvaluation, Model};

/// Lattice spacings and number of floor steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Steps {
    pub dm: f64,
    pub dalpha: f64,
    pub dc: f64,
    /// Number of equal steps between the lowest binding floor and `φ_M,max`.
    pub phi_steps: usize,
}

impl Default for Steps {
    fn default() -> Self {
        Self {
            dm: 0.0025,
            dalpha: 0.005,
            dc: 0.005,
            phi_steps: 200,
        }
    }
}

impl Steps {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dm", self.dm), ("dalpha", self.dalpha), ("dc", self.dc)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    field: name,
                    reason: format!("step must be positive, got {v}"),
                });
            }
        }
        if self.phi_steps == 0 {
            return Err(Error::InvalidParameter {
                field: "phi_steps",
                reason: "need at least one step".into(),
            });
        }
        Ok(())
    }
}

/// Every admissible lattice fee with its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub steps: Steps,
    pub axes: [Vec<f64>; 3],
    /// Evaluated points, `c` fastest, then `α`, then `m`.
    pub points: Vec<FeeEvaluation>,
    /// Fees where a party's utility is undefined at its minimal payoff.
    pub skipped: Vec<FeeStructure>,
    pub phi_m_min: f64,
    pub phi_m_max: f64,
}

impl Lattice {
    pub fn size(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    /// Lattice point with the largest `φ_M`.
    pub fn manager_best(&self) -> &FeeEvaluation {
        self.points
            .iter()
            .reduce(|a, b| if b.phi_m > a.phi_m { b } else { a })
            .expect("lattice has points")
    }

    /// Best `φ_I` among points with `φ_M >= phi_min`.
    pub fn best_feasible(&self, phi_min: f64) -> Option<&FeeEvaluation> {
        self.points
            .iter()
            .filter(|p| p.phi_m >= phi_min)
            .reduce(|a, b| if b.phi_i > a.phi_i { b } else { a })
    }
}

/// Evaluates the full lattice over the admissible box.
pub fn grid_scan(model: &Model, steps: &Steps) -> Result<Lattice> {
    model.validate()?;
    steps.validate()?;
    let b = FeeBounds::admissible();
    let axes = [
        axis(b.lo[0], b.hi[0], steps.dm),
        axis(b.lo[1], b.hi[1], steps.dalpha),
        axis(b.lo[2], b.hi[2], steps.dc),
    ];
    let mut fees = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &m in &axes[0] {
        for &a in &axes[1] {
            for &c in &axes[2] {
                fees.push(FeeStructure::from_array([m, a, c]));
            }
        }
    }
    let results: Vec<Result<FeeEvaluation>> = fees.par_iter().map(|f| model.evaluate(f)).collect();
    let mut points = Vec::with_capacity(fees.len());
    let mut skipped = Vec::new();
    for (fee, res) in fees.iter().zip(results) {
        match res {
            Ok(p) => points.push(p),
            Err(Error::InadmissibleUtility { .. }) => skipped.push(*fee),
            Err(e) => {
                return Err(Error::AtFee {
                    fee: *fee,
                    source: Box::new(e),
                })
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    let phi_m_min = points.iter().map(|p| p.phi_m).fold(f64::INFINITY, f64::min);
    let phi_m_max = points.iter().map(|p| p.phi_m).fold(f64::NEG_INFINITY, f64::max);
    Ok(Lattice {
        steps: *steps,
        axes,
        points,
        skipped,
        phi_m_min,
        phi_m_max,
    })
}

/// Where a coordinate sits relative to its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundFlag {
    Interior,
    Lower,
    Upper,
}

impl BoundFlag {
    fn of(x: f64, lo: f64, hi: f64) -> Self {
        let tol = 1e-9;
        if x <= lo + tol {
            BoundFlag::Lower
        } else if x >= hi - tol {
            BoundFlag::Upper
        } else {
            BoundFlag::Interior
        }
    }

    pub fn code(&self) -> char {
        match self {
            BoundFlag::Interior => '-',
            BoundFlag::Lower => 'L',
            BoundFlag::Upper => 'U',
        }
    }
}

/// One first-best Pareto-optimal fee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub phi_min: f64,
    pub fee: FeeStructure,
    pub case: CaseTag,
    pub phi_m: f64,
    pub phi_i: f64,
    pub sharpe: f64,
    /// Bound activity of `(m, α, c)`.
    pub bounds: [BoundFlag; 3],
    pub seed_fee: FeeStructure,
    pub seed_phi_i: f64,
}

impl ParetoPoint {
    pub fn bound_code(&self) -> String {
        self.bounds.iter().map(BoundFlag::code).collect()
    }
}

/// Relative feasibility tolerance on the manager's floor.
pub fn feasibility_slack(phi_min: f64) -> f64 {
    Options::default().feasibility_tol * phi_min.abs().max(1.0)
}

/// Best investor fee with `φ_M >= phi_min`, refined from the best feasible
/// lattice point.
pub fn solve_fbpo(phi_min: f64, lattice: &Lattice, model: &Model) -> Result<ParetoPoint> {
    if !(phi_min >= lattice.phi_m_min && phi_min <= lattice.phi_m_max) {
        return Err(Error::Infeasible {
            phi_min,
            lo: lattice.phi_m_min,
            hi: lattice.phi_m_max,
        });
    }
    let seed = lattice.best_feasible(phi_min).ok_or(Error::Infeasible {
        phi_min,
        lo: lattice.phi_m_min,
        hi: lattice.phi_m_max,
    })?;
    let bounds = FeeBounds::admissible();
    let f = |x: [f64; 3]| model.values(&FeeStructure::from_array(x)).map(|v| (v.phi_i, v.phi_m));
    let sol = optimize::maximize(&f, Some(phi_min), &bounds, seed.fee.as_array(), &Options::default());
    let refined = if sol.feasible && sol.value >= seed.phi_i {
        model.evaluate(&FeeStructure::from_array(sol.x))?
    } else {
        *seed
    };
    let x = refined.fee.as_array();
    Ok(ParetoPoint {
        phi_min,
        fee: refined.fee,
        case: refined.case,
        phi_m: refined.phi_m,
        phi_i: refined.phi_i,
        sharpe: refined.sharpe,
        bounds: std::array::from_fn(|i| BoundFlag::of(x[i], bounds.lo[i], bounds.hi[i])),
        seed_fee: seed.fee,
        seed_phi_i: seed.phi_i,
    })
}

/// The traced frontier and how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub steps: Steps,
    /// Points in increasing `phi_min`.
    pub points: Vec<ParetoPoint>,
    /// Floors whose solve failed, with the reason.
    pub failures: Vec<(f64, String)>,
    pub phi_m_min: f64,
    pub phi_m_max: f64,
    /// `φ_M` at the investor's unconstrained lattice optimum; floors below
    /// it do not bind.
    pub phi_start: f64,
    pub lattice_size: usize,
    pub skipped: usize,
}

/// Floors swept: `φ_M,min`, then `phi_steps + 1` equally spaced values from
/// the lowest binding floor up to `φ_M,max`.
pub fn floor_grid(lattice: &Lattice) -> (f64, Vec<f64>) {
    let free = lattice.best_feasible(f64::NEG_INFINITY).expect("lattice has points");
    let start = free.phi_m.max(lattice.phi_m_min);
    let n = lattice.steps.phi_steps;
    let delta = (lattice.phi_m_max - start) / n as f64;
    let mut grid = vec![lattice.phi_m_min];
    grid.extend((0..=n).map(|k| {
        if k == n {
            lattice.phi_m_max
        } else {
            start + k as f64 * delta
        }
    }));
    grid.dedup();
    (start, grid)
}

pub fn sweep_frontier(model: &Model, steps: &Steps) -> Result<Frontier> {
    let lattice = grid_scan(model, steps)?;
    Ok(sweep_lattice(model, &lattice))
}

/// Solves every floor of [`floor_grid`] on an existing lattice.
pub fn sweep_lattice(model: &Model, lattice: &Lattice) -> Frontier {
    let (phi_start, grid) = floor_grid(lattice);
    let results: Vec<Result<ParetoPoint>> = grid.par_iter().map(|&phi| solve_fbpo(phi, lattice, model)).collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (phi, res) in grid.iter().zip(results) {
        match res {
            Ok(p) => points.push(p),
            Err(e) => failures.push((*phi, e.to_string())),
        }
    }
    Frontier {
        steps: lattice.steps,
        points,
        failures,
        phi_m_min: lattice.phi_m_min,
        phi_m_max: lattice.phi_m_max,
        phi_start,
        lattice_size: lattice.size(),
        skipped: lattice.skipped.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> Steps {
        Steps {
            dm: 0.025,
            dalpha: 0.1,
            dc: 0.1,
            phi_steps: 4,
        }
    }

    #[test]
    fn lattice_size_is_product() {
        let lat = grid_scan(&Model::base_case(), &coarse()).unwrap();
        assert_eq!(lat.size(), 3 * 6 * 4);
        assert_eq!(lat.points.len() + lat.skipped.len(), lat.size());
        let best = lat.manager_best();
        assert_eq!(best.fee.as_array(), [0.05, 0.5, 0.0]);
    }

    #[test]
    fn floor_grid_ends() {
        let lat = grid_scan(&Model::base_case(), &coarse()).unwrap();
        let (start, grid) = floor_grid(&lat);
        assert_eq!(grid[0], lat.phi_m_min);
        assert_eq!(*grid.last().unwrap(), lat.phi_m_max);
        assert!(start >= lat.phi_m_min);
    }

    #[test]
    fn infeasible_floor_rejected() {
        let model = Model::base_case();
        let lat = grid_scan(&model, &coarse()).unwrap();
        let err = solve_fbpo(lat.phi_m_max + 1.0, &lat, &model).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }
}
