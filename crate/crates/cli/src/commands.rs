use std::path::Path;

use serde_json::json;

use firstloss::config::RunConfig;
use firstloss::fee::FeeStructure;
use firstloss::oracle;
use firstloss::pareto::{grid_scan, sweep_frontier, sweep_lattice, Frontier};
use firstloss::preferences::case_determinant;
use firstloss::selection::{
    constant_mix_benchmark, constrained_preferred_fee, preferred_fee, sensitivity_sweep, PreferredFee, SelectionRule,
    SensitivityGrid,
};
use firstloss::valuation::{investor_value, manager_value};
use firstloss::ConcaveEnvelope;

use crate::output::{json_doc, num, write_atomic, Csv};
use crate::{Axis, Failure, Outcome};

/// Default risk-aversion grid, used for both parties.
const RISK_AVERSIONS: [f64; 8] = [0.35, 0.45, 0.55, 0.65, 0.75, 1.25, 2.5, 5.0];

fn fee_json(fee: &FeeStructure) -> serde_json::Value {
    json!({ "m": fee.m, "alpha": fee.alpha, "c": fee.c, "percent": fee.to_string() })
}

pub fn envelope(cfg: &RunConfig, fee: &FeeStructure, out: &Path) -> Outcome<String> {
    let env = ConcaveEnvelope::build(fee, &cfg.manager, cfg.market.v0)?;
    let h = case_determinant(fee, &cfg.manager, cfg.market.v0)?;
    let doc = json!({
        "fee": fee_json(fee),
        "case": env.case.to_string(),
        "theta1": env.theta1,
        "theta2": env.theta2,
        "slope": env.slope,
        "u_at_zero": env.u_at_zero,
        "chord_slope_to_kink": h,
        "kink_marginal": env.kink_marginal(),
    });
    write_atomic(out, &json_doc(cfg, doc))?;
    Ok(format!(
        "envelope {fee}: case {} theta1={} slope={} -> {}",
        env.case,
        env.theta1,
        env.slope,
        out.display()
    ))
}

pub fn wealth(cfg: &RunConfig, fee: &FeeStructure, out: &Path) -> Outcome<String> {
    let sol = cfg.model().solve(fee)?;
    let mom = sol.moments()?;
    let sharpe = sol.sharpe_ratio()?;
    let doc = json!({
        "fee": fee_json(fee),
        "case": sol.case().to_string(),
        "y_star": sol.y_star,
        "theta1": sol.envelope.theta1,
        "z_thresholds": sol.z_thresholds(),
        "standardized_thresholds": sol.standardized_thresholds(),
        "mean": mom.mean,
        "variance": mom.variance(),
        "sharpe": sharpe,
    });
    write_atomic(out, &json_doc(cfg, doc))?;
    Ok(format!(
        "wealth {fee}: case {} y*={} E[V]={} Var={} SR={} -> {}",
        sol.case(),
        sol.y_star,
        mom.mean,
        mom.variance(),
        sharpe,
        out.display()
    ))
}

pub fn value(cfg: &RunConfig, fee: &FeeStructure, out: &Path) -> Outcome<String> {
    let sol = cfg.model().solve(fee)?;
    let phi_m = manager_value(&sol)?;
    let phi_i = investor_value(&sol, &cfg.investor)?;
    let doc = json!({
        "fee": fee_json(fee),
        "case": sol.case().to_string(),
        "phi_M": phi_m,
        "phi_I": phi_i,
    });
    write_atomic(out, &json_doc(cfg, doc))?;
    Ok(format!("value {fee}: phi_M={phi_m} phi_I={phi_i} -> {}", out.display()))
}

pub fn grid(cfg: &RunConfig, out: &Path) -> Outcome<String> {
    let lattice = grid_scan(&cfg.model(), &cfg.steps)?;
    let mut csv = Csv::new(cfg, &["m", "alpha", "c", "case", "phi_M", "phi_I", "SR"]);
    for p in &lattice.points {
        csv.row(&[
            num(p.fee.m),
            num(p.fee.alpha),
            num(p.fee.c),
            p.case.to_string(),
            num(p.phi_m),
            num(p.phi_i),
            num(p.sharpe),
        ]);
    }
    write_atomic(out, &csv.into_string())?;
    Ok(format!(
        "grid: {} points ({} skipped as inadmissible), phi_M in [{}, {}] -> {}",
        lattice.points.len(),
        lattice.skipped.len(),
        lattice.phi_m_min,
        lattice.phi_m_max,
        out.display()
    ))
}

fn frontier_csv(cfg: &RunConfig, frontier: &Frontier) -> String {
    let mut csv = Csv::new(
        cfg,
        &["phi_min", "m", "alpha", "c", "phi_M", "phi_I", "SR", "bound_flags"],
    );
    for p in &frontier.points {
        csv.row(&[
            num(p.phi_min),
            num(p.fee.m),
            num(p.fee.alpha),
            num(p.fee.c),
            num(p.phi_m),
            num(p.phi_i),
            num(p.sharpe),
            p.bound_code(),
        ]);
    }
    csv.into_string()
}

pub fn frontier(cfg: &RunConfig, out: &Path) -> Outcome<String> {
    let frontier = sweep_frontier(&cfg.model(), &cfg.steps)?;
    write_atomic(out, &frontier_csv(cfg, &frontier))?;
    for (phi, reason) in &frontier.failures {
        eprintln!("warning: floor {phi} failed: {reason}");
    }
    Ok(format!(
        "frontier: {} points, {} failures, phi_M in [{}, {}] -> {}",
        frontier.points.len(),
        frontier.failures.len(),
        frontier.phi_m_min,
        frontier.phi_m_max,
        out.display()
    ))
}

fn preferred_json(p: &PreferredFee) -> serde_json::Value {
    let rule = match p.rule {
        SelectionRule::MaxSharpe => json!({ "rule": "max_sharpe" }),
        SelectionRule::Floor { floor, phi_m_floor } => {
            json!({ "rule": "floor", "floor": fee_json(&floor), "phi_M_floor": phi_m_floor })
        }
    };
    json!({
        "fee": fee_json(&p.fee),
        "sharpe": p.sharpe,
        "phi_M": p.phi_m,
        "phi_I": p.phi_i,
        "phi_min": p.phi_min,
        "selection": rule,
    })
}

pub fn preferred(cfg: &RunConfig, floor: Option<&FeeStructure>, out: &Path) -> Outcome<String> {
    let model = cfg.model();
    let lattice = grid_scan(&model, &cfg.steps)?;
    let frontier = sweep_lattice(&model, &lattice);
    let (doc, summary) = match floor {
        None => {
            let p = preferred_fee(&frontier)?;
            (preferred_json(&p), format!("preferred: {} SR={}", p.fee, p.sharpe))
        }
        Some(floor) => match constrained_preferred_fee(&frontier, &model, floor)? {
            Some(p) => (
                preferred_json(&p),
                format!("preferred with floor {floor}: {} SR={}", p.fee, p.sharpe),
            ),
            None => (
                json!({ "fee": null, "selection": { "rule": "floor", "floor": fee_json(floor) },
                        "note": "no frontier fee gives the manager at least the floor value" }),
                format!("preferred with floor {floor}: no improving frontier fee"),
            ),
        },
    };
    write_atomic(out, &json_doc(cfg, doc))?;
    Ok(format!("{summary} -> {}", out.display()))
}

pub fn sensitivity_grid(axis: Axis, values: Option<&[String]>) -> Outcome<SensitivityGrid> {
    let parse = |s: &str| -> Outcome<f64> {
        s.trim()
            .parse()
            .map_err(|e| Failure::Config(format!("--values `{s}`: {e}")))
    };
    Ok(match axis {
        Axis::Ba => {
            let pairs = match values {
                Some(vs) => vs
                    .iter()
                    .map(|v| {
                        let (m, i) = v
                            .split_once(':')
                            .ok_or_else(|| Failure::Config(format!("--values `{v}`: expected bM:bI")))?;
                        Ok((parse(m)?, parse(i)?))
                    })
                    .collect::<Outcome<Vec<_>>>()?,
                None => RISK_AVERSIONS
                    .iter()
                    .flat_map(|&bm| RISK_AVERSIONS.iter().map(move |&bi| (bm, bi)))
                    .collect(),
            };
            SensitivityGrid::RiskAversion(pairs)
        }
        Axis::R | Axis::Gamma => {
            let default: &[f64] = if axis == Axis::R {
                &[-2.0, 0.0, 2.0, 4.0, 6.0]
            } else {
                &[30.0, 40.0, 50.0, 60.0, 70.0]
            };
            let pct = match values {
                Some(vs) => vs.iter().map(|v| parse(v)).collect::<Outcome<Vec<_>>>()?,
                None => default.to_vec(),
            };
            let fr: Vec<f64> = pct.iter().map(|p| p / 100.0).collect();
            if axis == Axis::R {
                SensitivityGrid::Rate(fr)
            } else {
                SensitivityGrid::Gamma(fr)
            }
        }
    })
}

pub fn sensitivity(cfg: &RunConfig, grid: &SensitivityGrid, out: &Path) -> Outcome<String> {
    let cells = sensitivity_sweep(grid, &cfg.model(), &cfg.steps);
    let mut csv = Csv::new(
        cfg,
        &[
            "b_M", "b_I", "r", "gamma", "m", "alpha", "c", "SR", "phi_M", "phi_I", "phi_min", "error",
        ],
    );
    let mut failed = 0;
    for cell in &cells {
        let mut row = vec![
            num(cell.model.manager.b),
            num(cell.model.investor.b),
            num(cell.model.market.r),
            num(cell.model.market.gamma),
        ];
        match &cell.result {
            Ok(p) => {
                row.extend([p.fee.m, p.fee.alpha, p.fee.c, p.sharpe, p.phi_m, p.phi_i, p.phi_min].map(num));
                row.push(String::new());
            }
            Err(e) => {
                failed += 1;
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(format!("\"{}\"", e.replace('"', "'")));
            }
        }
        csv.row(&row);
    }
    write_atomic(out, &csv.into_string())?;
    Ok(format!(
        "sensitivity: {} cells, {failed} failed -> {}",
        cells.len(),
        out.display()
    ))
}

pub fn benchmark(cfg: &RunConfig, pis: &[f64], fee: Option<FeeStructure>, out: &Path) -> Outcome<String> {
    let model = cfg.model();
    let fee = match fee {
        Some(f) => f,
        None => preferred_fee(&sweep_frontier(&model, &cfg.steps)?)?.fee,
    };
    let sol = model.solve(&fee)?;
    let mom = sol.moments()?;
    let mut csv = Csv::new(cfg, &["strategy", "pi", "SR", "mean", "variance", "phi_M", "phi_I"]);
    csv.row(&[
        "optimal".into(),
        String::new(),
        num(sol.sharpe_ratio()?),
        num(mom.mean),
        num(mom.variance()),
        num(manager_value(&sol)?),
        num(investor_value(&sol, &cfg.investor)?),
    ]);
    for &pi in pis {
        let cm = constant_mix_benchmark(pi, &model, &fee)?;
        csv.row(&[
            "constant_mix".into(),
            num(pi),
            cm.sharpe.map_or_else(|| "degenerate".into(), num),
            num(cm.mean),
            num(cm.variance),
            num(cm.phi_m),
            num(cm.phi_i),
        ]);
    }
    write_atomic(out, &csv.into_string())?;
    Ok(format!(
        "benchmark {fee}: {} strategies -> {}",
        pis.len() + 1,
        out.display()
    ))
}

pub fn default_verify_fees() -> Vec<FeeStructure> {
    [
        (0.0, 20.0, 0.0),
        (2.0, 20.0, 0.0),
        (0.0, 30.0, 20.0),
        (5.0, 37.5, 26.0),
        (5.0, 10.0, 26.0),
    ]
    .iter()
    .map(|&(m, a, c)| FeeStructure::from_percent(m, a, c).expect("fixed fees are admissible"))
    .collect()
}

/// Largest accepted |z| for a Monte Carlo check.
const Z_LIMIT: f64 = 4.0;
/// Largest accepted relative gap to the brute-force pointwise optimizer.
const POINTWISE_LIMIT: f64 = 1e-6;

pub fn verify(cfg: &RunConfig, fees: &[FeeStructure], out: &Path) -> Outcome<String> {
    let model = cfg.model();
    let mut csv = Csv::new(
        cfg,
        &["fee", "quantity", "closed_form", "estimate", "std_error", "z", "pass"],
    );
    let mut report = Vec::new();
    let mut failures = 0;
    for fee in fees {
        for check in oracle::check_fee(&model, fee, cfg.seed, cfg.mc_draws)? {
            let pass = check.passed(Z_LIMIT);
            failures += usize::from(!pass);
            report.push(format!(
                "{} {fee} {:<13} z={:+.3}",
                if pass { "PASS" } else { "FAIL" },
                check.quantity,
                check.z_score()
            ));
            csv.row(&[
                format!("\"{fee}\""),
                check.quantity.into(),
                num(check.closed_form),
                num(check.estimate.mean),
                num(check.estimate.std_error),
                num(check.z_score()),
                pass.to_string(),
            ]);
        }
        let gap = oracle::check_pointwise(&model, fee, cfg.seed, 1000)?;
        let pass = gap <= POINTWISE_LIMIT;
        failures += usize::from(!pass);
        report.push(format!(
            "{} {fee} pointwise     max rel gap={gap:.3e}",
            if pass { "PASS" } else { "FAIL" }
        ));
        csv.row(&[
            format!("\"{fee}\""),
            "pointwise".into(),
            String::new(),
            String::new(),
            String::new(),
            num(gap),
            pass.to_string(),
        ]);
    }
    write_atomic(out, &csv.into_string())?;
    for line in &report {
        eprintln!("{line}");
    }
    let summary = format!(
        "verify: {} checks, {failures} failed (n={}, seed={}) -> {}",
        report.len(),
        cfg.mc_draws,
        cfg.seed,
        out.display()
    );
    if failures > 0 {
        return Err(Failure::Numerical(summary));
    }
    Ok(summary)
}
