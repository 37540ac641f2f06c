//! Independent checks for the closed forms: seeded Monte Carlo estimators
//! over the pricing kernel and a brute-force pointwise optimizer.
//!
//! Draws come from ChaCha8 with one stream per chunk of `2^16` normals, so a
//! given `(seed, n)` yields the same sample however the chunks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::ConcaveEnvelope;
use crate::error::{invalid, Error, Result};
use crate::fee::FeeStructure;
use crate::market::MarketParams;
use crate::preferences::{HaraParams, Party};
use crate::valuation::{investor_value, manager_value, Model};
use crate::wealth::OptimalWealthSolution;

/// Normals drawn from one RNG stream.
pub const CHUNK: usize = 1 << 16;
/// Smallest sample an estimate may be based on.
pub const MIN_DRAWS: usize = 1000;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `(target - mean) / std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = target - self.mean;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        self.z_score(target).abs() <= k
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_len(n: usize, chunk: usize) -> usize {
    CHUNK.min(n - chunk * CHUNK)
}

/// Calls `f` on `n` standard-normal draws, in stream order.
pub fn for_each_normal<F: FnMut(f64)>(seed: u64, n: usize, mut f: F) {
    for chunk in 0..n.div_ceil(CHUNK) {
        let mut rng = chunk_rng(seed, chunk);
        for _ in 0..chunk_len(n, chunk) {
            f(StandardNormal.sample(&mut rng));
        }
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Self {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }
}

fn check_draws(n: usize) -> Result<()> {
    if n < MIN_DRAWS {
        return Err(invalid("n", format!("need at least {MIN_DRAWS} draws, got {n}")));
    }
    Ok(())
}

/// Runs `f` on each chunk's draws in parallel, returning per-chunk results in order.
fn map_chunks<T, F>(seed: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut dyn FnMut() -> f64, usize) -> T + Sync,
{
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, chunk);
            let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
            f(&mut draw, chunk_len(n, chunk))
        })
        .collect()
}

/// Monte Carlo estimate of `E[g(Z̃_T)]`.
pub fn mc_expectation<G>(market: &MarketParams, seed: u64, n: usize, g: G) -> Result<McEstimate>
where
    G: Fn(f64) -> f64 + Sync,
{
    check_draws(n)?;
    let acc = map_chunks(seed, n, |draw, len| {
        let mut w = Welford::default();
        for _ in 0..len {
            w.push(g(market.z_from_standard(draw())));
        }
        w
    })
    .into_iter()
    .fold(Welford::default(), Welford::merge);
    if !(acc.mean.is_finite() && acc.m2.is_finite()) {
        return Err(Error::NonFinite {
            context: "Monte Carlo sample",
        });
    }
    let var = acc.m2 / (n as f64 - 1.0);
    Ok(McEstimate {
        mean: acc.mean,
        std_error: (var / n as f64).sqrt(),
        n,
        seed,
    })
}

/// Estimate of `E[Z̃_T V*_T]`.
pub fn mc_budget(sol: &OptimalWealthSolution, seed: u64, n: usize) -> Result<McEstimate> {
    mc_expectation(&sol.market, seed, n, |z| z * sol.optimal_terminal_value(z))
}

/// Estimate of `E[(V*_T)^power]`.
pub fn mc_moment(sol: &OptimalWealthSolution, power: i32, seed: u64, n: usize) -> Result<McEstimate> {
    mc_expectation(&sol.market, seed, n, |z| sol.optimal_terminal_value(z).powi(power))
}

/// Estimate of `E[U_party(payoff(V*_T))]`; `hara` is the valued party's utility.
pub fn mc_value(
    sol: &OptimalWealthSolution,
    hara: &HaraParams,
    party: Party,
    seed: u64,
    n: usize,
) -> Result<McEstimate> {
    let fee = *sol.fee();
    let v0 = sol.market.v0;
    hara.check_for_fee(party, &fee, v0)?;
    mc_expectation(&sol.market, seed, n, |z| {
        let v = sol.optimal_terminal_value(z);
        let payoff = match party {
            Party::Manager => fee.manager_payoff_unchecked(v0, v),
            Party::Investor => fee.investor_payoff_unchecked(v0, v),
        };
        hara.utility(payoff).unwrap_or(f64::NAN)
    })
}

/// Estimate of the Sharpe ratio of `V*_T`, with a delta-method standard error.
pub fn mc_sharpe(sol: &OptimalWealthSolution, seed: u64, n: usize) -> Result<McEstimate> {
    check_draws(n)?;
    let market = &sol.market;
    // Raw power sums of V / v0, merged in chunk order.
    let sums = map_chunks(seed, n, |draw, len| {
        let mut s = [0.0f64; 4];
        for _ in 0..len {
            let x = sol.optimal_terminal_value(market.z_from_standard(draw())) / market.v0;
            let x2 = x * x;
            s[0] += x;
            s[1] += x2;
            s[2] += x2 * x;
            s[3] += x2 * x2;
        }
        s
    })
    .into_iter()
    .fold([0.0f64; 4], |mut acc, s| {
        for i in 0..4 {
            acc[i] += s[i];
        }
        acc
    });
    let nf = n as f64;
    let [m1, m2, m3, m4] = sums.map(|s| s / nf);
    let var = m2 - m1 * m1;
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance { variance: var });
    }
    let sd = var.sqrt();
    let excess = m1 - (1.0 + market.r);
    let sharpe = excess / sd;
    // Gradient of (m1 - c) / sqrt(m2 - m1²) in (m1, m2).
    let g1 = 1.0 / sd + excess * m1 / (var * sd);
    let g2 = -0.5 * excess / (var * sd);
    let c11 = m2 - m1 * m1;
    let c12 = m3 - m1 * m2;
    let c22 = m4 - m2 * m2;
    let var_sr = (g1 * g1 * c11 + 2.0 * g1 * g2 * c12 + g2 * g2 * c22) / nf;
    Ok(McEstimate {
        mean: sharpe,
        std_error: var_sr.max(0.0).sqrt(),
        n,
        seed,
    })
}

/// Maximizer of `u_M(v) - y z v` on `[0, v_max]` by a uniform grid of
/// `grid_n` cells followed by golden-section search on the winning cell's
/// neighbourhood. A winner at `v_max` means the interval was too short.
pub fn brute_pointwise(env: &ConcaveEnvelope, y: f64, z: f64, v_max: f64, grid_n: usize) -> Result<f64> {
    if grid_n < 1000 {
        return Err(invalid("grid_n", format!("need at least 1000 cells, got {grid_n}")));
    }
    if !(v_max > 0.0 && v_max.is_finite()) {
        return Err(invalid("v_max", format!("must be positive, got {v_max}")));
    }
    let q = y * z;
    let objective = |v: f64| env.eval(v).map(|u| u - q * v).unwrap_or(f64::NEG_INFINITY);
    let h = v_max / grid_n as f64;
    let mut best = (0usize, objective(0.0));
    for i in 1..=grid_n {
        let val = objective(i as f64 * h);
        if val > best.1 {
            best = (i, val);
        }
    }
    if best.0 == grid_n {
        return Err(invalid("v_max", format!("maximizer reached the upper end {v_max}")));
    }
    let mut lo = best.0.saturating_sub(1) as f64 * h;
    let mut hi = (best.0 + 1) as f64 * h;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while hi - lo > 1e-14 * hi.max(1.0) {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2);
        }
    }
    // The search never evaluates the bracket ends; the grid point 0 may still win.
    let mid = 0.5 * (lo + hi);
    if best.0 <= 1 && objective(0.0) >= objective(mid) {
        return Ok(0.0);
    }
    Ok(mid)
}

/// One closed form compared with its Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub quantity: &'static str,
    pub fee: FeeStructure,
    pub closed_form: f64,
    pub estimate: McEstimate,
}

impl OracleCheck {
    pub fn z_score(&self) -> f64 {
        self.estimate.z_score(self.closed_form)
    }

    pub fn passed(&self, k: f64) -> bool {
        self.estimate.covers(self.closed_form, k)
    }
}

/// Budget, first two moments, Sharpe ratio and both value functions at
/// `fee`, each against its own Monte Carlo estimate from `(seed, n)`.
pub fn check_fee(model: &Model, fee: &FeeStructure, seed: u64, n: usize) -> Result<Vec<OracleCheck>> {
    let sol = model.solve(fee)?;
    let mom = sol.moments()?;
    let check = |quantity, closed_form, estimate| OracleCheck {
        quantity,
        fee: *fee,
        closed_form,
        estimate,
    };
    Ok(vec![
        check("budget", sol.market.v0, mc_budget(&sol, seed, n)?),
        check("mean", mom.mean, mc_moment(&sol, 1, seed, n)?),
        check("second_moment", mom.second, mc_moment(&sol, 2, seed, n)?),
        check("sharpe", sol.sharpe_ratio()?, mc_sharpe(&sol, seed, n)?),
        check(
            "phi_manager",
            manager_value(&sol)?,
            mc_value(&sol, &model.manager, Party::Manager, seed, n)?,
        ),
        check(
            "phi_investor",
            investor_value(&sol, &model.investor)?,
            mc_value(&sol, &model.investor, Party::Investor, seed, n)?,
        ),
    ])
}

/// Largest relative gap between `pointwise_argmax` and [`brute_pointwise`]
/// over `cases` random `(y, z)` pairs drawn around the solved multiplier.
pub fn check_pointwise(model: &Model, fee: &FeeStructure, seed: u64, cases: usize) -> Result<f64> {
    use rand::Rng;
    let sol = model.solve(fee)?;
    let env = &sol.envelope;
    let mut rng = chunk_rng(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let y = sol.y_star * (rng.random_range(-1.0..1.0f64)).exp();
        let z = (env.slope / y) * (rng.random_range(-4.0..0.5f64)).exp();
        let closed = env.pointwise_argmax(y, z);
        let v_max = 2.0 * closed.max(env.theta2) + 1.0;
        let brute = brute_pointwise(env, y, z, v_max, 4000)?;
        worst = worst.max((brute - closed).abs() / closed.max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = Vec::new();
        for_each_normal(7, CHUNK + 10, |u| a.push(u));
        let mut b = Vec::new();
        for_each_normal(7, CHUNK + 10, |u| b.push(u));
        assert_eq!(a, b);
        let mut c = Vec::new();
        for_each_normal(8, 10, |u| c.push(u));
        assert_ne!(a[..10], c[..]);
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut l, mut r) = (Welford::default(), Welford::default());
        xs[..333].iter().for_each(|&x| l.push(x));
        xs[333..].iter().for_each(|&x| r.push(x));
        let merged = l.merge(r);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.m2 / whole.m2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_mean_is_discount_factor() {
        let m = MarketParams::base_case();
        let est = mc_expectation(&m, 1, 200_000, |z| z).unwrap();
        assert!(est.covers((-m.r).exp(), 4.0), "{est:?}");
        assert!(mc_expectation(&m, 1, 999, |z| z).is_err());
    }
}
