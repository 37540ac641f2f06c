//! Local maximization of a smooth function over a box in fee space, with at
//! most one inequality constraint `g(x) >= lower`.
//!
//! Augmented Lagrangian outer loop, projected BFGS inner loop, central
//! finite-difference gradients. Coordinates whose bounds coincide are held
//! fixed. Evaluation errors count as an infinitely bad point.

use crate::error::Result;
use crate::fee::FeeBounds;

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    /// Finite-difference step in fee units.
    pub fd_step: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_penalty: f64,
    /// Constraint violation accepted relative to `max(1, |lower|)`.
    pub feasibility_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            fd_step: 1e-6,
            max_outer: 12,
            max_inner: 60,
            initial_penalty: 10.0,
            feasibility_tol: 1e-8,
        }
    }
}

/// Outcome of [`maximize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub x: [f64; 3],
    pub value: f64,
    pub constraint: f64,
    pub feasible: bool,
    pub evaluations: usize,
}

struct Problem<'a, F> {
    f: &'a F,
    bounds: FeeBounds,
    free: Vec<usize>,
    base: [f64; 3],
    lower: Option<f64>,
    obj_scale: f64,
    con_scale: f64,
    fd: Vec<f64>,
    evaluations: std::cell::Cell<usize>,
}

impl<F> Problem<'_, F>
where
    F: Fn([f64; 3]) -> Result<(f64, f64)>,
{
    fn to_x(&self, u: &[f64]) -> [f64; 3] {
        let mut x = self.base;
        for (k, &i) in self.free.iter().enumerate() {
            let (lo, hi) = (self.bounds.lo[i], self.bounds.hi[i]);
            x[i] = (lo + u[k] * (hi - lo)).clamp(lo, hi);
        }
        x
    }

    fn raw(&self, u: &[f64]) -> Option<(f64, f64)> {
        self.evaluations.set(self.evaluations.get() + 1);
        match (self.f)(self.to_x(u)) {
            Ok((f, g)) if f.is_finite() && g.is_finite() => Some((f, g)),
            _ => None,
        }
    }

    /// Scaled objective and constraint slack.
    fn scaled(&self, u: &[f64]) -> Option<(f64, f64)> {
        let (f, g) = self.raw(u)?;
        let slack = self.lower.map_or(0.0, |lo| (g - lo) / self.con_scale);
        Some((f / self.obj_scale, slack))
    }

    fn merit(&self, u: &[f64], lambda: f64, rho: f64) -> f64 {
        let Some((f, c)) = self.scaled(u) else {
            return f64::INFINITY;
        };
        let penalty = if self.lower.is_none() {
            0.0
        } else if c - lambda / rho <= 0.0 {
            -lambda * c + 0.5 * rho * c * c
        } else {
            -0.5 * lambda * lambda / rho
        };
        -f + penalty
    }

    fn gradient(&self, u: &[f64], lambda: f64, rho: f64) -> Option<Vec<f64>> {
        let mut g = vec![0.0; u.len()];
        for k in 0..u.len() {
            let h = self.fd[k];
            let (mut up, mut dn) = (u.to_vec(), u.to_vec());
            up[k] = (u[k] + h).min(1.0);
            dn[k] = (u[k] - h).max(0.0);
            let (fu, fd) = (self.merit(&up, lambda, rho), self.merit(&dn, lambda, rho));
            if !(fu.is_finite() && fd.is_finite()) {
                return None;
            }
            g[k] = (fu - fd) / (up[k] - dn[k]);
        }
        Some(g)
    }

    /// Projected BFGS on the unit box.
    fn inner(&self, mut u: Vec<f64>, lambda: f64, rho: f64, max_iter: usize) -> Vec<f64> {
        let n = u.len();
        let mut hess = identity(n);
        let mut val = self.merit(&u, lambda, rho);
        let Some(mut grad) = self.gradient(&u, lambda, rho) else {
            return u;
        };
        for _ in 0..max_iter {
            let active: Vec<bool> = (0..n)
                .map(|k| (u[k] <= 0.0 && grad[k] > 0.0) || (u[k] >= 1.0 && grad[k] < 0.0))
                .collect();
            let pg: f64 = (0..n)
                .map(|k| ((u[k] - grad[k]).clamp(0.0, 1.0) - u[k]).abs())
                .fold(0.0, f64::max);
            if pg < 1e-10 {
                break;
            }
            let mut dir = direction(&hess, &grad, &active);
            if dot(&dir, &grad) >= 0.0 {
                hess = identity(n);
                dir = direction(&hess, &grad, &active);
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = (0..n).map(|k| (u[k] + t * dir[k]).clamp(0.0, 1.0)).collect();
                let step: Vec<f64> = (0..n).map(|k| trial[k] - u[k]).collect();
                let decrease = dot(&grad, &step);
                if decrease >= 0.0 {
                    t *= 0.5;
                    continue;
                }
                let tv = self.merit(&trial, lambda, rho);
                if tv <= val + 1e-4 * decrease {
                    accepted = Some((trial, tv));
                    break;
                }
                t *= 0.5;
            }
            let Some((trial, tv)) = accepted else {
                break;
            };
            let Some(new_grad) = self.gradient(&trial, lambda, rho) else {
                break;
            };
            let s: Vec<f64> = (0..n).map(|k| trial[k] - u[k]).collect();
            let y: Vec<f64> = (0..n).map(|k| new_grad[k] - grad[k]).collect();
            bfgs_update(&mut hess, &s, &y);
            let improvement = val - tv;
            u = trial;
            val = tv;
            grad = new_grad;
            if improvement <= 1e-15 * (1.0 + val.abs()) {
                break;
            }
        }
        u
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-H g` restricted to the inactive coordinates.
fn direction(hess: &[Vec<f64>], grad: &[f64], active: &[bool]) -> Vec<f64> {
    let n = grad.len();
    (0..n)
        .map(|i| {
            if active[i] {
                0.0
            } else {
                -(0..n)
                    .filter(|&j| !active[j])
                    .map(|j| hess[i][j] * grad[j])
                    .sum::<f64>()
            }
        })
        .collect()
}

/// Inverse-Hessian BFGS update; skipped without sufficient curvature.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let n = s.len();
    let sy = dot(s, y);
    if !(sy > 1e-12 * dot(s, s).sqrt() * dot(y, y).sqrt()) {
        return;
    }
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Maximizes the first component of `f` over `bounds` subject to
/// `second component >= lower` (if given), starting from `x0`.
///
/// The result is never worse than `x0` when `x0` is feasible: if the solver
/// ends infeasible, the point on the segment from `x0` to the solver's
/// answer closest to the answer that is still feasible is used instead.
pub fn maximize<F>(f: &F, lower: Option<f64>, bounds: &FeeBounds, x0: [f64; 3], opts: &Options) -> Solution
where
    F: Fn([f64; 3]) -> Result<(f64, f64)>,
{
    let x0 = bounds.clamp(x0);
    let free: Vec<usize> = (0..3).filter(|&i| bounds.hi[i] > bounds.lo[i]).collect();
    let start = f(x0).ok();
    let obj_scale = start.map_or(1.0, |(v, _)| v.abs().max(1.0));
    let con_scale = lower.map_or(1.0, |l| l.abs().max(1.0));
    let fd = free
        .iter()
        .map(|&i| opts.fd_step / (bounds.hi[i] - bounds.lo[i]))
        .collect();
    let problem = Problem {
        f,
        bounds: *bounds,
        free: free.clone(),
        base: x0,
        lower,
        obj_scale,
        con_scale,
        fd,
        evaluations: std::cell::Cell::new(1),
    };
    let tol = opts.feasibility_tol;
    let mut u: Vec<f64> = free
        .iter()
        .map(|&i| (x0[i] - bounds.lo[i]) / (bounds.hi[i] - bounds.lo[i]))
        .collect();
    if !free.is_empty() && start.is_some() {
        if lower.is_none() {
            u = problem.inner(u, 0.0, 1.0, opts.max_inner * opts.max_outer.max(1));
        } else {
            let (mut lambda, mut rho) = (0.0, opts.initial_penalty);
            let mut last_violation = f64::INFINITY;
            for _ in 0..opts.max_outer {
                u = problem.inner(u, lambda, rho, opts.max_inner);
                let Some((_, c)) = problem.scaled(&u) else {
                    break;
                };
                let violation = (-c).max(0.0);
                let new_lambda = (lambda - rho * c).max(0.0);
                let settled = (new_lambda - lambda).abs() <= 1e-9 * (1.0 + lambda);
                lambda = new_lambda;
                if violation <= 0.1 * tol && settled {
                    break;
                }
                if violation > 0.25 * last_violation {
                    rho = (rho * 10.0).min(1e12);
                }
                last_violation = violation;
            }
        }
    }
    let x = problem.to_x(&u);
    let mut best = finish(&problem, x, lower, tol);
    if let (Some(lo), Some((f0, g0))) = (lower, start) {
        let seed_feasible = g0 >= lo - tol * con_scale;
        if !best.feasible && seed_feasible {
            best = restore(&problem, x0, x, lo, tol);
        }
        if seed_feasible && !(best.feasible && best.value >= f0) {
            best = Solution {
                x: x0,
                value: f0,
                constraint: g0,
                feasible: true,
                evaluations: 0,
            };
        }
    } else if let Some((f0, g0)) = start {
        if !(best.value >= f0) {
            best = Solution {
                x: x0,
                value: f0,
                constraint: g0,
                feasible: lower.is_none_or(|lo| g0 >= lo - tol * con_scale),
                evaluations: 0,
            };
        }
    }
    best.evaluations = problem.evaluations.get();
    best
}

fn finish<F>(p: &Problem<'_, F>, x: [f64; 3], lower: Option<f64>, tol: f64) -> Solution
where
    F: Fn([f64; 3]) -> Result<(f64, f64)>,
{
    p.evaluations.set(p.evaluations.get() + 1);
    match (p.f)(x) {
        Ok((v, g)) if v.is_finite() && g.is_finite() => Solution {
            x,
            value: v,
            constraint: g,
            feasible: lower.is_none_or(|lo| g >= lo - tol * p.con_scale),
            evaluations: 0,
        },
        _ => Solution {
            x,
            value: f64::NEG_INFINITY,
            constraint: f64::NAN,
            feasible: false,
            evaluations: 0,
        },
    }
}

/// Bisects along `seed -> target` for the feasible point nearest `target`.
fn restore<F>(p: &Problem<'_, F>, seed: [f64; 3], target: [f64; 3], lower: f64, tol: f64) -> Solution
where
    F: Fn([f64; 3]) -> Result<(f64, f64)>,
{
    let at = |t: f64| -> [f64; 3] { std::array::from_fn(|i| seed[i] + t * (target[i] - seed[i])) };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = finish(p, seed, Some(lower), tol);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let s = finish(p, at(mid), Some(lower), tol);
        if s.feasible {
            lo = mid;
            best = s;
        } else {
            hi = mid;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> FeeBounds {
        FeeBounds {
            lo: [0.0; 3],
            hi: [1.0; 3],
        }
    }

    #[test]
    fn unconstrained_quadratic() {
        let f = |x: [f64; 3]| {
            Ok((
                -(x[0] - 0.3).powi(2) - 2.0 * (x[1] - 0.6).powi(2) - (x[2] - 0.2).powi(2),
                0.0,
            ))
        };
        let s = maximize(&f, None, &unit_box(), [0.9, 0.1, 0.9], &Options::default());
        for (xi, target) in s.x.iter().zip([0.3, 0.6, 0.2]) {
            assert!((xi - target).abs() < 1e-5, "{:?}", s.x);
        }
    }

    #[test]
    fn bound_is_active() {
        let f = |x: [f64; 3]| Ok((x[0] + x[1] - x[2] * x[2], 0.0));
        let s = maximize(&f, None, &unit_box(), [0.5, 0.5, 0.5], &Options::default());
        assert_eq!(s.x[0], 1.0);
        assert_eq!(s.x[1], 1.0);
        assert!(s.x[2].abs() < 1e-5);
    }

    #[test]
    fn inequality_constraint_binds() {
        // max x0 + x1 subject to 1 - x0² - x1² >= 0.5
        let f = |x: [f64; 3]| Ok((x[0] + x[1], 1.0 - x[0] * x[0] - x[1] * x[1]));
        let bounds = unit_box().fix(2, 0.0);
        let s = maximize(&f, Some(0.5), &bounds, [0.1, 0.1, 0.0], &Options::default());
        assert!(s.feasible);
        let r = 0.5f64.sqrt();
        assert!((s.x[0] - r / 2f64.sqrt()).abs() < 1e-4, "{:?}", s);
        assert!((s.value - 1.0).abs() < 1e-4);
    }

    #[test]
    fn never_worse_than_feasible_seed() {
        let f = |x: [f64; 3]| {
            if x[0] > 0.5 {
                Err(crate::error::Error::NonFinite { context: "test" })
            } else {
                Ok((x[0], 1.0))
            }
        };
        let s = maximize(&f, Some(0.0), &unit_box(), [0.2, 0.0, 0.0], &Options::default());
        assert!(s.feasible && s.value >= 0.2);
    }
}
