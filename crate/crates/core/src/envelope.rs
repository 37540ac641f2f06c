//! Concave envelope of the manager's utility in the fund value and the
//! pointwise maximizer of `u_M(v) - y z v`.
//!
//! `U_M` is flat on `[0, Θ1)`, follows the guarantee branch on `[Θ1, Θ2)` and
//! the performance-fee branch on `[Θ2, ∞)`. Its concave envelope is the
//! chord from `(0, U_M(0))` to some `θ1 ≥ Θ1` followed by `U_M` itself. The
//! chord either touches the performance-fee branch tangentially (case A),
//! ends at the kink `Θ2` (case B), or touches the guarantee branch
//! tangentially (case C).

use crate::error::{invalid, Error, Result};
use crate::fee::FeeStructure;
use crate::preferences::{classify_case, pow_guarded, CaseTag, HaraParams, Party};
use crate::roots::brent;

const ROOT_XTOL: f64 = 1e-12;

/// The concave envelope `u_M` for one fee structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcaveEnvelope {
    pub case: CaseTag,
    pub fee: FeeStructure,
    pub hara: HaraParams,
    pub v0: f64,
    /// Right end of the linear piece.
    pub theta1: f64,
    /// Start of the performance-fee piece of `u_M` (`Θ2`, or `θ1` in case A).
    pub theta2: f64,
    /// Slope of the linear piece, `(U_M(θ1) - U_M(0)) / θ1`.
    pub slope: f64,
    /// `U_M(0)`.
    pub u_at_zero: f64,
}

impl ConcaveEnvelope {
    pub fn build(fee: &FeeStructure, hara: &HaraParams, v0: f64) -> Result<Self> {
        hara.check_for_fee(Party::Manager, fee, v0)?;
        let case = classify_case(fee, hara, v0)?;
        let (a, b) = (hara.a, hara.b);
        let (m, alpha, c) = (fee.m, fee.alpha, fee.c);
        let u_at_zero = hara.utility(v0 * (m - c))?;
        let rhs = pow_guarded(v0 * (m - c) + a, 1.0 - b)?;
        let loss_edge = fee.loss_threshold(v0);
        let surplus_edge = fee.surplus_threshold(v0);

        let (theta1, slope) = match case {
            CaseTag::A => {
                let k = (m - alpha * (1.0 + m)) * v0;
                let tangency = |v: f64| (alpha * v + k + a).powf(-b) * (b * alpha * v + k + a) - rhs;
                let hi = expand_upper(tangency, surplus_edge, v0)?;
                let theta1 = brent("case A tangency", tangency, surplus_edge, hi, ROOT_XTOL)?;
                let slope = alpha * pow_guarded(alpha * theta1 + k + a, -b)?;
                (theta1, slope)
            }
            CaseTag::B => {
                let h = crate::preferences::case_determinant(fee, hara, v0)?;
                (surplus_edge, h)
            }
            CaseTag::C => {
                let tangency = |v: f64| (v - v0 + a).powf(-b) * (b * v - v0 + a) - rhs;
                let theta1 = brent("case C tangency", tangency, loss_edge, surplus_edge, ROOT_XTOL)?;
                let slope = pow_guarded(theta1 - v0 + a, -b)?;
                (theta1, slope)
            }
        };
        // θ1 = Θ1 would need a chord slope of zero, which a strictly
        // increasing guarantee branch rules out.
        if !(slope > 0.0) || theta1 <= loss_edge {
            return Err(Error::RootFinding {
                context: "concave envelope",
                reason: format!("degenerate concavification point {theta1} (slope {slope})"),
                lo: loss_edge,
                hi: surplus_edge,
            });
        }
        Ok(Self {
            case,
            fee: *fee,
            hara: *hara,
            v0,
            theta1,
            theta2: theta1.max(surplus_edge),
            slope,
            u_at_zero,
        })
    }

    /// `U_M(v)`, the non-concave utility being enveloped.
    pub fn composite(&self, v: f64) -> Result<f64> {
        self.hara.utility(self.fee.manager_payoff(self.v0, v)?)
    }

    /// `u_M(v)`.
    pub fn eval(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(invalid("v", format!("envelope is evaluated on v >= 0, got {v}")));
        }
        if v < self.theta1 {
            Ok(self.u_at_zero + self.slope * v)
        } else {
            self.composite(v)
        }
    }

    /// Right derivative of `u_M`.
    pub fn derivative(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(invalid("v", format!("envelope is evaluated on v >= 0, got {v}")));
        }
        if v < self.theta1 {
            return Ok(self.slope);
        }
        let fee = &self.fee;
        let branch = fee.branch(self.v0, v);
        let payoff = fee.manager_affine(self.v0, branch);
        Ok(payoff.slope * self.hara.marginal(payoff.at(v))?)
    }

    /// `(m v0 + a)^{-b}`: marginal utility of the guarantee branch at `Θ2-`.
    pub fn kink_marginal(&self) -> f64 {
        (self.fee.m * self.v0 + self.hara.a).powf(-self.hara.b)
    }

    /// Inverse marginal utility of the performance-fee branch, `I_3`.
    pub fn surplus_inverse(&self, q: f64) -> f64 {
        let (alpha, b, a) = (self.fee.alpha, self.hara.b, self.hara.a);
        let m = self.fee.m;
        alpha.powf(1.0 / b - 1.0) * q.powf(-1.0 / b) + (1.0 + m - m / alpha) * self.v0 - a / alpha
    }

    /// Inverse marginal utility of the guarantee branch, `I_2`.
    pub fn guarantee_inverse(&self, q: f64) -> f64 {
        q.powf(-1.0 / self.hara.b) + self.v0 - self.hara.a
    }

    /// Maximizer of `u_M(v) - y z v` over `v >= 0`.
    ///
    /// At the tie `y z = s(θ1)` every point of `[0, θ1]` is optimal; zero is
    /// returned.
    pub fn pointwise_argmax(&self, y: f64, z: f64) -> f64 {
        let q = y * z;
        if q >= self.slope {
            return 0.0;
        }
        let (a, b) = (self.hara.a, self.hara.b);
        if self.theta1 < self.theta2 {
            let mid_hi = (self.theta1 - self.v0 + a).powf(-b);
            if q >= mid_hi {
                return self.theta1;
            }
            if q > self.kink_marginal() {
                return self.guarantee_inverse(q);
            }
        }
        let top_payoff = self
            .fee
            .manager_affine(self.v0, crate::fee::PayoffBranch::Surplus)
            .at(self.theta2);
        let top = self.fee.alpha * (top_payoff + a).powf(-b);
        if q >= top {
            self.theta2
        } else {
            self.surplus_inverse(q)
        }
    }
}

/// Doubles the upper end from `2 * lower` until `f` changes sign.
fn expand_upper<F: Fn(f64) -> f64>(f: F, lower: f64, v0: f64) -> Result<f64> {
    let f_lo = f(lower);
    let cap = 2f64.powi(60) * v0;
    let mut hi = 2.0 * lower;
    while hi <= cap {
        let f_hi = f(hi);
        if f_hi.is_nan() {
            break;
        }
        if f_hi.signum() != f_lo.signum() || f_hi == 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::RootFinding {
        context: "case A tangency",
        reason: "no sign change before 2^60 v0".into(),
        lo: lower,
        hi: cap,
    })
}
