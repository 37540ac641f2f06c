//! HARA preferences, the manager's composite utility in the fund value, and
//! the classification of fees into the three concavification cases.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fee::{FeeBounds, FeeStructure};

/// Smallest positive base accepted for a negative power.
const TINY_BASE: f64 = 1e-300;

/// `U(x) = (x + a)^{1-b} / (1 - b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaraParams {
    /// Wealth shift.
    pub a: f64,
    /// Relative risk-aversion exponent, `b > 0`, `b != 1`.
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Manager,
    Investor,
}

impl Party {
    pub fn name(&self) -> &'static str {
        match self {
            Party::Manager => "manager",
            Party::Investor => "investor",
        }
    }
}

/// Concavification case of a fee structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    /// Linear piece ends beyond `Θ2`, on the performance-fee branch.
    A,
    /// Linear piece ends exactly at `Θ2`.
    B,
    /// Linear piece ends inside `(Θ1, Θ2)`.
    C,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::A => "A",
            CaseTag::B => "B",
            CaseTag::C => "C",
        };
        f.write_str(s)
    }
}

/// `base^exponent` for a nonnegative base; refuses to produce infinities.
pub(crate) fn pow_guarded(base: f64, exponent: f64) -> Result<f64> {
    if !(base >= 0.0) {
        return Err(invalid("base", format!("negative power base {base}")));
    }
    if exponent < 0.0 && base < TINY_BASE {
        return Err(Error::NonFinite {
            context: "negative power of a vanishing base",
        });
    }
    if base == 0.0 {
        return Ok(if exponent == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((exponent * base.ln()).exp())
}

impl HaraParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = Self { a, b };
        p.validate()?;
        Ok(p)
    }

    /// `a = 0.3`, `b = 0.65`: both parties in the base case.
    pub fn base_case() -> Self {
        Self { a: 0.3, b: 0.65 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(invalid("a", "must be finite"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(invalid("b", format!("must be positive, got {}", self.b)));
        }
        if (self.b - 1.0).abs() < 1e-9 {
            return Err(invalid("b", "logarithmic utility (b = 1) is not supported"));
        }
        Ok(())
    }

    pub fn utility(&self, wealth: f64) -> Result<f64> {
        let base = wealth + self.a;
        if base < 0.0 {
            return Err(invalid("wealth", format!("{wealth} is below -a = {}", -self.a)));
        }
        if base == 0.0 && self.b > 1.0 {
            return Err(Error::NonFinite {
                context: "utility at the shift point with b > 1",
            });
        }
        Ok(pow_guarded(base, 1.0 - self.b)? / (1.0 - self.b))
    }

    /// `U'(x) = (x + a)^{-b}`.
    pub fn marginal(&self, wealth: f64) -> Result<f64> {
        pow_guarded(wealth + self.a, -self.b)
    }

    /// Wealth at which the marginal utility equals `q > 0`.
    pub fn inverse_marginal(&self, q: f64) -> f64 {
        q.powf(-1.0 / self.b) - self.a
    }

    /// Checks that `U` stays finite at the minimal payoff `floor`.
    pub fn check_floor(&self, party: Party, floor: f64) -> Result<()> {
        let base = floor + self.a;
        let ok = if self.b < 1.0 { base >= 0.0 } else { base > 0.0 };
        if ok {
            Ok(())
        } else {
            Err(Error::InadmissibleUtility {
                party: party.name(),
                shift: self.a,
                floor,
                exponent: self.b,
            })
        }
    }

    /// Per-fee admissibility: the manager's floor is `(m - c) v0`, the
    /// investor's is `(c - m) v0`.
    pub fn check_for_fee(&self, party: Party, fee: &FeeStructure, v0: f64) -> Result<()> {
        let floor = match party {
            Party::Manager => v0 * (fee.m - fee.c),
            Party::Investor => v0 * (fee.c - fee.m),
        };
        self.check_floor(party, floor)
    }

    /// Worst case of [`Self::check_for_fee`] over a box of fees.
    pub fn check_over_box(&self, party: Party, bounds: &FeeBounds, v0: f64) -> Result<()> {
        let floor = match party {
            Party::Manager => v0 * (bounds.lo[0] - bounds.hi[2]),
            Party::Investor => v0 * (bounds.lo[2] - bounds.hi[0]),
        };
        self.check_floor(party, floor)
    }
}

/// Manager's utility as a function of the fund value, `U_M(V) = Ũ_M(M(V))`.
pub fn manager_composite_utility(fee: &FeeStructure, p: &HaraParams, v0: f64, v_t: f64) -> Result<f64> {
    p.utility(fee.manager_payoff(v0, v_t)?)
}

/// Investor's utility as a function of the fund value, `U_I(V) = Ũ_I(I(V))`.
pub fn investor_composite_utility(fee: &FeeStructure, p: &HaraParams, v0: f64, v_t: f64) -> Result<f64> {
    p.utility(fee.investor_payoff(v0, v_t)?)
}

/// Slope of the chord from `(0, U_M(0))` to `(Θ2, U_M(Θ2))`.
pub fn case_determinant(fee: &FeeStructure, p: &HaraParams, v0: f64) -> Result<f64> {
    let e = 1.0 - p.b;
    let top = pow_guarded(fee.m * v0 + p.a, e)?;
    let bottom = pow_guarded(v0 * (fee.m - fee.c) + p.a, e)?;
    Ok((top - bottom) / (e * (1.0 + fee.m) * v0))
}

/// Classifies a fee into case A, B or C. Ties go to B.
pub fn classify_case(fee: &FeeStructure, p: &HaraParams, v0: f64) -> Result<CaseTag> {
    p.check_for_fee(Party::Manager, fee, v0)?;
    let h = case_determinant(fee, p, v0)?;
    let kink = pow_guarded(fee.m * v0 + p.a, -p.b)?;
    Ok(if h < fee.alpha * kink {
        CaseTag::A
    } else if h <= kink {
        CaseTag::B
    } else {
        CaseTag::C
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> HaraParams {
        HaraParams::base_case()
    }

    #[test]
    fn utility_examples() {
        let p = base();
        assert!((p.utility(0.7).unwrap() - 1.0 / 0.35).abs() < 1e-15);
        assert_eq!(p.utility(-0.3).unwrap(), 0.0);
        let sqrt = HaraParams::new(0.0, 0.5).unwrap();
        assert!((sqrt.utility(4.0).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn utility_domain_errors() {
        assert!(base().utility(-0.31).is_err());
        let steep = HaraParams::new(0.3, 2.5).unwrap();
        assert!(steep.utility(-0.3).is_err());
        assert!(HaraParams::new(0.3, 1.0).is_err());
        assert!(HaraParams::new(0.3, 1.0 + 1e-10).is_err());
        assert!(HaraParams::new(0.3, 0.0).is_err());
    }

    #[test]
    fn finite_difference_marginal() {
        for p in [
            base(),
            HaraParams::new(0.3, 2.5).unwrap(),
            HaraParams::new(0.1, 0.35).unwrap(),
        ] {
            for x in [0.05, 0.3, 1.0, 2.7, 10.0] {
                let h = 1e-6;
                let fd = (p.utility(x + h).unwrap() - p.utility(x - h).unwrap()) / (2.0 * h);
                let exact = p.marginal(x).unwrap();
                assert!((fd / exact - 1.0).abs() < 1e-6, "b={} x={x}", p.b);
            }
        }
    }

    #[test]
    fn composite_utility_examples() {
        let p = base();
        let trad = FeeStructure::new(0.0, 0.2, 0.0).unwrap();
        let u = manager_composite_utility(&trad, &p, 1.0, 0.5).unwrap();
        // 0.3^0.35 / 0.35, evaluated in 50-digit arithmetic
        assert!((u - 1.874_668_123_553_833_4).abs() < 1e-12, "{u}");

        let f = FeeStructure::new(0.02, 0.4, 0.1).unwrap();
        let flat = p.utility(-0.08).unwrap();
        for v in [0.0, 0.3, 0.9, 0.919_999] {
            assert_eq!(manager_composite_utility(&f, &p, 1.0, v).unwrap(), flat);
        }
    }

    #[test]
    fn composite_utility_continuous_at_kinks() {
        let p = base();
        let f = FeeStructure::new(0.02, 0.4, 0.1).unwrap();
        for theta in [f.loss_threshold(1.0), f.surplus_threshold(1.0)] {
            let left = manager_composite_utility(&f, &p, 1.0, theta - 1e-13).unwrap();
            let right = manager_composite_utility(&f, &p, 1.0, theta).unwrap();
            assert!((left - right).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_examples() {
        let p = base();
        for (m, a) in [(0.0, 0.2), (0.05, 0.5), (0.02, 0.001)] {
            let f = FeeStructure::new(m, a, 0.0).unwrap();
            assert_eq!(case_determinant(&f, &p, 1.0).unwrap(), 0.0);
            assert_eq!(classify_case(&f, &p, 1.0).unwrap(), CaseTag::A);
        }
        let a_fee = FeeStructure::new(0.05, 0.375, 0.26).unwrap();
        let h = case_determinant(&a_fee, &p, 1.0).unwrap();
        assert!((h - 0.7129).abs() < 1e-4, "{h}");
        assert!((0.375 * 0.35f64.powf(-0.65) - 0.7420).abs() < 1e-4);
        assert_eq!(classify_case(&a_fee, &p, 1.0).unwrap(), CaseTag::A);

        let b_fee = FeeStructure::new(0.05, 0.10, 0.26).unwrap();
        assert!((0.10 * 0.35f64.powf(-0.65) - 0.1979).abs() < 1e-4);
        assert!((0.35f64.powf(-0.65) - 1.9786).abs() < 1e-4);
        assert_eq!(classify_case(&b_fee, &p, 1.0).unwrap(), CaseTag::B);
    }

    #[test]
    fn admissibility_checks() {
        let steep = HaraParams::new(0.3, 5.0).unwrap();
        let edge = FeeStructure::new(0.0, 0.2, 0.3).unwrap();
        assert!(steep.check_for_fee(Party::Manager, &edge, 1.0).is_err());
        assert!(base().check_for_fee(Party::Manager, &edge, 1.0).is_ok());
        assert!(steep
            .check_over_box(Party::Manager, &FeeBounds::admissible(), 1.0)
            .is_err());
        assert!(steep
            .check_over_box(Party::Investor, &FeeBounds::admissible(), 1.0)
            .is_ok());
        assert!(base()
            .check_over_box(Party::Manager, &FeeBounds::admissible(), 1.0)
            .is_ok());
    }
}
