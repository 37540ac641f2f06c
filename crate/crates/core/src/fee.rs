//! First-loss fee structures and the terminal split of the fund value.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const M_MAX: f64 = 0.05;
pub const ALPHA_MIN: f64 = 0.001;
pub const ALPHA_MAX: f64 = 0.5;
pub const C_MAX: f64 = 0.3;

/// Management fee `m`, performance fee `alpha` and first-loss coverage `c`,
/// all as fractions (`m` and `c` of initial capital, `alpha` of the surplus).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeeStructure {
    pub m: f64,
    pub alpha: f64,
    pub c: f64,
}

/// Which piece of the payoff maps a terminal fund value falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffBranch {
    /// `V - m v0 < (1 - c) v0`: the manager's deposit absorbs the loss.
    Loss,
    /// `(1 - c) v0 <= V - m v0 < v0`: the investor is made whole.
    Guarantee,
    /// `V - m v0 >= v0`: the performance fee applies.
    Surplus,
}

/// `slope * V + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl Affine {
    pub fn at(&self, v: f64) -> f64 {
        self.slope * v + self.intercept
    }
}

impl FeeStructure {
    /// A fee inside the admissible box `m ∈ [0, 5%]`, `α ∈ [0.1%, 50%]`, `c ∈ [0, 30%]`.
    pub fn new(m: f64, alpha: f64, c: f64) -> Result<Self> {
        let fee = Self { m, alpha, c };
        fee.validate()?;
        Ok(fee)
    }

    /// Same as [`FeeStructure::new`] with arguments in percent.
    pub fn from_percent(m: f64, alpha: f64, c: f64) -> Result<Self> {
        Self::new(m / 100.0, alpha / 100.0, c / 100.0)
    }

    /// A fee checked only against the model's mathematical domain
    /// (`m, c ∈ [0, 1]`, `α ∈ (0, 1]`), not the admissible box.
    pub fn unbounded(m: f64, alpha: f64, c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&m) {
            return Err(invalid("m", format!("must lie in [0, 1], got {m}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(invalid("c", format!("must lie in [0, 1], got {c}")));
        }
        Ok(Self { m, alpha, c })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=M_MAX).contains(&self.m) {
            return Err(invalid("m", format!("must lie in [0, {M_MAX}], got {}", self.m)));
        }
        if !(ALPHA_MIN..=ALPHA_MAX).contains(&self.alpha) {
            return Err(invalid(
                "alpha",
                format!("must lie in [{ALPHA_MIN}, {ALPHA_MAX}], got {}", self.alpha),
            ));
        }
        if !(0.0..=C_MAX).contains(&self.c) {
            return Err(invalid("c", format!("must lie in [0, {C_MAX}], got {}", self.c)));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.m, self.alpha, self.c]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self {
            m: x[0],
            alpha: x[1],
            c: x[2],
        }
    }

    pub fn percent(&self) -> [f64; 3] {
        [100.0 * self.m, 100.0 * self.alpha, 100.0 * self.c]
    }

    /// `Θ1 = (1 + m - c) v0`, start of the guarantee branch.
    pub fn loss_threshold(&self, v0: f64) -> f64 {
        (1.0 + self.m - self.c) * v0
    }

    /// `Θ2 = (1 + m) v0`, start of the surplus branch.
    pub fn surplus_threshold(&self, v0: f64) -> f64 {
        (1.0 + self.m) * v0
    }

    /// Branch of `vT`; intervals are left-closed, right-open.
    pub fn branch(&self, v0: f64, v_t: f64) -> PayoffBranch {
        if v_t < self.loss_threshold(v0) {
            PayoffBranch::Loss
        } else if v_t < self.surplus_threshold(v0) {
            PayoffBranch::Guarantee
        } else {
            PayoffBranch::Surplus
        }
    }

    /// The investor's payoff on one branch as an affine map of `V_T`.
    pub fn investor_affine(&self, v0: f64, branch: PayoffBranch) -> Affine {
        match branch {
            PayoffBranch::Loss => Affine {
                slope: 1.0,
                intercept: v0 * (self.c - self.m),
            },
            PayoffBranch::Guarantee => Affine {
                slope: 0.0,
                intercept: v0,
            },
            PayoffBranch::Surplus => Affine {
                slope: 1.0 - self.alpha,
                intercept: -self.m * v0 + self.alpha * (1.0 + self.m) * v0,
            },
        }
    }

    /// The manager's payoff on one branch as an affine map of `V_T`.
    pub fn manager_affine(&self, v0: f64, branch: PayoffBranch) -> Affine {
        match branch {
            PayoffBranch::Loss => Affine {
                slope: 0.0,
                intercept: v0 * (self.m - self.c),
            },
            PayoffBranch::Guarantee => Affine {
                slope: 1.0,
                intercept: -v0,
            },
            PayoffBranch::Surplus => Affine {
                slope: self.alpha,
                intercept: self.m * v0 - self.alpha * (1.0 + self.m) * v0,
            },
        }
    }

    /// Investor's terminal wealth `I(V_T)`.
    pub fn investor_payoff(&self, v0: f64, v_t: f64) -> Result<f64> {
        check_value(v_t)?;
        Ok(self.investor_payoff_unchecked(v0, v_t))
    }

    /// Manager's terminal wealth `M(V_T) = V_T - I(V_T)`.
    pub fn manager_payoff(&self, v0: f64, v_t: f64) -> Result<f64> {
        check_value(v_t)?;
        Ok(self.manager_payoff_unchecked(v0, v_t))
    }

    pub(crate) fn investor_payoff_unchecked(&self, v0: f64, v_t: f64) -> f64 {
        match self.branch(v0, v_t) {
            PayoffBranch::Loss => v_t + v0 * (self.c - self.m),
            PayoffBranch::Guarantee => v0,
            PayoffBranch::Surplus => v_t - self.m * v0 - self.alpha * (v_t - (1.0 + self.m) * v0),
        }
    }

    pub(crate) fn manager_payoff_unchecked(&self, v0: f64, v_t: f64) -> f64 {
        match self.branch(v0, v_t) {
            PayoffBranch::Loss => v0 * (self.m - self.c),
            PayoffBranch::Guarantee => v_t - v0,
            PayoffBranch::Surplus => self.m * v0 + self.alpha * (v_t - (1.0 + self.m) * v0),
        }
    }
}

fn check_value(v_t: f64) -> Result<()> {
    if v_t >= 0.0 {
        Ok(())
    } else {
        Err(invalid("v_t", format!("terminal fund value must be >= 0, got {v_t}")))
    }
}

impl fmt::Display for FeeStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [m, a, c] = self.percent();
        write!(f, "({m:.4}%, {a:.4}%, {c:.4}%)")
    }
}

/// Box bounds on `(m, α, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeeBounds {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl FeeBounds {
    /// The admissible set.
    pub fn admissible() -> Self {
        Self {
            lo: [0.0, ALPHA_MIN, 0.0],
            hi: [M_MAX, ALPHA_MAX, C_MAX],
        }
    }

    /// Pins coordinate `i` to `value`.
    pub fn fix(mut self, i: usize, value: f64) -> Self {
        self.lo[i] = value;
        self.hi[i] = value;
        self
    }

    pub fn clamp(&self, x: [f64; 3]) -> [f64; 3] {
        let mut out = x;
        for i in 0..3 {
            out[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
        out
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

impl Default for FeeBounds {
    fn default() -> Self {
        Self::admissible()
    }
}
