use thiserror::Error;

/// Errors raised by the fee-design pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model parameter is outside its domain.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// HARA parameters do not keep the utility finite at the party's minimal payoff.
    #[error("inadmissible utility for {party}: shift {shift} with minimal payoff {floor} (b = {exponent})")]
    InadmissibleUtility {
        party: &'static str,
        shift: f64,
        floor: f64,
        exponent: f64,
    },

    /// A root finder could not bracket or converge.
    #[error("root finding failed in {context}: {reason} on [{lo}, {hi}]")]
    RootFinding {
        context: &'static str,
        reason: String,
        lo: f64,
        hi: f64,
    },

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error("quadrature did not converge: estimate {estimate}, error {error_estimate}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    /// The fund value is (numerically) deterministic, so its Sharpe ratio is undefined.
    #[error("degenerate fund value: variance {variance} is below the numerical floor")]
    DegenerateVariance { variance: f64 },

    /// A non-finite intermediate value appeared where a finite one is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// The manager's reservation utility is outside the attainable range.
    #[error("reservation utility {phi_min} outside attainable range [{lo}, {hi}]")]
    Infeasible { phi_min: f64, lo: f64, hi: f64 },

    /// A selection was requested over an empty frontier.
    #[error("frontier is empty")]
    EmptyFrontier,

    /// A failure while evaluating one fee of a sweep.
    #[error("at fee {fee}: {source}")]
    AtFee {
        fee: crate::fee::FeeStructure,
        #[source]
        source: Box<Error>,
    },

    /// Run configuration problem.
    #[error("configuration error at `{path}`: {reason}")]
    Config { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
