//! Optimal fund value, value functions and Pareto-optimal fees for a
//! hedge-fund manager paid under a first-loss compensation scheme.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod envelope;
pub mod error;
pub mod fee;
pub mod market;
pub mod normal;
pub mod optimize;
pub mod oracle;
pub mod pareto;
pub mod preferences;
pub mod quadrature;
pub mod roots;
pub mod selection;
pub mod valuation;
pub mod wealth;

pub use envelope::ConcaveEnvelope;
pub use error::{Error, Result};
pub use fee::{FeeBounds, FeeStructure, PayoffBranch};
pub use market::MarketParams;
pub use preferences::{CaseTag, HaraParams, Party};
pub use valuation::{FeeEvaluation, Model, ValuePair};
pub use wealth::OptimalWealthSolution;
