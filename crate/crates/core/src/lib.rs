//! Fair division of a one-dimensional cake: valuations, protocols,
//! fairness audits and small strategic-form games.

pub mod cake;
pub mod fairness;
pub mod games;
pub mod protocols;
pub mod valuation;

pub use cake::{canonicalize, validate_allocation, Allocation, Interval, Piece};
pub use valuation::{normalize, Valuation, ValuationSpec};
