//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the toolkit. Verdict-shaped outcomes
/// (GARP failures in constructions, refuted RUM instances) carry their
/// witnesses so callers can replay them.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A price that must be strictly positive is not.
    #[error("non-positive price at component {index}")]
    NonPositivePrice { index: usize },

    /// Input document does not match the expected shape.
    #[error("schema error: {message}")]
    Schema { message: String },

    /// Input violates a dataset invariant.
    #[error("domain error: {message}")]
    Domain { message: String },

    /// A price-system evaluation left its domain (e.g. a behavioral
    /// expenditure function applied to a non-positive cost).
    #[error("evaluator domain error: {message}")]
    EvaluatorDomain { message: String },

    /// Afriat construction was asked to rationalize GARP-violating data.
    /// The witness is a node cycle replayable against the relation graph.
    #[error("GARP violation; witness cycle {witness:?}")]
    GarpViolation { witness: Vec<usize> },

    /// Residual-price bracketing failed; the declared aggregator regularity
    /// is inconsistent with the data.
    #[error("no bracket: {message}")]
    NoBracket { message: String },

    /// Hypothesis of a construction is violated by the input.
    #[error("precondition failed: {message}")]
    Precondition {
        message: String,
        /// Consumer whose data breaks the hypothesis, when applicable.
        consumer: Option<usize>,
        /// Replayable witness cycle, when applicable.
        witness: Option<Vec<usize>>,
    },

    /// Construction retries exhausted. The constructions are total on their
    /// stated preconditions, so this indicates a bug rather than a property
    /// of the data (except for the degenerate single-consumer case, where
    /// consistency in expectation pins all prices).
    #[error("construction failed: {message}")]
    ConstructionFailed { message: String },

    /// Threshold search for a behavioral expenditure function failed; the
    /// declared regularity case is inconsistent with the function.
    #[error("regularity error: {message}")]
    Regularity { message: String },

    /// Sorting search exceeded its node budget; verdict is unknown.
    #[error("search budget exceeded after {explored} nodes")]
    SearchBudgetExceeded { explored: u64 },

    /// A certificate was requested for a cross-section that is not
    /// RUM-rationalizable.
    #[error("not RUM-rationalizable: {message}")]
    NotRumRationalizable { message: String },

    /// Geometric patch enumeration is only implemented for K ≤ 4.
    #[error("geometric patch enumeration unsupported for {goods} goods")]
    UnsupportedDimension { goods: usize },

    /// The one-good refutation's interval argument only applies to the
    /// two-agent worked-example structure.
    #[error("unsupported shape: {message}")]
    UnsupportedShape { message: String },
}

impl Error {
    pub fn schema(message: impl Into<String>) -> Self {
        Error::Schema {
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain {
            message: message.into(),
        }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Error::Precondition {
            message: message.into(),
            consumer: None,
            witness: None,
        }
    }
}
