//! Tests whether expenditure panels and cross-sectional demand data can be
//! rationalized by heterogeneous preferences or by heterogeneous (real or
//! misperceived) prices, and constructs the certifying objects:
//! idiosyncratic price systems, scale factors, piecewise-linear utilities,
//! and sorting functions.
//!
//! Everything runs on exact rational arithmetic, so weak-vs-strict
//! revealed-preference comparisons — and with them every GARP/GAPP verdict —
//! are decided exactly, never by tolerance.

pub mod aggregators;
pub mod behavioral;
pub mod constructions;
pub mod dataset;
pub mod error;
pub mod exact;
pub mod patches;
pub mod revpref;
pub mod rum;
pub mod synth;

pub use error::Error;
pub use exact::Money;
