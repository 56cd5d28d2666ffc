//! Fixed-effects panel estimation of how wind and solar output move thermal
//! plant generation, emissions and emissions intensity, plus the downstream
//! displacement-effectiveness and percentile-intensity scenario accounting.
//!
//! Module map:
//!
//! - [`domain`]: value types shared by everything else.
//! - [`ingest`]: CSV readers/writers, coverage filtering, daily aggregation.
//! - [`regress`]: log transforms, fixed-effect absorption, OLS, standard
//!   errors, diagnostics and the offset sweep.
//! - [`plantols`]: per-plant regressions and fleet summaries.
//! - [`displacement`]: effectiveness fractions, displaced mass, concentration.
//! - [`scenario`]: percentile-intensity counterfactual emissions.

pub mod displacement;
pub mod domain;
pub mod error;
pub mod ingest;
pub mod plantols;
pub mod regress;
pub mod scenario;

pub use error::{Error, Result};
