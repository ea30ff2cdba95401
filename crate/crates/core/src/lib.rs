//! Cross-model conjunctive queries over relational tables and labeled trees.
//!
//! [`bound`] computes exact worst-case output size exponents for a query.
//! [`engine`] evaluates queries with a worst-case optimal join and with
//! reference baselines.

pub mod bound;
pub mod engine;
pub mod ingest;
pub mod model;
pub mod par;
pub mod testkit;
