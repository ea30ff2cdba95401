//! Instance and query generators. Worst-case families and random instances
//! feed the engine tests; gadget queries and the 1-IN-3SAT reduction feed
//! the bound tests.

mod families;
mod fixture;
mod random;
mod reduction;

use thiserror::Error;

pub use families::{gen_family, FamilyKind};
pub use fixture::{medical_fixture, Fixture, QUERY_FILE};
pub use random::{embedding_estimate, random_instance, random_pattern, random_tree, RandomLimits};
pub use reduction::{
    formulas_up_to, gadget, literal_vars, one_in_three_sat, reduce_1in3sat, sample_formula, Clause3, GadgetKind, Literal,
    ReductionOptions,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TestkitError {
    #[error("unsupported instance family `{0}`")]
    UnsupportedKind(String),
    #[error("scale parameter must be at least 1, got {0}")]
    InvalidScale(usize),
    #[error("gadget needs {expected} distinct names, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("the reduction needs at least two clauses, got {0}")]
    TooFewClauses(usize),
}
