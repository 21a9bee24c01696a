//! Decision procedures for the fluted fragment with periodic counting
//! quantifiers, together with model construction, model checking and
//! generators for reduction corpora.

pub mod cli;
pub mod corpus;
pub mod diophantine;
pub mod ext;
pub mod modeltools;
pub mod normalform;
pub mod reducer;
pub mod sat2;
pub mod syntax;
pub mod typespace;

pub use ext::ExtNat;
pub use syntax::{CountSpec, Formula, Signature};

/// Raised when a configured search or size limit is exhausted.
/// Distinct from a negative verdict.
#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
#[error("resource cap exceeded: {0}")]
pub struct ResourceCap(pub String);
