//! Exact distribution semantics for probabilistic logic programs over finite relational
//! structures: free product families, stratified rule expansions, projectivity and
//! independence checks, SIP families, and a compiler from SIP parameters to programs.
//!
//! All probabilities are exact rationals.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod gplp;
pub mod measures;
pub mod relational;
pub mod rules;
pub mod sip;
pub mod synth;

pub use error::{Budget, Error, Result};
