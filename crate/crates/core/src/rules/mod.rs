//! Stratified Datalog with negation and disequality, without constants: parsing,
//! stratification, grounding and fixpoint evaluation, and the tuple-locality analysis.

mod analysis;
mod ast;
mod eval;
mod parse;
mod stratify;

pub use analysis::{check_tuple_local, compute_stages, TupleLocalReport, TupleLocalViolation};
pub use ast::{Literal, Rule, RuleAtom, RuleProgram};
pub use eval::{apply_program, Evaluator, GroundInstance};
pub use parse::parse_program;
pub use stratify::{stratify, Stratification};
