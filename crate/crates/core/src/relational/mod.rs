//! Finite relational signatures and worlds over `{0..n-1}`: restriction along injections,
//! reducts, traces, ground formulas and the mention relation.

mod formula;
mod signature;
mod trace;
mod world;

pub use formula::{eval_formula, mentions, parse_formula, semantic_mentions, Formula};
pub use signature::{Bits, GroundAtom, Layout, Relation, Signature};
pub use trace::{
    atoms_within, canonicalize_trace, exact_level_mask, g_trace, is_symmetric_extension_world, symmetric_extension,
    trace_mask, trace_models, trace_on, Trace,
};
pub use world::{apply_map, enumerate_worlds, isomorphic, parse_atom_list, permutations, reduct, DomainMap, World};

pub(crate) use signature::distinct_count;
