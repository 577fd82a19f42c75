//! Exact distributions over finite world spaces, size-indexed families, free product
//! distributions, pushforwards and the projectivity check.

mod dist;
mod family;
mod free;
mod projective;
mod rational;

pub use dist::{event_prob, marginalize_domain, marginalize_signature, Dist, Event};
pub use family::{Family, FnFamily, TableFamily};
pub use free::{free_dist, free_prob, FreeFamily, WeightFn};
pub use projective::{check_projective, ProjectivityFailure, ProjectivityReport};
pub use rational::{format_rational, in_unit_interval, one, parse_rational, pow, rat, zero, Rational};

pub(crate) use projective::exchangeability_failure;
