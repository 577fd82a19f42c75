//! Generalised probabilistic logic programs: a free distribution pushed forward through a
//! rule program. Exact induced distributions, the commuting-square check and trace
//! functoriality.

mod checks;
mod induced;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Budget, Error, Result};
use crate::measures::{format_rational, parse_rational, Dist, Family, WeightFn};
use crate::relational::{DomainMap, Signature};
use crate::rules::{check_tuple_local, compute_stages, parse_program, RuleProgram};

pub use checks::{check_commuting_square, check_trace_functoriality, SquareFailure, SquareReport, TraceFailure, TraceReport};
pub use induced::{induced_dist, induced_marginal, Strategy};

/// A weight function over the program's free relations, the program, and the observable
/// target relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralizedPlp {
    weights: WeightFn,
    program: RuleProgram,
    target: Arc<Signature>,
}

#[derive(Serialize, Deserialize)]
struct Bundle {
    weights: BTreeMap<String, String>,
    program: String,
    target: Vec<String>,
}

impl GeneralizedPlp {
    /// `target` names relations of the full signature; they are kept in its declaration order.
    pub fn new(weights: WeightFn, program: RuleProgram, target: &[String]) -> Result<Self> {
        let free = program.free_signature();
        weights.for_signature(free)?;
        if let Some((name, _)) = weights.iter().find(|(n, _)| free.index_of(n).is_none()) {
            return Err(Error::Weight(format!("weight for `{name}`, which is not a free relation")));
        }
        let full = program.full_signature();
        if let Some(t) = target.iter().find(|t| full.index_of(t).is_none()) {
            return Err(Error::UnknownRelation(t.clone()));
        }
        let target = Arc::new(Signature::new(
            full.relations()
                .iter()
                .filter(|r| target.contains(&r.name))
                .map(|r| (r.name.clone(), r.arity)),
        )?);
        Ok(GeneralizedPlp {
            weights,
            program,
            target,
        })
    }

    pub fn weights(&self) -> &WeightFn {
        &self.weights
    }

    pub fn program(&self) -> &RuleProgram {
        &self.program
    }

    pub fn target(&self) -> &Arc<Signature> {
        &self.target
    }

    /// Bundle format: `{"weights": {rel: "p/q"}, "program": "<rule text>", "target": [rel]}`.
    /// Weights must lie strictly between 0 and 1.
    pub fn from_json(text: &str) -> Result<Self> {
        let b: Bundle = serde_json::from_str(text)?;
        let weights = WeightFn::strict(
            b.weights
                .iter()
                .map(|(k, v)| Ok((k.clone(), parse_rational(v)?)))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let program = parse_program(&b.program)?;
        GeneralizedPlp::new(weights, program, &b.target)
    }

    pub fn to_json(&self) -> String {
        let b = Bundle {
            weights: self.weights.iter().map(|(k, v)| (k.clone(), format_rational(v))).collect(),
            program: self.program.to_string(),
            target: self.target.relations().iter().map(|r| r.name.clone()).collect(),
        };
        let mut s = serde_json::to_string_pretty(&b).expect("bundle serializes");
        s.push('\n');
        s
    }

    /// Stage annotations from the program text, or computed by dependency depth if absent.
    pub fn stages(&self) -> Result<BTreeMap<String, usize>> {
        if self.program.stages().is_empty() {
            compute_stages(&self.program)
        } else {
            Ok(self.program.stages().clone())
        }
    }

    pub fn is_tuple_local(&self) -> bool {
        self.stages()
            .and_then(|s| check_tuple_local(&self.program, &s))
            .map(|r| r.passed())
            .unwrap_or(false)
    }
}

/// `n ↦` the induced distribution marginalized to the target relations.
#[derive(Clone, Debug)]
pub struct ReductFamily {
    pub plp: GeneralizedPlp,
    pub strategy: Strategy,
    pub budget: Budget,
}

pub fn reduct_family(plp: &GeneralizedPlp) -> ReductFamily {
    ReductFamily {
        plp: plp.clone(),
        strategy: Strategy::Auto,
        budget: Budget::default(),
    }
}

impl Family for ReductFamily {
    fn signature(&self) -> &Arc<Signature> {
        &self.plp.target
    }

    fn dist_at(&self, n: usize) -> Result<Dist> {
        induced_marginal(&self.plp, n, &self.plp.target, self.strategy, self.budget)
    }
}

/// `table[j]` = index in the `m.target_size()` layout of the image of atom `j` of the
/// `m.source_size()` layout, so restriction along `m` is a gather.
pub(crate) fn gather_table(sig: &Signature, m: &DomainMap) -> Vec<usize> {
    let big = sig.layout(m.target_size());
    let mut args = Vec::new();
    sig.layout(m.source_size())
        .atoms()
        .map(|(_, a)| {
            args.clear();
            args.extend(a.args.iter().map(|&x| m.image(x)));
            big.index(a.rel, &args)
        })
        .collect()
}

/// `table[j]` = index in `full`'s layout of atom `j` of `sub`'s layout (same domain size).
pub(crate) fn reduct_table(full: &Signature, sub: &Signature, n: usize) -> Result<Vec<usize>> {
    let big = full.layout(n);
    sub.layout(n)
        .atoms()
        .map(|(_, a)| {
            let name = &sub.relation(a.rel).name;
            let rel = full
                .index_of(name)
                .ok_or_else(|| Error::NotSubsignature(format!("`{name}` is not in {full}")))?;
            Ok(big.index(rel, &a.args))
        })
        .collect()
}

pub(crate) fn gather(src: &[u64], table: &[usize]) -> crate::relational::Bits {
    let mut out = crate::relational::Bits::zeros(table.len());
    let words = out.words_mut();
    for (j, &i) in table.iter().enumerate() {
        if (src[i / 64] >> (i % 64)) & 1 == 1 {
            words[j / 64] |= 1 << (j % 64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_round_trips() {
        let text = r##"{"weights":{"f":"2/4"},"program":"#free f/1\n#derived q/1\nq(X) :- f(X).\n","target":["q"]}"##;
        let plp = GeneralizedPlp::from_json(text).unwrap();
        assert_eq!(plp.target().to_string(), "q/1");
        let again = GeneralizedPlp::from_json(&plp.to_json()).unwrap();
        assert_eq!(again, plp);
        assert!(plp.to_json().contains("\"f\": \"1/2\""));
    }

    #[test]
    fn bundle_validation() {
        let bad_weight = r##"{"weights":{"f":"1"},"program":"#free f/1\n#derived q/1\nq(X) :- f(X).","target":["q"]}"##;
        assert!(matches!(GeneralizedPlp::from_json(bad_weight), Err(Error::Weight(_))));
        let missing = r##"{"weights":{},"program":"#free f/1\n#derived q/1\nq(X) :- f(X).","target":["q"]}"##;
        assert!(matches!(GeneralizedPlp::from_json(missing), Err(Error::Weight(_))));
        let target = r##"{"weights":{"f":"1/2"},"program":"#free f/1\n#derived q/1\nq(X) :- f(X).","target":["z"]}"##;
        assert!(matches!(GeneralizedPlp::from_json(target), Err(Error::UnknownRelation(_))));
        assert!(matches!(GeneralizedPlp::from_json("{"), Err(Error::Json(_))));
    }
}
