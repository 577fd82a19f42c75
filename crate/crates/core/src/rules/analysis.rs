use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::rules::ast::{Literal, RuleProgram};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TupleLocalViolation {
    pub rule: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TupleLocalReport {
    pub violations: Vec<TupleLocalViolation>,
}

impl TupleLocalReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for TupleLocalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.violations.first() {
            None => f.write_str("PASS"),
            Some(v) => {
                write!(f, "FAIL rule {}: {}", v.rule, v.reason)?;
                for v in &self.violations[1..] {
                    write!(f, "\nrule {}: {}", v.rule, v.reason)?;
                }
                Ok(())
            }
        }
    }
}

/// Sufficient condition for the program to commute with restrictions and permutations at
/// every domain size: each rule's body variables occur in its head, and each body relation
/// is free or has a strictly lower stage than the head. A derived atom then depends only on
/// atoms over its own argument set.
pub fn check_tuple_local(p: &RuleProgram, stage_of: &BTreeMap<String, usize>) -> Result<TupleLocalReport> {
    let stage = |pred: usize| -> Result<usize> {
        if p.is_free(pred) {
            return Ok(0);
        }
        let name = p.pred_name(pred);
        stage_of.get(name).copied().ok_or_else(|| Error::MissingStage(name.to_string()))
    };
    let mut violations = Vec::new();
    for (ri, r) in p.rules().iter().enumerate() {
        let hs = stage(r.head.pred)?;
        let head_vars = &r.head.args;
        for lit in &r.body {
            let vars: &[usize] = match lit {
                Literal::Pos(a) | Literal::Neg(a) => &a.args,
                Literal::Neq(x, y) => &[*x, *y],
            };
            if let Some(v) = vars.iter().find(|v| !head_vars.contains(v)) {
                violations.push(TupleLocalViolation {
                    rule: ri,
                    reason: format!("body variable {} does not occur in the head", r.vars[*v]),
                });
            }
        }
        for (a, _) in r.body_atoms() {
            let bs = stage(a.pred)?;
            if !p.is_free(a.pred) && bs >= hs {
                violations.push(TupleLocalViolation {
                    rule: ri,
                    reason: format!(
                        "body relation {} (stage {bs}) is not below head {} (stage {hs})",
                        p.pred_name(a.pred),
                        p.pred_name(r.head.pred)
                    ),
                });
            }
        }
    }
    violations.dedup();
    Ok(TupleLocalReport { violations })
}

/// Stage of each derived relation as its depth in the dependency graph (free relations
/// are stage 0). Fails on recursive programs.
pub fn compute_stages(p: &RuleProgram) -> Result<BTreeMap<String, usize>> {
    let nfree = p.free_signature().len();
    let nder = p.derived_signature().len();
    let mut s = vec![1usize; nder];
    for _ in 0..=nder {
        let mut changed = false;
        for r in p.rules() {
            let h = r.head.pred - nfree;
            for (a, _) in r.body_atoms() {
                if a.pred >= nfree && s[h] <= s[a.pred - nfree] {
                    s[h] = s[a.pred - nfree] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(p
                .derived_signature()
                .relations()
                .iter()
                .zip(s)
                .map(|(r, k)| (r.name.clone(), k))
                .collect());
        }
    }
    Err(Error::NotTupleLocal("recursive program has no stage assignment".into()))
}
