use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::relational::Signature;

/// Atom over rule variables. `pred` indexes the program's full signature.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RuleAtom {
    pub pred: usize,
    pub args: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Pos(RuleAtom),
    Neg(RuleAtom),
    Neq(usize, usize),
}

/// `head :- body.` Variables are numbered by first occurrence, head first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: RuleAtom,
    pub body: Vec<Literal>,
    pub vars: Vec<String>,
}

impl Rule {
    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn body_atoms(&self) -> impl Iterator<Item = (&RuleAtom, bool)> {
        self.body.iter().filter_map(|l| match l {
            Literal::Pos(a) => Some((a, true)),
            Literal::Neg(a) => Some((a, false)),
            Literal::Neq(..) => None,
        })
    }

    pub fn display<'a>(&'a self, sig: &'a Signature) -> impl fmt::Display + 'a {
        RuleDisplay { rule: self, sig }
    }
}

struct RuleDisplay<'a> {
    rule: &'a Rule,
    sig: &'a Signature,
}

impl RuleDisplay<'_> {
    fn atom(&self, a: &RuleAtom, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.sig.relation(a.pred).name)?;
        for (i, v) in a.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(&self.rule.vars[*v])?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.atom(&self.rule.head, f)?;
        for (i, lit) in self.rule.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            match lit {
                Literal::Pos(a) => self.atom(a, f)?,
                Literal::Neg(a) => {
                    f.write_str("not ")?;
                    self.atom(a, f)?
                }
                Literal::Neq(x, y) => write!(f, "{} != {}", self.rule.vars[*x], self.rule.vars[*y])?,
            }
        }
        f.write_str(".")
    }
}

/// A rule program: free (input) relations, derived relations and rules whose heads are
/// derived. The full signature is the free one followed by the derived one, so a free
/// world's bitmask is a prefix of the full world's.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleProgram {
    free: Arc<Signature>,
    derived: Arc<Signature>,
    full: Arc<Signature>,
    rules: Vec<Rule>,
    stages: BTreeMap<String, usize>,
}

impl RuleProgram {
    pub fn new(
        free: Arc<Signature>,
        derived: Arc<Signature>,
        rules: Vec<Rule>,
        stages: BTreeMap<String, usize>,
    ) -> Result<Self> {
        let full = Arc::new(free.concat(&derived)?);
        let nfree = free.len();
        for r in &rules {
            if r.head.pred < nfree {
                return Err(Error::Program(format!(
                    "rule head uses free relation `{}`",
                    full.relation(r.head.pred).name
                )));
            }
            let atoms = std::iter::once(&r.head).chain(r.body_atoms().map(|(a, _)| a));
            for a in atoms {
                if a.pred >= full.len() {
                    return Err(Error::Program(format!("relation index {} out of range", a.pred)));
                }
                let rel = full.relation(a.pred);
                if rel.arity != a.args.len() {
                    return Err(Error::Arity {
                        name: rel.name.clone(),
                        expected: rel.arity,
                        found: a.args.len(),
                    });
                }
                if a.args.iter().any(|&v| v >= r.vars.len()) {
                    return Err(Error::Program("variable index out of range".into()));
                }
            }
        }
        for name in stages.keys() {
            if derived.index_of(name).is_none() {
                return Err(Error::Program(format!("stage annotation for non-derived relation `{name}`")));
            }
        }
        Ok(RuleProgram {
            free,
            derived,
            full,
            rules,
            stages,
        })
    }

    pub fn free_signature(&self) -> &Arc<Signature> {
        &self.free
    }

    pub fn derived_signature(&self) -> &Arc<Signature> {
        &self.derived
    }

    pub fn full_signature(&self) -> &Arc<Signature> {
        &self.full
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Stage annotations carried by the program text (`#stage pred=k`).
    pub fn stages(&self) -> &BTreeMap<String, usize> {
        &self.stages
    }

    pub fn with_stages(mut self, stages: BTreeMap<String, usize>) -> Result<Self> {
        for name in stages.keys() {
            if self.derived.index_of(name).is_none() {
                return Err(Error::Program(format!("stage annotation for non-derived relation `{name}`")));
            }
        }
        self.stages = stages;
        Ok(self)
    }

    pub fn is_free(&self, pred: usize) -> bool {
        pred < self.free.len()
    }

    pub fn pred_name(&self, pred: usize) -> &str {
        &self.full.relation(pred).name
    }
}

impl fmt::Display for RuleProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = |f: &mut fmt::Formatter<'_>, tag: &str, sig: &Signature| -> fmt::Result {
            f.write_str(tag)?;
            for r in sig.relations() {
                write!(f, " {}/{}", r.name, r.arity)?;
            }
            writeln!(f)
        };
        header(f, "#free", &self.free)?;
        header(f, "#derived", &self.derived)?;
        if !self.stages.is_empty() {
            f.write_str("#stage")?;
            for r in self.derived.relations() {
                if let Some(k) = self.stages.get(&r.name) {
                    write!(f, " {}={k}", r.name)?;
                }
            }
            writeln!(f)?;
        }
        for r in &self.rules {
            writeln!(f, "{}", r.display(&self.full))?;
        }
        Ok(())
    }
}
