use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Budget, Error, Result};
use crate::relational::signature::{Bits, GroundAtom, Signature};
use crate::relational::world::{parse_ground_atom, World};

/// Ground quantifier-free formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom(GroundAtom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(a: GroundAtom) -> Self {
        Formula::Atom(a)
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn atoms(&self) -> Vec<&GroundAtom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a GroundAtom>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::Not(f) => f.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    pub fn display<'a>(&'a self, sig: &'a Signature) -> impl fmt::Display + 'a {
        FormulaDisplay { f: self, sig }
    }
}

struct FormulaDisplay<'a> {
    f: &'a Formula,
    sig: &'a Signature,
}

fn precedence(f: &Formula) -> u8 {
    match f {
        Formula::Or(..) => 0,
        Formula::And(..) => 1,
        Formula::Not(_) | Formula::Atom(_) => 2,
    }
}

impl FormulaDisplay<'_> {
    fn write(&self, f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f {
            Formula::Atom(a) => write!(out, "{}", a.display(self.sig)),
            Formula::Not(inner) => {
                out.write_str("~")?;
                self.child(inner, 2, out)
            }
            Formula::And(a, b) => {
                self.child(a, 1, out)?;
                out.write_str(" & ")?;
                self.child(b, 2, out)
            }
            Formula::Or(a, b) => {
                self.child(a, 0, out)?;
                out.write_str(" | ")?;
                self.child(b, 1, out)
            }
        }
    }

    // Parenthesize when the child binds looser than `min`.
    fn child(&self, f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if precedence(f) < min {
            out.write_str("(")?;
            self.write(f, out)?;
            out.write_str(")")
        } else {
            self.write(f, out)
        }
    }
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.f, f)
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    sig: &'a Signature,
    n: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.as_bytes().get(self.pos).copied()
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: 1,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let mut lhs = self.term()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Formula> {
        let mut lhs = self.factor()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(b'~') => {
                self.pos += 1;
                Ok(Formula::not(self.factor()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let f = self.formula()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(f)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.atom(),
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        let start = self.pos;
        let close = self.text[start..]
            .find(')')
            .ok_or_else(|| self.error("unterminated atom"))?;
        let src = &self.text[start..start + close + 1];
        let name_end = src
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(src.len());
        if src[name_end..].trim_start().as_bytes().first() != Some(&b'(') {
            return Err(self.error("expected `(` after relation name"));
        }
        let atom = parse_ground_atom(src, start, self.sig, self.n)?;
        self.pos = start + close + 1;
        Ok(Formula::Atom(atom))
    }
}

/// Parses `formula := term {"|" term}; term := factor {"&" factor}; factor := "~" factor | "(" formula ")" | atom`.
pub fn parse_formula(text: &str, sig: &Signature, n: usize) -> Result<Formula> {
    let mut p = Parser { text, pos: 0, sig, n };
    let f = p.formula()?;
    if p.peek().is_some() {
        return Err(p.error("trailing input"));
    }
    Ok(f)
}

pub fn eval_formula(f: &Formula, w: &World) -> bool {
    match f {
        Formula::Atom(a) => w.holds(a),
        Formula::Not(g) => !eval_formula(g, w),
        Formula::And(a, b) => eval_formula(a, w) && eval_formula(b, w),
        Formula::Or(a, b) => eval_formula(a, w) || eval_formula(b, w),
    }
}

/// True iff some atom of `f` has all of `elems` among its arguments.
pub fn mentions(f: &Formula, elems: &[usize]) -> bool {
    f.atoms().iter().any(|a| elems.iter().all(|e| a.args.contains(e)))
}

/// Event-splitting form of mention: some `w1` in the event and `w2` outside it agree on every
/// restriction to a subset that omits at least one of `elems`.
///
/// Two worlds agree on all such restrictions exactly when they differ only on atoms whose
/// argument set contains all of `elems`, so worlds are grouped by their bits outside that set.
pub fn semantic_mentions(
    sig: &Arc<Signature>,
    n: usize,
    event: impl Fn(&World) -> bool,
    elems: &[usize],
    budget: Budget,
) -> Result<bool> {
    if let Some(&e) = elems.iter().find(|&&e| e >= n) {
        return Err(Error::OutOfDomain { element: e, n });
    }
    let k = sig.atom_count(n);
    budget.check(format!("semantic mention scan at n={n}"), k)?;
    let lay = sig.layout(n);
    let mut joint = Bits::zeros(k);
    for (i, a) in lay.atoms() {
        if elems.iter().all(|e| a.args.contains(e)) {
            joint.set(i, true);
        }
    }
    let keep = !joint.as_u64().unwrap() & ((1u64 << k) - 1);
    // per outside-pattern: (some member in event, some member outside event)
    let mut groups: HashMap<u64, (bool, bool)> = HashMap::new();
    for m in 0..(1u64 << k) {
        let w = World::from_bits(sig.clone(), n, Bits::from_u64(k, m));
        let inside = event(&w);
        let g = groups.entry(m & keep).or_default();
        if inside {
            g.0 = true;
        } else {
            g.1 = true;
        }
        if g.0 && g.1 {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(s: &str) -> Arc<Signature> {
        Arc::new(Signature::parse(s).unwrap())
    }

    #[test]
    fn parses_and_prints() {
        let s = sig("P/1 E/2");
        let f = parse_formula("E(0,1) & ~E(1,0)", &s, 2).unwrap();
        assert!(matches!(&f, Formula::And(_, b) if matches!(**b, Formula::Not(_))));
        assert_eq!(f.display(&s).to_string(), "E(0,1) & ~E(1,0)");

        let g = parse_formula("P(0) | (P(1) & E(0,1))", &s, 2).unwrap();
        assert!(matches!(&g, Formula::Or(_, b) if matches!(**b, Formula::And(..))));
        assert_eq!(g.display(&s).to_string(), "P(0) | P(1) & E(0,1)");

        let h = parse_formula("(P(0) | P(1)) & ~(E(0,1) & E(1,0))", &s, 2).unwrap();
        let printed = h.display(&s).to_string();
        assert_eq!(parse_formula(&printed, &s, 2).unwrap(), h);
    }

    #[test]
    fn parse_errors() {
        let s = sig("P/1 E/2");
        assert!(matches!(parse_formula("E(0)", &s, 2), Err(Error::Arity { .. })));
        assert!(matches!(parse_formula("Q(0)", &s, 2), Err(Error::UnknownRelation(_))));
        assert!(matches!(parse_formula("P(3)", &s, 2), Err(Error::OutOfDomain { .. })));
        match parse_formula("P(0) & & P(1)", &s, 2) {
            Err(Error::Syntax { column, .. }) => assert_eq!(column, 8),
            other => panic!("{other:?}"),
        }
        assert!(parse_formula("(P(0)", &s, 2).is_err());
        assert!(parse_formula("P(0) P(1)", &s, 2).is_err());
    }

    #[test]
    fn evaluates() {
        let s = sig("P/1 E/2");
        let w = World::parse("E(0,1)", s.clone(), 2).unwrap();
        assert!(eval_formula(&parse_formula("E(0,1)", &s, 2).unwrap(), &w));
        assert!(!eval_formula(&parse_formula("~E(0,1)", &s, 2).unwrap(), &w));
        let empty = World::empty(s.clone(), 2);
        assert!(!eval_formula(&parse_formula("P(0) | P(1)", &s, 2).unwrap(), &empty));
    }

    #[test]
    fn mention_examples() {
        let s = sig("P/1 E/2 R/3");
        let f = parse_formula("E(0,1) & P(2)", &s, 3).unwrap();
        assert!(mentions(&f, &[0, 1]));
        assert!(!mentions(&f, &[1, 2]));
        let r = parse_formula("R(0,1,2)", &s, 3).unwrap();
        assert!(mentions(&r, &[0, 2]));
    }

    #[test]
    fn semantic_mention_examples() {
        let s = sig("P/1 E/2");
        let e01 = parse_formula("E(0,1)", &s, 2).unwrap();
        assert!(semantic_mentions(&s, 2, |w| eval_formula(&e01, w), &[0, 1], Budget::default()).unwrap());
        assert!(!semantic_mentions(&s, 2, |_| true, &[0, 1], Budget::default()).unwrap());
        let p0 = parse_formula("P(0)", &s, 2).unwrap();
        assert!(!semantic_mentions(&s, 2, |w| eval_formula(&p0, w), &[0, 1], Budget::default()).unwrap());
        assert!(semantic_mentions(&s, 2, |w| eval_formula(&p0, w), &[0], Budget::default()).unwrap());
    }
}
