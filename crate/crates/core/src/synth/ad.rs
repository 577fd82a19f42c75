use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::measures::{format_rational, in_unit_interval, Rational};

/// Exactly-one-of-m choice compiled into independent auxiliary facts with chain weights.
///
/// Alternative `i` (among those with positive probability) is selected by
/// `R_i, ¬R_{i-1}, …, ¬R_1`; the last by `¬R_{m-1}, …, ¬R_1`. Zero-probability
/// alternatives get no selector and no relation, so every weight lies in `(0,1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedDisjunction {
    pub probs: Vec<Rational>,
    pub aux_relations: Vec<String>,
    pub aux_weights: Vec<Rational>,
    /// Per alternative, the aux literals `(relation index, positive)` selecting it.
    pub selectors: Vec<Option<Vec<(usize, bool)>>>,
}

impl AnnotatedDisjunction {
    /// Aux relations are named `{prefix}1`, `{prefix}2`, ….
    pub fn new(probs: &[Rational], prefix: &str) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !in_unit_interval(p)) {
            return Err(Error::InvalidParams(format!("alternative probability {} outside [0,1]", format_rational(p))));
        }
        let sum: Rational = probs.iter().sum();
        if !sum.is_one() {
            return Err(Error::InvalidParams(format!(
                "alternative probabilities sum to {}, not 1",
                format_rational(&sum)
            )));
        }
        let positive: Vec<usize> = (0..probs.len()).filter(|&i| !probs[i].is_zero()).collect();
        let m = positive.len();
        let mut selectors = vec![None; probs.len()];
        let mut aux_weights = Vec::new();
        let mut remaining = Rational::one();
        for (t, &i) in positive.iter().enumerate() {
            let mut sel: Vec<(usize, bool)> = Vec::new();
            if t + 1 < m {
                aux_weights.push(&probs[i] / &remaining);
                remaining -= &probs[i];
                sel.push((t, true));
            }
            sel.extend((0..t.min(m - 1)).rev().map(|s| (s, false)));
            selectors[i] = Some(sel);
        }
        Ok(AnnotatedDisjunction {
            probs: probs.to_vec(),
            aux_relations: (1..=aux_weights.len()).map(|i| format!("{prefix}{i}")).collect(),
            aux_weights,
            selectors,
        })
    }

    /// The alternative selected by an assignment to the aux relations.
    pub fn selected(&self, aux: &[bool]) -> Option<usize> {
        let hits: Vec<usize> = self
            .selectors
            .iter()
            .enumerate()
            .filter(|(_, s)| s.as_ref().is_some_and(|s| s.iter().all(|&(r, v)| aux[r] == v)))
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [i] => Some(*i),
            _ => None,
        }
    }

    /// Probability of an aux assignment under the chain weights.
    pub fn assignment_weight(&self, aux: &[bool]) -> Rational {
        self.aux_weights
            .iter()
            .zip(aux)
            .map(|(w, &v)| if v { w.clone() } else { Rational::one() - w })
            .product()
    }

    /// One rule per head atom of each selectable alternative: `head :- selector, guard.`
    /// Aux atoms take the argument list `args`.
    pub fn emit(&self, heads: &[Vec<String>], guard: &[String], args: &str) -> Vec<String> {
        let mut rules = Vec::new();
        for (i, sel) in self.selectors.iter().enumerate() {
            let Some(sel) = sel else { continue };
            let mut body: Vec<String> = sel
                .iter()
                .map(|&(r, pos)| {
                    let atom = format!("{}({args})", self.aux_relations[r]);
                    if pos {
                        atom
                    } else {
                        format!("not {atom}")
                    }
                })
                .collect();
            body.extend(guard.iter().cloned());
            for h in &heads[i] {
                rules.push(rule(h, &body));
            }
        }
        rules
    }
}

pub(crate) fn rule(head: &str, body: &[String]) -> String {
    if body.is_empty() {
        format!("{head}.")
    } else {
        format!("{head} :- {}.", body.join(", "))
    }
}

/// Compiles `probs` with alternative `i` asserting the atoms `heads[i]`, every rule carrying
/// `guard`.
pub fn compile_ad(
    probs: &[Rational],
    heads: &[Vec<String>],
    guard: &[String],
    args: &str,
    prefix: &str,
) -> Result<(AnnotatedDisjunction, Vec<String>)> {
    if heads.len() != probs.len() {
        return Err(Error::InvalidParams(format!("{} alternatives but {} head lists", probs.len(), heads.len())));
    }
    let ad = AnnotatedDisjunction::new(probs, prefix)?;
    let rules = ad.emit(heads, guard, args);
    Ok((ad, rules))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::rat;

    fn check_by_enumeration(ad: &AnnotatedDisjunction) {
        let k = ad.aux_relations.len();
        let mut got = vec![Rational::zero(); ad.probs.len()];
        for code in 0..1u32 << k {
            let aux: Vec<bool> = (0..k).map(|i| code >> i & 1 == 1).collect();
            let i = ad.selected(&aux).expect("exactly one alternative");
            got[i] += ad.assignment_weight(&aux);
        }
        assert_eq!(got, ad.probs);
    }

    #[test]
    fn chain_weights() {
        let ad = AnnotatedDisjunction::new(&[rat(1, 2), rat(1, 3), rat(1, 6)], "r").unwrap();
        assert_eq!(ad.aux_weights, vec![rat(1, 2), rat(2, 3)]);
        check_by_enumeration(&ad);

        let (ad, rules) = compile_ad(
            &[rat(3, 10), rat(7, 10)],
            &[vec!["a(X)".into()], vec!["b(X)".into()]],
            &[],
            "X",
            "r",
        )
        .unwrap();
        assert_eq!(ad.aux_weights, vec![rat(3, 10)]);
        assert_eq!(rules, vec!["a(X) :- r1(X).", "b(X) :- not r1(X)."]);
    }

    #[test]
    fn degenerate_alternatives() {
        let (ad, rules) = compile_ad(
            &[rat(1, 1), rat(0, 1)],
            &[vec!["a(X)".into()], vec!["b(X)".into()]],
            &["g(X)".into()],
            "X",
            "r",
        )
        .unwrap();
        assert!(ad.aux_relations.is_empty());
        assert_eq!(rules, vec!["a(X) :- g(X)."]);
        let ad = AnnotatedDisjunction::new(&[rat(0, 1), rat(1, 4), rat(0, 1), rat(3, 4)], "r").unwrap();
        assert_eq!(ad.aux_weights, vec![rat(1, 4)]);
        check_by_enumeration(&ad);
        assert!(AnnotatedDisjunction::new(&[rat(1, 2), rat(1, 3)], "r").is_err());
    }
}
