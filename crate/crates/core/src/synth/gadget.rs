use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::measures::{format_rational, Rational};
use crate::relational::permutations;
use crate::rules::{parse_program, RuleProgram};
use crate::synth::ad::{rule, AnnotatedDisjunction};

/// Probability that `m` independent uniform choices among `k` indices are not all distinct.
pub fn p_sym(k: usize, m: usize) -> Rational {
    if m > k {
        return Rational::one();
    }
    let falling: BigInt = (k - m + 1..=k).map(BigInt::from).product();
    let total = BigInt::from(k).pow(m as u32);
    Rational::one() - Rational::new(falling, total)
}

pub(crate) fn vars(h: usize) -> Vec<String> {
    (0..h).map(|i| format!("X{i}")).collect()
}

pub(crate) fn distinct(h: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..h {
        for j in i + 1..h {
            out.push(format!("X{i} != X{j}"));
        }
    }
    out
}

fn permuted(rel: &str, rho: &[usize]) -> String {
    let args: Vec<String> = rho.iter().map(|&i| format!("X{i}")).collect();
    format!("{rel}({})", args.join(","))
}

/// Elects one ordering of each `h`-element set, `h = g+1`.
///
/// Every ordered tuple picks `ord{h}_j` for one `j` in `1..=k`, uniformly. If two orderings
/// of a set pick the same `j`, `collision{h}` holds for all of them; otherwise `max{h}`
/// holds exactly for the ordering with the largest `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrdGadget {
    pub g: usize,
    pub k: usize,
    pub p_sym: Rational,
    pub ord_relations: Vec<String>,
    pub disjunction: AnnotatedDisjunction,
    pub coincide: String,
    pub collision: String,
    pub beaten: String,
    pub max: String,
    /// Rules deriving `ord{h}_j` from the aux relations.
    pub ord_rules: Vec<String>,
    /// Rules deriving coincide, collision, beaten and max from the Ord relations.
    pub selection_rules: Vec<String>,
}

/// Smallest `k ≥ (g+1)!` with collision probability below `p_min`.
pub fn build_ord_gadget(g: usize, p_min: &Rational) -> Result<OrdGadget> {
    if !(p_min > &Rational::zero() && p_min <= &Rational::one()) {
        return Err(Error::InvalidParams(format!("p_min = {} outside (0,1]", format_rational(p_min))));
    }
    let h = g + 1;
    let perms = permutations(h);
    let m = perms.len();
    let mut k = m;
    while &p_sym(k, m) >= p_min {
        k += 1;
    }
    let ord_relations: Vec<String> = (1..=k).map(|j| format!("ord{h}_{j}")).collect();
    let uniform = vec![Rational::new(BigInt::one(), BigInt::from(k)); k];
    let disjunction = AnnotatedDisjunction::new(&uniform, &format!("o{h}_r"))?;
    let args = vars(h).join(",");
    let heads: Vec<Vec<String>> = ord_relations.iter().map(|o| vec![format!("{o}({args})")]).collect();
    let guard = distinct(h);
    let ord_rules = disjunction.emit(&heads, &guard, &args);

    let (coincide, collision, beaten, max) =
        (format!("coincide{h}"), format!("collision{h}"), format!("beaten{h}"), format!("max{h}"));
    let id: Vec<usize> = (0..h).collect();
    let mut selection_rules = Vec::new();
    for o in &ord_relations {
        for rho in perms.iter().filter(|r| **r != id) {
            let mut body = vec![permuted(o, &id), permuted(o, rho)];
            body.extend(guard.iter().cloned());
            selection_rules.push(rule(&permuted(&coincide, &id), &body));
        }
    }
    for rho in &perms {
        let mut body = vec![permuted(&coincide, rho)];
        body.extend(guard.iter().cloned());
        selection_rules.push(rule(&permuted(&collision, &id), &body));
    }
    for (j, lo) in ord_relations.iter().enumerate() {
        for hi in &ord_relations[j + 1..] {
            for rho in perms.iter().filter(|r| **r != id) {
                let mut body = vec![permuted(lo, &id), permuted(hi, rho)];
                body.extend(guard.iter().cloned());
                selection_rules.push(rule(&permuted(&beaten, &id), &body));
            }
        }
    }
    let mut body = guard.clone();
    body.push(format!("not {}", permuted(&collision, &id)));
    body.push(format!("not {}", permuted(&beaten, &id)));
    selection_rules.push(rule(&permuted(&max, &id), &body));

    Ok(OrdGadget {
        g,
        k,
        p_sym: p_sym(k, m),
        ord_relations,
        disjunction,
        coincide,
        collision,
        beaten,
        max,
        ord_rules,
        selection_rules,
    })
}

impl OrdGadget {
    pub fn arity(&self) -> usize {
        self.g + 1
    }

    /// The selection rules alone, with the Ord relations as free inputs.
    pub fn selection_program(&self) -> Result<RuleProgram> {
        let h = self.arity();
        let decl = |names: &[&String]| names.iter().map(|n| format!(" {n}/{h}")).collect::<String>();
        let free: Vec<&String> = self.ord_relations.iter().collect();
        let derived = [&self.coincide, &self.collision, &self.beaten, &self.max];
        let text = format!(
            "#free{}\n#derived{}\n{}\n",
            decl(&free),
            decl(&derived),
            self.selection_rules.join("\n")
        );
        parse_program(&text)
    }
}
