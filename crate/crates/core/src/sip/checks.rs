use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Budget, Error, Result};
use crate::measures::{format_rational, Dist, Family, Rational};
use crate::relational::{is_symmetric_extension_world, Signature, World};
use crate::sip::params::shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Principle {
    /// Conditional independence given the shared g-trace.
    Sip,
    /// Plain independence of events sharing no element.
    Ip,
}

impl fmt::Display for Principle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Principle::Sip => "SIP",
            Principle::Ip => "IP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependenceViolation {
    /// Trace level; `None` for IP.
    pub g: Option<usize>,
    pub phi: String,
    pub psi: String,
    pub theta: String,
    /// `P(φ∧ψ∧θ)·P(θ)`
    pub lhs: Rational,
    /// `P(φ∧θ)·P(ψ∧θ)`
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependenceReport {
    pub principle: Principle,
    pub n: usize,
    pub max_literals: usize,
    pub checked: u64,
    pub failure: Option<IndependenceViolation>,
}

impl IndependenceReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for IndependenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(
                f,
                "PASS\n{} holds on {} checked event triples at n={} (conjunctions of at most {} literals)",
                self.principle, self.checked, self.n, self.max_literals
            ),
            Some(v) => {
                write!(f, "FAIL {}", self.principle)?;
                if let Some(g) = v.g {
                    write!(f, " g={g}")?;
                }
                write!(
                    f,
                    " phi=[{}] psi=[{}] theta=[{}] P(phi&psi&theta)P(theta)={} P(phi&theta)P(psi&theta)={}",
                    v.phi,
                    v.psi,
                    v.theta,
                    format_rational(&v.lhs),
                    format_rational(&v.rhs)
                )
            }
        }
    }
}

/// Conjunction of literals as a mask/value pair over atom indices.
#[derive(Clone, Debug)]
struct Conj {
    mask: u64,
    value: u64,
    atoms: Vec<usize>,
    elems: u64,
}

/// Probability masses with a shared scale, so products compare exactly.
trait Mass: Clone + Zero + Mul<Output = Self> + PartialEq + Send + Sync {
    fn to_rational(&self, scale: &Rational) -> Rational;
}

impl Mass for u128 {
    fn to_rational(&self, scale: &Rational) -> Rational {
        Rational::from_integer(BigInt::from(*self)) / scale
    }
}

impl Mass for Rational {
    fn to_rational(&self, _: &Rational) -> Rational {
        self.clone()
    }
}

struct Ctx<'a, T> {
    support: Vec<(u64, T)>,
    /// Common denominator of the masses; squared when products are reported.
    scale: Rational,
    sig: &'a Signature,
    n: usize,
    atom_elems: Vec<u64>,
    atom_distinct: Vec<usize>,
    r: usize,
    principle: Principle,
    budget: Budget,
}

impl<T: Mass> Ctx<'_, T> {
    fn prob(&self, mask: u64, value: u64) -> T {
        self.support
            .iter()
            .filter(|(w, _)| w & mask == value)
            .fold(T::zero(), |acc, (_, p)| acc + p.clone())
    }

    fn prob_and(&self, a: (u64, u64), b: (u64, u64)) -> Option<(u64, u64)> {
        if (a.1 ^ b.1) & a.0 & b.0 != 0 {
            None
        } else {
            Some((a.0 | b.0, a.1 | b.1))
        }
    }

    fn p(&self, e: Option<(u64, u64)>) -> T {
        e.map_or_else(T::zero, |(m, v)| self.prob(m, v))
    }

    fn literals(&self, mask: u64, value: u64) -> String {
        if mask == 0 {
            return "true".into();
        }
        let lay = self.sig.layout(self.n);
        let mut parts = Vec::new();
        for i in 0..64 {
            if mask >> i & 1 == 1 {
                let a = lay.atom(i).display(self.sig).to_string();
                parts.push(if value >> i & 1 == 1 { a } else { format!("~{a}") });
            }
        }
        parts.join(" & ")
    }

    /// Checks `(phi, psi)` against every admissible θ; returns the number of triples
    /// checked and the first violation.
    fn check_pair(&self, phi: &Conj, psi: &Conj) -> Result<(u64, Option<IndependenceViolation>)> {
        let shared = phi.elems & psi.elems;
        let levels: Vec<Option<usize>> = match self.principle {
            Principle::Ip if shared != 0 => return Ok((0, None)),
            Principle::Ip => vec![None],
            Principle::Sip => {
                let overlap = phi
                    .atoms
                    .iter()
                    .flat_map(|&a| psi.atoms.iter().map(move |&b| (a, b)))
                    .map(|(a, b)| (self.atom_elems[a] & self.atom_elems[b]).count_ones() as usize)
                    .max()
                    .unwrap_or(0);
                (overlap..self.r).map(Some).collect()
            }
        };
        let a = (phi.mask, phi.value);
        let b = (psi.mask, psi.value);
        let mut checked = 0;
        let mut last_theta_mask = None;
        for g in levels {
            let tmask: u64 = match g {
                None => 0,
                Some(g) => (0..self.atom_elems.len())
                    .filter(|&i| self.atom_elems[i] & !shared == 0 && self.atom_distinct[i] <= g)
                    .fold(0, |m, i| m | 1 << i),
            };
            if last_theta_mask == Some(tmask) {
                continue;
            }
            last_theta_mask = Some(tmask);
            self.budget
                .check("trace assignments over shared constants", tmask.count_ones() as usize)?;
            let mut v = 0u64;
            loop {
                let th = (tmask, v);
                let pt = self.prob(tmask, v);
                if !pt.is_zero() {
                    checked += 1;
                    let pab = self.p(self.prob_and(a, b).and_then(|ab| self.prob_and(ab, th)));
                    let pa = self.p(self.prob_and(a, th));
                    let pb = self.p(self.prob_and(b, th));
                    let lhs = pab * pt;
                    let rhs = pa * pb;
                    if lhs != rhs {
                        let sq = &self.scale * &self.scale;
                        return Ok((
                            checked,
                            Some(IndependenceViolation {
                                g,
                                phi: self.literals(phi.mask, phi.value),
                                psi: self.literals(psi.mask, psi.value),
                                theta: self.literals(tmask, v),
                                lhs: lhs.to_rational(&sq),
                                rhs: rhs.to_rational(&sq),
                            }),
                        ));
                    }
                }
                // next submask of tmask
                v = v.wrapping_sub(tmask) & tmask;
                if v == 0 {
                    break;
                }
            }
        }
        Ok((checked, None))
    }
}

fn conjunctions(k: usize, max_literals: usize, atom_elems: &[u64]) -> Vec<Conj> {
    fn go(start: usize, k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, size: usize) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        if left == 0 {
            return;
        }
        for lit in start..2 * k {
            if cur.last().is_some_and(|&l| l / 2 == lit / 2) {
                continue;
            }
            cur.push(lit);
            go(lit + 1, k, left - 1, cur, out, size);
            cur.pop();
        }
    }
    let mut lits = Vec::new();
    for size in 1..=max_literals.min(k) {
        go(0, k, size, &mut Vec::new(), &mut lits, size);
    }
    lits.into_iter()
        .map(|ls| {
            let mut c = Conj {
                mask: 0,
                value: 0,
                atoms: Vec::new(),
                elems: 0,
            };
            for l in ls {
                let a = l / 2;
                c.mask |= 1 << a;
                if l % 2 == 0 {
                    c.value |= 1 << a;
                }
                c.atoms.push(a);
                c.elems |= atom_elems[a];
            }
            c
        })
        .collect()
}

fn run<T: Mass>(ctx: Ctx<'_, T>, max_literals: usize) -> Result<IndependenceReport> {
    let conj = conjunctions(ctx.atom_elems.len(), max_literals, &ctx.atom_elems);
    let rows: Vec<(u64, Option<IndependenceViolation>)> = (0..conj.len())
        .into_par_iter()
        .map(|i| {
            let mut count = 0;
            for j in i..conj.len() {
                let (c, v) = ctx.check_pair(&conj[i], &conj[j])?;
                count += c;
                if v.is_some() {
                    return Ok((count, v));
                }
            }
            Ok((count, None))
        })
        .collect::<Result<_>>()?;
    let failure = rows.iter().find_map(|(_, v)| v.clone());
    Ok(IndependenceReport {
        principle: ctx.principle,
        n: ctx.n,
        max_literals,
        checked: rows.iter().map(|(c, _)| c).sum(),
        failure,
    })
}

fn independence(f: &dyn Family, n: usize, max_literals: usize, principle: Principle, budget: Budget) -> Result<IndependenceReport> {
    let sig = f.signature().clone();
    let k = sig.atom_count(n);
    budget.check(format!("worlds at n={n}"), k)?;
    if n > 63 {
        return Err(Error::SizeMismatch("domain too large".into()));
    }
    let d = f.dist_at(n)?;
    let lay = sig.layout(n);
    let atoms: Vec<_> = lay.atoms().map(|(_, a)| a).collect();
    let atom_elems = atoms.iter().map(|a| a.args.iter().fold(0u64, |m, &e| m | 1 << e)).collect();
    let atom_distinct = atoms.iter().map(|a| a.distinct_count()).collect();
    let words: Vec<(u64, Rational)> = d
        .bit_map()
        .iter()
        .map(|(b, p)| (b.as_u64().expect("at most 63 atoms"), p.clone()))
        .collect();
    macro_rules! ctx {
        ($support:expr, $scale:expr) => {
            Ctx {
                support: $support,
                scale: $scale,
                sig: &sig,
                n,
                atom_elems,
                atom_distinct,
                r: sig.max_arity(),
                principle,
                budget,
            }
        };
    }
    let den = words.iter().fold(BigInt::from(1), |l, (_, p)| l.lcm(p.denom()));
    match den.to_u64().filter(|&d| d < 1 << 62) {
        Some(_) => {
            let support = words
                .iter()
                .map(|(w, p)| {
                    let num = p.numer() * (&den / p.denom());
                    (*w, num.to_u128().expect("numerator below denominator"))
                })
                .collect();
            run(ctx!(support, Rational::from_integer(den.clone())), max_literals)
        }
        None => run(ctx!(words, Rational::from_integer(1.into())), max_literals),
    }
}

/// Exhaustive SIP check on `dist_at(n)` over pairs of literal conjunctions.
///
/// For each pair, each level `g < r` such that no `g+1` elements appear together in an atom
/// of both events, and each assignment θ to the atoms over the shared elements with at most
/// `g` distinct arguments that has positive probability, asserts
/// `P(φ∧ψ∧θ)·P(θ) = P(φ∧θ)·P(ψ∧θ)`.
pub fn check_sip_direct(f: &dyn Family, n: usize, max_literals: usize) -> Result<IndependenceReport> {
    independence(f, n, max_literals, Principle::Sip, Budget::default())
}

/// Exhaustive IP check: events sharing no element are independent.
pub fn check_ip(f: &dyn Family, n: usize, max_literals: usize) -> Result<IndependenceReport> {
    independence(f, n, max_literals, Principle::Ip, Budget::default())
}

/// A positive-probability g-trace θ over `{0..g}` all of whose positive-probability
/// extensions are asymmetric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsymmetryWitness {
    pub g: usize,
    pub theta: World,
    /// Extensions (full worlds on `{0..g}`) with their conditional probabilities.
    pub evidence: Vec<(World, Rational)>,
}

impl fmt::Display for AsymmetryWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g={} theta=[{}] has no symmetric positive extension:", self.g, self.theta)?;
        for (i, (w, p)) in self.evidence.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            write!(f, "{sep}[{w}] {}", format_rational(p))?;
        }
        Ok(())
    }
}

/// Scans `dist_at(g+1)` for `g < r`, θ in bitmask order.
pub fn check_essential_asymmetry(f: &dyn Family) -> Result<Option<AsymmetryWitness>> {
    let sig = f.signature().clone();
    for g in 0..sig.max_arity() {
        let d = f.dist_at(g + 1)?;
        if let Some(w) = asymmetric_theta(&d, g) {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

pub(crate) fn asymmetric_theta(d: &Dist, g: usize) -> Option<AsymmetryWitness> {
    let sig = d.signature();
    let low = shape(sig, g).low;
    let mut by_theta: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for (bits, p) in d.bit_map() {
        by_theta.entry(bits.and(&low)).or_default().push((bits.clone(), p.clone()));
    }
    for (t, exts) in by_theta {
        let theta = World::from_bits(sig.clone(), g + 1, t);
        let total: Rational = exts.iter().map(|(_, p)| p).sum();
        let worlds: Vec<(World, Rational)> = exts
            .into_iter()
            .map(|(b, p)| (World::from_bits(sig.clone(), g + 1, b), p / &total))
            .collect();
        if !worlds.iter().any(|(w, _)| is_symmetric_extension_world(&theta, w)) {
            return Some(AsymmetryWitness {
                g,
                theta,
                evidence: worlds,
            });
        }
    }
    None
}
