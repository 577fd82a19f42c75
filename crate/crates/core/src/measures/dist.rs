use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::measures::rational::{format_rational, in_unit_interval, one, parse_rational, Rational};
use crate::relational::{apply_map, reduct, Bits, DomainMap, Signature, World};

/// Exact distribution over the worlds of one signature and domain size.
/// Only worlds of nonzero probability are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dist {
    sig: Arc<Signature>,
    n: usize,
    probs: BTreeMap<Bits, Rational>,
}

impl Dist {
    /// Builds a distribution from (world, probability) pairs; repeated worlds accumulate.
    /// Fails unless the total mass is exactly one and every probability lies in `[0,1]`.
    pub fn from_pairs(sig: Arc<Signature>, n: usize, pairs: impl IntoIterator<Item = (World, Rational)>) -> Result<Self> {
        let mut probs: BTreeMap<Bits, Rational> = BTreeMap::new();
        for (w, p) in pairs {
            if w.signature() != &sig || w.domain_size() != n {
                return Err(Error::InvalidDist(format!("world {w} does not belong to {sig} at n={n}")));
            }
            *probs.entry(w.into_bits()).or_insert_with(Rational::zero) += p;
        }
        Self::from_bit_map(sig, n, probs)
    }

    pub(crate) fn from_bit_map(sig: Arc<Signature>, n: usize, mut probs: BTreeMap<Bits, Rational>) -> Result<Self> {
        probs.retain(|_, p| !p.is_zero());
        let d = Dist { sig, n, probs };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(w: World) -> Self {
        let sig = w.signature().clone();
        let n = w.domain_size();
        let mut probs = BTreeMap::new();
        probs.insert(w.into_bits(), one());
        Dist { sig, n, probs }
    }

    fn validate(&self) -> Result<()> {
        if let Some((_, p)) = self.probs.iter().find(|(_, p)| !in_unit_interval(p)) {
            return Err(Error::InvalidDist(format!("probability {} outside [0,1]", format_rational(p))));
        }
        let total = self.total();
        if total != one() {
            return Err(Error::InvalidDist(format!("total mass {} ≠ 1", format_rational(&total))));
        }
        Ok(())
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn domain_size(&self) -> usize {
        self.n
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> Rational {
        self.probs.values().fold(Rational::zero(), |a, b| a + b)
    }

    pub fn prob(&self, w: &World) -> Rational {
        if w.signature() != &self.sig || w.domain_size() != self.n {
            return Rational::zero();
        }
        self.probs.get(w.bits()).cloned().unwrap_or_else(Rational::zero)
    }

    pub(crate) fn prob_bits(&self, b: &Bits) -> Option<&Rational> {
        self.probs.get(b)
    }

    pub(crate) fn bit_map(&self) -> &BTreeMap<Bits, Rational> {
        &self.probs
    }

    /// Support in canonical (bitmask) order.
    pub fn iter(&self) -> impl Iterator<Item = (World, &Rational)> + '_ {
        self.probs
            .iter()
            .map(move |(b, p)| (World::from_bits(self.sig.clone(), self.n, b.clone()), p))
    }

    /// Dump format: `<world> ; <p>` per support world in bitmask order, then `TOTAL ; 1`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (w, p) in self.iter() {
            let _ = writeln!(out, "{w} ; {}", format_rational(p));
        }
        let _ = writeln!(out, "TOTAL ; {}", format_rational(&self.total()));
        out
    }

    /// Reads the dump format back.
    pub fn parse_dump(text: &str, sig: Arc<Signature>, n: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut saw_total = false;
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (lhs, rhs) = line
                .rsplit_once(';')
                .ok_or_else(|| Error::Format(format!("line {}: expected `<world> ; <rational>`", ln + 1)))?;
            let p = parse_rational(rhs)?;
            if lhs.trim() == "TOTAL" {
                saw_total = true;
                continue;
            }
            pairs.push((World::parse(lhs, sig.clone(), n)?, p));
        }
        if !saw_total {
            return Err(Error::Format("missing `TOTAL ; 1` line".into()));
        }
        Dist::from_pairs(sig, n, pairs)
    }
}

/// An event: a predicate on worlds. Sets and formulas both convert into this form.
pub trait Event {
    fn contains(&self, w: &World) -> bool;
}

impl<F: Fn(&World) -> bool> Event for F {
    fn contains(&self, w: &World) -> bool {
        self(w)
    }
}

impl Event for crate::relational::Formula {
    fn contains(&self, w: &World) -> bool {
        crate::relational::eval_formula(self, w)
    }
}

impl Event for std::collections::BTreeSet<World> {
    fn contains(&self, w: &World) -> bool {
        std::collections::BTreeSet::contains(self, w)
    }
}

impl Event for std::collections::HashSet<World> {
    fn contains(&self, w: &World) -> bool {
        std::collections::HashSet::contains(self, w)
    }
}

fn mass(d: &Dist, pred: impl Fn(&World) -> bool) -> Rational {
    d.iter()
        .filter(|(w, _)| pred(w))
        .fold(Rational::zero(), |acc, (_, p)| acc + p)
}

/// `P(event)`, or `P(event ∩ given) / P(given)` when conditioning.
pub fn event_prob(d: &Dist, event: &dyn Event, given: Option<&dyn Event>) -> Result<Rational> {
    match given {
        None => Ok(mass(d, |w| event.contains(w))),
        Some(g) => {
            let denom = mass(d, |w| g.contains(w));
            if denom.is_zero() {
                return Err(Error::UndefinedConditional);
            }
            Ok(mass(d, |w| g.contains(w) && event.contains(w)) / denom)
        }
    }
}

/// Pushforward along the restriction `w ↦ apply_map(w, m)`.
pub fn marginalize_domain(d: &Dist, m: &DomainMap) -> Result<Dist> {
    if m.target_size() != d.n {
        return Err(Error::SizeMismatch(format!(
            "map targets size {}, distribution lives on size {}",
            m.target_size(),
            d.n
        )));
    }
    let mut probs: BTreeMap<Bits, Rational> = BTreeMap::new();
    for (w, p) in d.iter() {
        let small = apply_map(&w, m)?;
        *probs.entry(small.into_bits()).or_insert_with(Rational::zero) += p;
    }
    Dist::from_bit_map(d.sig.clone(), m.source_size(), probs)
}

/// Pushforward along the reduct to `sub`.
pub fn marginalize_signature(d: &Dist, sub: &Arc<Signature>) -> Result<Dist> {
    if !sub.is_subsignature_of(&d.sig) {
        return Err(Error::NotSubsignature(format!("{sub} is not contained in {}", d.sig)));
    }
    let mut probs: BTreeMap<Bits, Rational> = BTreeMap::new();
    for (w, p) in d.iter() {
        let r = reduct(&w, sub)?;
        *probs.entry(r.into_bits()).or_insert_with(Rational::zero) += p;
    }
    Dist::from_bit_map(sub.clone(), d.n, probs)
}
