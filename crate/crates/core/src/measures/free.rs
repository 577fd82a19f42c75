use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{Budget, Error, Result};
use crate::measures::dist::Dist;
use crate::measures::family::Family;
use crate::measures::rational::{format_rational, pow, Rational};
use crate::relational::{Bits, Signature, World};

/// Per-relation probability that each ground atom is true, independently.
///
/// Strict weights lie in the open interval `(0,1)`; permissive ones may also be 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightFn {
    weights: BTreeMap<String, Rational>,
}

impl WeightFn {
    pub fn strict(weights: impl IntoIterator<Item = (String, Rational)>) -> Result<Self> {
        let w = Self::permissive(weights)?;
        if let Some((name, p)) = w.weights.iter().find(|(_, p)| p.is_zero() || p.is_one()) {
            return Err(Error::Weight(format!(
                "weight of `{name}` is {}; weights must lie strictly between 0 and 1",
                format_rational(p)
            )));
        }
        Ok(w)
    }

    pub fn permissive(weights: impl IntoIterator<Item = (String, Rational)>) -> Result<Self> {
        let weights: BTreeMap<String, Rational> = weights.into_iter().collect();
        if let Some((name, p)) = weights
            .iter()
            .find(|(_, p)| **p < Rational::zero() || **p > Rational::one())
        {
            return Err(Error::Weight(format!("weight of `{name}` is {}", format_rational(p))));
        }
        Ok(WeightFn { weights })
    }

    pub fn get(&self, name: &str) -> Option<&Rational> {
        self.weights.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rational)> {
        self.weights.iter()
    }

    /// Weights in signature order; fails if a relation has no weight.
    pub fn for_signature(&self, sig: &Signature) -> Result<Vec<Rational>> {
        sig.relations()
            .iter()
            .map(|r| {
                self.weights
                    .get(&r.name)
                    .cloned()
                    .ok_or_else(|| Error::Weight(format!("missing weight for `{}`", r.name)))
            })
            .collect()
    }
}

/// Product of `w(R)` over true atoms and `1 - w(R)` over false atoms.
pub fn free_prob(w: &WeightFn, world: &World) -> Result<Rational> {
    let sig = world.signature();
    let weights = w.for_signature(sig)?;
    let lay = world.layout();
    let mut p = Rational::one();
    for (ri, wr) in weights.iter().enumerate() {
        let start = lay.offset(ri);
        let len = lay.block_len(ri);
        let t = (start..start + len).filter(|&i| world.bits().get(i)).count();
        p *= pow(wr, t) * pow(&(Rational::one() - wr), len - t);
    }
    Ok(p)
}

pub(crate) struct FreeTable {
    // per relation: (offset, block length, w^t (1-w)^(len-t) for t = 0..=len)
    blocks: Vec<(usize, usize, Vec<Rational>)>,
}

impl FreeTable {
    pub(crate) fn new(w: &WeightFn, sig: &Signature, n: usize) -> Result<Self> {
        let weights = w.for_signature(sig)?;
        let lay = sig.layout(n);
        let blocks = weights
            .iter()
            .enumerate()
            .map(|(ri, wr)| {
                let len = lay.block_len(ri);
                let q = Rational::one() - wr;
                let table = (0..=len).map(|t| pow(wr, t) * pow(&q, len - t)).collect();
                (lay.offset(ri), len, table)
            })
            .collect();
        Ok(FreeTable { blocks })
    }

    pub(crate) fn prob(&self, bits: &Bits) -> Rational {
        let mut p = Rational::one();
        for (off, len, table) in &self.blocks {
            let t = (*off..off + len).filter(|&i| bits.get(i)).count();
            p *= &table[t];
        }
        p
    }
}

/// The free distribution at domain size `n`.
pub fn free_dist(w: &WeightFn, sig: &Arc<Signature>, n: usize, budget: Budget) -> Result<Dist> {
    let k = sig.atom_count(n);
    budget.check(format!("free distribution over {sig} at n={n}"), k)?;
    let table = FreeTable::new(w, sig, n)?;
    let mut probs = BTreeMap::new();
    for m in 0..(1u64 << k) {
        let b = Bits::from_u64(k, m);
        let p = table.prob(&b);
        probs.insert(b, p);
    }
    Dist::from_bit_map(sig.clone(), n, probs)
}

/// `n ↦ free_dist(w, sig, n)`.
#[derive(Clone, Debug)]
pub struct FreeFamily {
    pub weights: WeightFn,
    pub sig: Arc<Signature>,
    pub budget: Budget,
}

impl FreeFamily {
    pub fn new(weights: WeightFn, sig: Arc<Signature>) -> Result<Self> {
        weights.for_signature(&sig)?;
        Ok(FreeFamily {
            weights,
            sig,
            budget: Budget::default(),
        })
    }
}

impl Family for FreeFamily {
    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn dist_at(&self, n: usize) -> Result<Dist> {
        free_dist(&self.weights, &self.sig, n, self.budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::rational::rat;

    fn sig(s: &str) -> Arc<Signature> {
        Arc::new(Signature::parse(s).unwrap())
    }

    fn wf(pairs: &[(&str, Rational)]) -> WeightFn {
        WeightFn::strict(pairs.iter().map(|(n, p)| (n.to_string(), p.clone()))).unwrap()
    }

    #[test]
    fn free_prob_examples() {
        let f = sig("F/1");
        let w = wf(&[("F", rat(1, 2))]);
        assert_eq!(free_prob(&w, &World::parse("F(0)", f, 1).unwrap()).unwrap(), rat(1, 2));

        let e = sig("E/2");
        let w = wf(&[("E", rat(1, 3))]);
        // (1/3)(2/3)^3 over the four ground atoms
        assert_eq!(free_prob(&w, &World::parse("E(0,1)", e, 2).unwrap()).unwrap(), rat(8, 81));
    }

    #[test]
    fn weights_are_validated() {
        assert!(WeightFn::strict([("F".to_string(), rat(1, 1))]).is_err());
        assert!(WeightFn::strict([("F".to_string(), rat(0, 1))]).is_err());
        assert!(WeightFn::permissive([("F".to_string(), rat(1, 1))]).is_ok());
        assert!(WeightFn::permissive([("F".to_string(), rat(5, 4))]).is_err());
        let w = wf(&[("P", rat(1, 2))]);
        let err = free_prob(&w, &World::empty(sig("P/1 E/2"), 1)).unwrap_err();
        assert!(err.to_string().contains("missing weight for `E`"));
    }

    #[test]
    fn free_dist_has_unit_mass() {
        let s = sig("P/1 E/2");
        let w = wf(&[("P", rat(2, 7)), ("E", rat(5, 9))]);
        let d = free_dist(&w, &s, 2, Budget::default()).unwrap();
        assert_eq!(d.total(), rat(1, 1));
        assert_eq!(d.support_len(), 64);
    }
}
