use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Budget, Error, Result};
use crate::gplp::{gather, gather_table};
use crate::measures::{Dist, Family, Rational};
use crate::relational::{Bits, DomainMap, Signature, World};
use crate::sip::params::{scatter, shape, SipParams};

/// Strictly ascending `k`-tuples over `{0..n-1}` in lexicographic order.
pub fn ascending_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            cur.push(x);
            go(x + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// For each level below `levels`, the gather tables of the ascending tuples over `{0..n-1}`.
fn tuple_tables(sig: &Signature, n: usize, levels: usize) -> Vec<Vec<Vec<usize>>> {
    (0..levels)
        .map(|g| {
            ascending_tuples(n, g + 1)
                .into_iter()
                .map(|t| gather_table(sig, &DomainMap::new(n, t).expect("ascending tuple")))
                .collect()
        })
        .collect()
}

impl SipParams {
    /// Runs levels `0..levels` on `{0..n-1}`, returning the positive-probability partial
    /// worlds. Distinct branches set distinct atoms, so no two states coincide.
    pub(crate) fn construct(&self, n: usize, levels: usize) -> Result<Vec<(Bits, Rational)>> {
        let sig = self.signature();
        let levels = levels.min(self.max_arity());
        let mut states = vec![(Bits::zeros(sig.atom_count(n)), Rational::one())];
        for (g, tables) in tuple_tables(sig, n, levels).iter().enumerate() {
            let low = shape(sig, g).low;
            for table in tables {
                let mut next = Vec::with_capacity(states.len());
                for (bits, p) in &states {
                    let theta = gather(bits.words(), table).and(&low);
                    let exts = self.level(g).get(&theta).ok_or_else(|| {
                        Error::InvalidParams(format!(
                            "g={g}: no parameters for reachable θ [{}]",
                            World::from_bits(sig.clone(), g + 1, theta.clone())
                        ))
                    })?;
                    for (new, q) in exts.iter().filter(|(_, q)| !q.is_zero()) {
                        let mut b = bits.clone();
                        scatter(new, table, &mut b);
                        next.push((b, p * q));
                    }
                }
                states = next;
            }
        }
        Ok(states)
    }

    /// Distribution of g-traces over `{0..g}`, keyed by θ bits.
    pub(crate) fn theta_dist(&self, g: usize) -> Result<BTreeMap<Bits, Rational>> {
        Ok(self.construct(g + 1, g)?.into_iter().collect())
    }

    fn prob_unchecked(&self, w: &World) -> Rational {
        let sig = self.signature();
        let n = w.domain_size();
        let mut p = Rational::one();
        for (g, tables) in tuple_tables(sig, n, self.max_arity()).iter().enumerate() {
            let sh = shape(sig, g);
            for table in tables {
                let local = gather(w.bits().words(), table);
                let q = self
                    .level(g)
                    .get(&local.and(&sh.low))
                    .and_then(|e| e.get(&local.and(&sh.new)));
                match q {
                    Some(q) if !q.is_zero() => p *= q,
                    _ => return Rational::zero(),
                }
            }
        }
        p
    }
}

/// Product over elements of the 1-trace parameter, then over each level and ascending
/// tuple of the parameter of the tuple's extension given its lower trace.
pub fn sip_prob(p: &SipParams, w: &World) -> Result<Rational> {
    if w.signature().as_ref() != p.signature().as_ref() {
        return Err(Error::NotSubsignature(format!("world is over {}, parameters over {}", w.signature(), p.signature())));
    }
    p.ensure_valid()?;
    Ok(p.prob_unchecked(w))
}

pub fn sip_dist(p: &SipParams, n: usize, budget: Budget) -> Result<Dist> {
    p.ensure_valid()?;
    build_dist(p, n, budget)
}

fn build_dist(p: &SipParams, n: usize, budget: Budget) -> Result<Dist> {
    if n == 0 {
        return Err(Error::SizeMismatch("domain size must be at least 1".into()));
    }
    budget.check(format!("SIP worlds at n={n}"), p.signature().atom_count(n))?;
    let states = p.construct(n, p.max_arity())?;
    Dist::from_bit_map(p.signature().clone(), n, states.into_iter().collect())
}

/// `n ↦ sip_dist(p, n)`.
#[derive(Clone, Debug)]
pub struct SipFamily {
    params: SipParams,
    pub budget: Budget,
}

pub fn sip_family(p: &SipParams) -> Result<SipFamily> {
    p.ensure_valid()?;
    Ok(SipFamily {
        params: p.clone(),
        budget: Budget::default(),
    })
}

impl SipFamily {
    pub fn params(&self) -> &SipParams {
        &self.params
    }
}

impl Family for SipFamily {
    fn signature(&self) -> &Arc<Signature> {
        self.params.signature()
    }

    fn dist_at(&self, n: usize) -> Result<Dist> {
        build_dist(&self.params, n, self.budget)
    }
}

/// Cumulative thresholds scaled to `2^64`: a uniform `u64` draw `u` picks the first
/// extension whose threshold exceeds `u`.
type Thresholds = Vec<(Bits, u128)>;

/// Draws worlds stage by stage from validated parameters.
#[derive(Clone, Debug)]
pub struct SipSampler {
    params: SipParams,
    thresholds: Vec<BTreeMap<Bits, Thresholds>>,
}

fn threshold(cum: &Rational) -> u128 {
    let scaled = cum * Rational::from_integer(BigInt::one() << 64);
    let (q, r) = scaled.numer().div_rem(scaled.denom());
    let c = if r.is_zero() { q } else { q + 1 };
    c.to_u128().expect("threshold at most 2^64")
}

impl SipSampler {
    pub fn new(p: &SipParams) -> Result<Self> {
        p.ensure_valid()?;
        let thresholds = (0..p.max_arity())
            .map(|g| {
                p.level(g)
                    .iter()
                    .map(|(t, exts)| {
                        let mut cum = Rational::zero();
                        let list = exts
                            .iter()
                            .filter(|(_, q)| !q.is_zero())
                            .map(|(new, q)| {
                                cum += q;
                                (new.clone(), threshold(&cum))
                            })
                            .collect();
                        (t.clone(), list)
                    })
                    .collect()
            })
            .collect();
        Ok(SipSampler {
            params: p.clone(),
            thresholds,
        })
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<World> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with(&self, n: usize, rng: &mut impl RngCore) -> Result<World> {
        let sig = self.params.signature();
        if n == 0 {
            return Err(Error::SizeMismatch("domain size must be at least 1".into()));
        }
        let mut bits = Bits::zeros(sig.atom_count(n));
        for (g, tables) in tuple_tables(sig, n, self.params.max_arity()).iter().enumerate() {
            let low = shape(sig, g).low;
            for table in tables {
                let theta = gather(bits.words(), table).and(&low);
                let list = self.thresholds[g]
                    .get(&theta)
                    .ok_or_else(|| Error::InvalidParams(format!("g={g}: no parameters for reachable θ")))?;
                let u = rng.next_u64() as u128;
                let (new, _) = list
                    .iter()
                    .find(|(_, t)| u < *t)
                    .expect("thresholds end at 2^64");
                scatter(new, table, &mut bits);
            }
        }
        Ok(World::from_bits(sig.clone(), n, bits))
    }
}

/// One world drawn with a ChaCha8 stream seeded by `seed`.
pub fn sample_world(p: &SipParams, n: usize, seed: u64) -> Result<World> {
    SipSampler::new(p)?.sample(n, seed)
}
