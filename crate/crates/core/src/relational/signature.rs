use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
}

/// An ordered relational vocabulary. Declaration order fixes the canonical ground-atom order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    relations: Vec<Relation>,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Signature {
    pub fn new<S: Into<String>>(relations: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut sig = Signature::default();
        for (name, arity) in relations {
            sig.push(name.into(), arity)?;
        }
        Ok(sig)
    }

    pub fn empty() -> Self {
        Signature::default()
    }

    fn push(&mut self, name: String, arity: usize) -> Result<()> {
        if !is_identifier(&name) {
            return Err(Error::InvalidSignature(format!("`{name}` is not an identifier")));
        }
        if arity == 0 {
            return Err(Error::InvalidSignature(format!("`{name}` has arity 0")));
        }
        if self.index_of(&name).is_some() {
            return Err(Error::InvalidSignature(format!("duplicate relation `{name}`")));
        }
        self.relations.push(Relation { name, arity });
        Ok(())
    }

    /// Parses `name/arity` declarations separated by whitespace or commas, e.g. `P/1 E/2`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sig = Signature::default();
        for decl in text.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()) {
            let (name, arity) = decl
                .split_once('/')
                .ok_or_else(|| Error::InvalidSignature(format!("expected name/arity, got `{decl}`")))?;
            let arity: usize = arity
                .parse()
                .map_err(|_| Error::InvalidSignature(format!("bad arity in `{decl}`")))?;
            sig.push(name.to_string(), arity)?;
        }
        Ok(sig)
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn relation(&self, idx: usize) -> &Relation {
        &self.relations[idx]
    }

    pub fn max_arity(&self) -> usize {
        self.relations.iter().map(|r| r.arity).max().unwrap_or(0)
    }

    /// Number of ground atoms over a domain of size `n`, saturating on overflow.
    pub fn atom_count(&self, n: usize) -> usize {
        self.relations
            .iter()
            .map(|r| n.checked_pow(r.arity as u32).unwrap_or(usize::MAX))
            .fold(0usize, |a, b| a.saturating_add(b))
    }

    /// True iff every relation of `self` occurs in `other` with the same arity.
    pub fn is_subsignature_of(&self, other: &Signature) -> bool {
        self.relations.iter().all(|r| {
            other
                .index_of(&r.name)
                .is_some_and(|i| other.relations[i].arity == r.arity)
        })
    }

    /// Concatenation; fails on a repeated name.
    pub fn concat(&self, other: &Signature) -> Result<Signature> {
        let mut sig = self.clone();
        for r in &other.relations {
            sig.push(r.name.clone(), r.arity)?;
        }
        Ok(sig)
    }

    pub fn layout(&self, n: usize) -> Layout {
        Layout::new(self, n)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.relations.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}/{}", r.name, r.arity)?;
        }
        Ok(())
    }
}

/// A ground atom `R(a1,..,ak)`; `rel` indexes the owning signature.
///
/// The derived ordering (relation index, then lexicographic arguments) is the canonical atom order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub rel: usize,
    pub args: SmallVec<[usize; 4]>,
}

impl GroundAtom {
    pub fn new(rel: usize, args: impl IntoIterator<Item = usize>) -> Self {
        GroundAtom {
            rel,
            args: args.into_iter().collect(),
        }
    }

    /// The number of distinct elements among the arguments.
    pub fn distinct_count(&self) -> usize {
        distinct_count(&self.args)
    }

    pub fn arg_set(&self) -> SmallVec<[usize; 4]> {
        let mut v = self.args.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn display<'a>(&'a self, sig: &'a Signature) -> impl fmt::Display + 'a {
        AtomDisplay { atom: self, sig }
    }
}

pub(crate) fn distinct_count(args: &[usize]) -> usize {
    let mut seen: SmallVec<[usize; 4]> = SmallVec::new();
    for &a in args {
        if !seen.contains(&a) {
            seen.push(a);
        }
    }
    seen.len()
}

struct AtomDisplay<'a> {
    atom: &'a GroundAtom,
    sig: &'a Signature,
}

impl fmt::Display for AtomDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.sig.relation(self.atom.rel).name)?;
        for (i, a) in self.atom.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Bit positions of the ground atoms of a signature over `{0..n-1}`.
#[derive(Clone, Debug)]
pub struct Layout {
    pub n: usize,
    offsets: Vec<usize>,
    arities: Vec<usize>,
    total: usize,
}

impl Layout {
    fn new(sig: &Signature, n: usize) -> Self {
        let mut offsets = Vec::with_capacity(sig.len());
        let mut total = 0usize;
        for r in sig.relations() {
            offsets.push(total);
            total = total.saturating_add(n.checked_pow(r.arity as u32).unwrap_or(usize::MAX));
        }
        Layout {
            n,
            offsets,
            arities: sig.relations().iter().map(|r| r.arity).collect(),
            total,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn offset(&self, rel: usize) -> usize {
        self.offsets[rel]
    }

    pub fn block_len(&self, rel: usize) -> usize {
        self.n.pow(self.arities[rel] as u32)
    }

    pub fn index(&self, rel: usize, args: &[usize]) -> usize {
        debug_assert_eq!(args.len(), self.arities[rel]);
        let mut idx = 0;
        for &a in args {
            idx = idx * self.n + a;
        }
        self.offsets[rel] + idx
    }

    pub fn index_of(&self, atom: &GroundAtom) -> usize {
        self.index(atom.rel, &atom.args)
    }

    pub fn atom(&self, idx: usize) -> GroundAtom {
        let rel = match self.offsets.binary_search(&idx) {
            Ok(mut i) => {
                // skip empty blocks sharing this offset
                while i + 1 < self.offsets.len() && self.offsets[i + 1] == idx {
                    i += 1;
                }
                i
            }
            Err(i) => i - 1,
        };
        let arity = self.arities[rel];
        let mut rem = idx - self.offsets[rel];
        let mut args: SmallVec<[usize; 4]> = SmallVec::from_elem(0, arity);
        for slot in args.iter_mut().rev() {
            *slot = rem % self.n;
            rem /= self.n;
        }
        GroundAtom { rel, args }
    }

    /// Iterates `(index, atom)` over all ground atoms in canonical order.
    pub fn atoms(&self) -> impl Iterator<Item = (usize, GroundAtom)> + '_ {
        (0..self.total).map(move |i| (i, self.atom(i)))
    }
}

/// Fixed-length bitset over canonical atom indices. Ordered as an unsigned integer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bits(SmallVec<[u64; 2]>);

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits(SmallVec::from_elem(0, len.div_ceil(64).max(1)))
    }

    pub fn from_u64(len: usize, value: u64) -> Self {
        let mut b = Bits::zeros(len);
        b.0[0] = value;
        b
    }

    pub fn words(&self) -> &[u64] {
        &self.0
    }

    pub fn as_u64(&self) -> Option<u64> {
        if self.0[1..].iter().all(|&w| w == 0) {
            Some(self.0[0])
        } else {
            None
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        let w = &mut self.0[i / 64];
        if value {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + t)
                }
            })
        })
    }

    pub fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(other.0.iter()).map(|(a, b)| a & b).collect())
    }

    pub fn and_not(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(other.0.iter()).map(|(a, b)| a & !b).collect())
    }

    pub fn or_assign(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a |= b;
        }
    }

    /// `self & mask == value`
    pub fn matches(&self, mask: &Bits, value: &Bits) -> bool {
        self.0
            .iter()
            .zip(mask.0.iter())
            .zip(value.0.iter())
            .all(|((a, m), v)| a & m == *v)
    }

    pub(crate) fn resize(&mut self, len: usize) {
        self.0.resize(len.div_ceil(64).max(1), 0);
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.0
    }

    pub(crate) fn from_words(len: usize, words: &[u64]) -> Bits {
        let mut b = Bits(words.iter().copied().collect());
        b.truncate(len);
        b
    }

    /// Keeps bits `0..len` and clears the rest.
    pub(crate) fn truncate(&mut self, len: usize) {
        self.resize(len);
        if len % 64 != 0 {
            let last = self.0.len() - 1;
            self.0[last] &= (1u64 << (len % 64)) - 1;
        }
    }
}

impl Ord for Bits {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.iter().rev().cmp(other.0.iter().rev()))
    }
}

impl PartialOrd for Bits {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
