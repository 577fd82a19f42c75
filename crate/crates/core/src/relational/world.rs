use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Budget, Error, Result};
use crate::relational::signature::{Bits, GroundAtom, Layout, Signature};

/// A finite structure over `{0..n-1}`, stored as the bitmask of its true ground atoms.
#[derive(Clone, Debug)]
pub struct World {
    sig: Arc<Signature>,
    n: usize,
    bits: Bits,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.bits == other.bits && self.sig == other.sig
    }
}

impl Eq for World {}

impl Hash for World {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.n.hash(state);
        self.bits.hash(state);
    }
}

impl Ord for World {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.bits.cmp(&other.bits))
            .then_with(|| self.sig.cmp(&other.sig))
    }
}

impl PartialOrd for World {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl World {
    pub fn empty(sig: Arc<Signature>, n: usize) -> Self {
        assert!(n >= 1, "domain size must be positive");
        let total = sig.atom_count(n);
        World {
            sig,
            n,
            bits: Bits::zeros(total),
        }
    }

    /// Builds a world from raw bits; `bits` must have been sized for `sig.atom_count(n)`.
    pub fn from_bits(sig: Arc<Signature>, n: usize, mut bits: Bits) -> Self {
        bits.resize(sig.atom_count(n));
        World { sig, n, bits }
    }

    pub fn from_atoms(sig: Arc<Signature>, n: usize, atoms: impl IntoIterator<Item = GroundAtom>) -> Result<Self> {
        let mut w = World::empty(sig, n);
        for a in atoms {
            w.check_atom(&a)?;
            let lay = w.layout();
            w.bits.set(lay.index_of(&a), true);
        }
        Ok(w)
    }

    fn check_atom(&self, a: &GroundAtom) -> Result<()> {
        if a.rel >= self.sig.len() {
            return Err(Error::UnknownRelation(format!("#{}", a.rel)));
        }
        let r = self.sig.relation(a.rel);
        if a.args.len() != r.arity {
            return Err(Error::Arity {
                name: r.name.clone(),
                expected: r.arity,
                found: a.args.len(),
            });
        }
        if let Some(&e) = a.args.iter().find(|&&e| e >= self.n) {
            return Err(Error::OutOfDomain { element: e, n: self.n });
        }
        Ok(())
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn domain_size(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn into_bits(self) -> Bits {
        self.bits
    }

    pub fn layout(&self) -> Layout {
        self.sig.layout(self.n)
    }

    pub fn holds(&self, atom: &GroundAtom) -> bool {
        self.bits.get(self.layout().index_of(atom))
    }

    pub fn set(&mut self, atom: &GroundAtom, value: bool) {
        let i = self.layout().index_of(atom);
        self.bits.set(i, value);
    }

    pub fn true_atoms(&self) -> Vec<GroundAtom> {
        let lay = self.layout();
        self.bits.iter_ones().map(|i| lay.atom(i)).collect()
    }

    pub fn atom_count(&self) -> usize {
        self.bits.count_ones()
    }

    /// Parses the world literal syntax: space-separated atoms, or `{}` for the empty world.
    pub fn parse(text: &str, sig: Arc<Signature>, n: usize) -> Result<Self> {
        let atoms = parse_atom_list(text, &sig, n)?;
        World::from_atoms(sig, n, atoms)
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms = self.true_atoms();
        if atoms.is_empty() {
            return f.write_str("{}");
        }
        for (i, a) in atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", a.display(&self.sig))?;
        }
        Ok(())
    }
}

/// Parses a whitespace-separated list of ground atoms, `{}` meaning none.
pub fn parse_atom_list(text: &str, sig: &Signature, n: usize) -> Result<Vec<GroundAtom>> {
    let trimmed = text.trim();
    if trimmed == "{}" || trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let mut atoms = Vec::new();
    let bytes = trimmed.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            break;
        }
        let close = trimmed[pos..].find(')').ok_or_else(|| Error::Syntax {
            line: 1,
            column: pos + 1,
            message: "unterminated atom".into(),
        })?;
        atoms.push(parse_ground_atom(&trimmed[pos..pos + close + 1], pos, sig, n)?);
        pos += close + 1;
    }
    Ok(atoms)
}

/// Parses a single `NAME(i,j,..)` atom; `offset` positions error columns.
pub(crate) fn parse_ground_atom(text: &str, offset: usize, sig: &Signature, n: usize) -> Result<GroundAtom> {
    let syntax = |message: &str| Error::Syntax {
        line: 1,
        column: offset + 1,
        message: format!("{message} in `{text}`"),
    };
    let open = text.find('(').ok_or_else(|| syntax("expected `(`"))?;
    if !text.ends_with(')') {
        return Err(syntax("expected `)`"));
    }
    let name = text[..open].trim();
    let rel = sig
        .index_of(name)
        .ok_or_else(|| Error::UnknownRelation(name.to_string()))?;
    let mut args = smallvec::SmallVec::new();
    for part in text[open + 1..text.len() - 1].split(',') {
        let v: usize = part.trim().parse().map_err(|_| syntax("expected element index"))?;
        if v >= n {
            return Err(Error::OutOfDomain { element: v, n });
        }
        args.push(v);
    }
    let arity = sig.relation(rel).arity;
    if args.len() != arity {
        return Err(Error::Arity {
            name: name.to_string(),
            expected: arity,
            found: args.len(),
        });
    }
    Ok(GroundAtom { rel, args })
}

/// Injective map `{0..source_size-1} -> {0..target_size-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DomainMap {
    source_size: usize,
    target_size: usize,
    images: Vec<usize>,
}

impl DomainMap {
    pub fn new(target_size: usize, images: Vec<usize>) -> Result<Self> {
        for (i, &x) in images.iter().enumerate() {
            if x >= target_size {
                return Err(Error::InvalidMap(format!("image {x} outside target of size {target_size}")));
            }
            if images[..i].contains(&x) {
                return Err(Error::InvalidMap(format!("image {x} repeated; map is not injective")));
            }
        }
        if images.is_empty() {
            return Err(Error::InvalidMap("empty source domain".into()));
        }
        Ok(DomainMap {
            source_size: images.len(),
            target_size,
            images,
        })
    }

    pub fn identity(n: usize) -> Self {
        DomainMap {
            source_size: n,
            target_size: n,
            images: (0..n).collect(),
        }
    }

    /// The inclusion `{0..m-1} ⊆ {0..n-1}`.
    pub fn inclusion(m: usize, n: usize) -> Self {
        assert!(1 <= m && m <= n);
        DomainMap {
            source_size: m,
            target_size: n,
            images: (0..m).collect(),
        }
    }

    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(i, j);
        DomainMap {
            source_size: n,
            target_size: n,
            images,
        }
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn image(&self, a: usize) -> usize {
        self.images[a]
    }

    pub fn is_permutation(&self) -> bool {
        self.source_size == self.target_size
    }

    pub fn is_identity(&self) -> bool {
        self.is_permutation() && self.images.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &DomainMap) -> Result<DomainMap> {
        if inner.target_size != self.source_size {
            return Err(Error::SizeMismatch(format!(
                "cannot compose map into {} with map from {}",
                inner.target_size, self.source_size
            )));
        }
        Ok(DomainMap {
            source_size: inner.source_size,
            target_size: self.target_size,
            images: inner.images.iter().map(|&a| self.images[a]).collect(),
        })
    }

    pub fn inverse(&self) -> Option<DomainMap> {
        if !self.is_permutation() {
            return None;
        }
        let mut inv = vec![0; self.source_size];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x] = i;
        }
        Some(DomainMap {
            source_size: self.source_size,
            target_size: self.target_size,
            images: inv,
        })
    }

    /// Partial inverse over the image, indexed by target element.
    pub(crate) fn preimages(&self) -> Vec<Option<usize>> {
        let mut pre = vec![None; self.target_size];
        for (i, &x) in self.images.iter().enumerate() {
            pre[x] = Some(i);
        }
        pre
    }
}

impl fmt::Display for DomainMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, x) in self.images.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}->{x}")?;
        }
        write!(f, "] into {}", self.target_size)
    }
}

/// All permutations of `{0..n-1}` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// Enumerates all `2^k` worlds in canonical atom-bitmask order.
pub fn enumerate_worlds(sig: &Arc<Signature>, n: usize, budget: Budget) -> Result<Vec<World>> {
    let k = sig.atom_count(n);
    budget.check(format!("enumerating worlds of {sig} at n={n}"), k)?;
    Ok((0..(1u64 << k))
        .map(|m| World::from_bits(sig.clone(), n, Bits::from_u64(k, m)))
        .collect())
}

/// Restriction along an injection: `R(a)` holds in the result iff `R(m(a))` holds in `w`.
pub fn apply_map(w: &World, m: &DomainMap) -> Result<World> {
    if m.target_size != w.n {
        return Err(Error::SizeMismatch(format!(
            "map targets a domain of size {}, world has size {}",
            m.target_size, w.n
        )));
    }
    let src = w.layout();
    let dst = w.sig.layout(m.source_size);
    let pre = m.preimages();
    let mut bits = Bits::zeros(dst.total());
    let mut buf = smallvec::SmallVec::<[usize; 4]>::new();
    'atoms: for i in w.bits.iter_ones() {
        let atom = src.atom(i);
        buf.clear();
        for &a in &atom.args {
            match pre[a] {
                Some(b) => buf.push(b),
                None => continue 'atoms,
            }
        }
        bits.set(dst.index(atom.rel, &buf), true);
    }
    Ok(World {
        sig: w.sig.clone(),
        n: m.source_size,
        bits,
    })
}

/// Reduct to a subsignature: same domain, atoms of the remaining relations only.
pub fn reduct(w: &World, sub: &Arc<Signature>) -> Result<World> {
    if !sub.is_subsignature_of(&w.sig) {
        return Err(Error::NotSubsignature(format!("{sub} is not contained in {}", w.sig)));
    }
    let src = w.layout();
    let dst = sub.layout(w.n);
    let mut bits = Bits::zeros(dst.total());
    for (ri, r) in sub.relations().iter().enumerate() {
        let si = w.sig.index_of(&r.name).unwrap();
        let (so, doff) = (src.offset(si), dst.offset(ri));
        for j in 0..src.block_len(si) {
            if w.bits.get(so + j) {
                bits.set(doff + j, true);
            }
        }
    }
    Ok(World {
        sig: sub.clone(),
        n: w.n,
        bits,
    })
}

/// Returns a permutation `π` with `R(a) ∈ w1 ⇔ R(π(a)) ∈ w2`, i.e. `apply_map(w2, π) == w1`.
/// Brute force over all `n!` permutations.
pub fn isomorphic(w1: &World, w2: &World) -> Option<DomainMap> {
    if w1.sig != w2.sig || w1.n != w2.n || w1.atom_count() != w2.atom_count() {
        return None;
    }
    permutations(w1.n).into_iter().find_map(|p| {
        let m = DomainMap::new(w1.n, p).unwrap();
        (apply_map(w2, &m).ok()? == *w1).then_some(m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(s: &str) -> Arc<Signature> {
        Arc::new(Signature::parse(s).unwrap())
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(enumerate_worlds(&sig("F/1"), 1, Budget::default()).unwrap().len(), 2);
        assert_eq!(enumerate_worlds(&sig("E/2"), 2, Budget::default()).unwrap().len(), 16);
        // 3 + 9 atoms
        assert_eq!(enumerate_worlds(&sig("P/1 E/2"), 3, Budget::default()).unwrap().len(), 4096);
        let ws = enumerate_worlds(&sig("F/1"), 1, Budget::default()).unwrap();
        assert_eq!(ws[0].to_string(), "{}");
        assert_eq!(ws[1].to_string(), "F(0)");
    }

    #[test]
    fn enumerate_budget_names_count() {
        let err = enumerate_worlds(&sig("E/2"), 5, Budget::default()).unwrap_err();
        match err {
            Error::Budget { atoms, .. } => assert_eq!(atoms, 25),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn apply_map_examples() {
        let s = sig("P/1 E/2");
        let w = World::parse("P(0) P(2) E(0,2)", s.clone(), 3).unwrap();
        let m = DomainMap::new(3, vec![0, 2]).unwrap();
        assert_eq!(apply_map(&w, &m).unwrap().to_string(), "P(0) P(1) E(0,1)");
        assert_eq!(apply_map(&w, &DomainMap::identity(3)).unwrap(), w);

        let e = sig("E/2");
        let w = World::parse("E(0,1)", e.clone(), 2).unwrap();
        let swapped = apply_map(&w, &DomainMap::transposition(2, 0, 1)).unwrap();
        assert_eq!(swapped.to_string(), "E(1,0)");
        assert!(apply_map(&w, &DomainMap::identity(3)).is_err());
    }

    #[test]
    fn reduct_examples() {
        let s = sig("P/1 E/2");
        let w = World::parse("P(0) E(0,1)", s.clone(), 2).unwrap();
        assert_eq!(reduct(&w, &sig("P/1")).unwrap().to_string(), "P(0)");
        assert_eq!(reduct(&w, &s).unwrap(), w);
        let empty = reduct(&w, &Arc::new(Signature::empty())).unwrap();
        assert_eq!(empty.domain_size(), 2);
        assert_eq!(empty.to_string(), "{}");
        assert!(reduct(&w, &sig("Q/1")).is_err());
        assert!(reduct(&w, &sig("P/2")).is_err());
    }

    #[test]
    fn isomorphic_examples() {
        let e = sig("E/2");
        let a = World::parse("E(0,1)", e.clone(), 2).unwrap();
        let b = World::parse("E(1,0)", e.clone(), 2).unwrap();
        let c = World::parse("E(0,1) E(1,0)", e.clone(), 2).unwrap();
        let m = isomorphic(&a, &b).unwrap();
        assert_eq!(m.images(), &[1, 0]);
        assert_eq!(apply_map(&b, &m).unwrap(), a);
        assert!(isomorphic(&a, &c).is_none());
        assert!(isomorphic(&a, &a).unwrap().is_identity());
    }

    #[test]
    fn world_parse_errors() {
        let s = sig("P/1 E/2");
        assert!(matches!(World::parse("E(0)", s.clone(), 2), Err(Error::Arity { .. })));
        assert!(matches!(World::parse("Q(0)", s.clone(), 2), Err(Error::UnknownRelation(_))));
        assert!(matches!(World::parse("P(5)", s.clone(), 2), Err(Error::OutOfDomain { .. })));
        assert_eq!(World::parse("{}", s, 2).unwrap().atom_count(), 0);
    }

    #[test]
    fn permutations_are_lexicographic() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
        assert_eq!(permutations(1), vec![vec![0]]);
    }
}
