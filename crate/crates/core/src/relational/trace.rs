use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Budget, Error, Result};
use crate::relational::signature::{distinct_count, Bits, GroundAtom, Signature};
use crate::relational::world::{apply_map, permutations, DomainMap, World};

/// A partial truth assignment: every ground atom over `scope` with at most `g` distinct
/// arguments is assigned a value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    sig: Arc<Signature>,
    scope: Vec<usize>,
    g: usize,
    assignment: BTreeMap<GroundAtom, bool>,
}

/// All ground atoms with arguments in `scope` and at most `g` distinct arguments, in canonical order.
pub fn atoms_within(sig: &Signature, scope: &[usize], g: usize) -> Vec<GroundAtom> {
    let mut out = Vec::new();
    for (rel, r) in sig.relations().iter().enumerate() {
        let mut args = vec![0usize; r.arity];
        let s = scope.len();
        if s == 0 {
            continue;
        }
        let total = s.pow(r.arity as u32);
        for code in 0..total {
            let mut c = code;
            for slot in args.iter_mut().rev() {
                *slot = scope[c % s];
                c /= s;
            }
            if distinct_count(&args) <= g {
                out.push(GroundAtom::new(rel, args.iter().copied()));
            }
        }
    }
    out.sort();
    out
}

/// Bitmask of the atoms over `scope` (within a domain of size `n`) with at most `g` distinct arguments.
pub fn trace_mask(sig: &Signature, n: usize, scope: &[usize], g: usize) -> Bits {
    let lay = sig.layout(n);
    let mut mask = Bits::zeros(lay.total());
    for a in atoms_within(sig, scope, g) {
        mask.set(lay.index_of(&a), true);
    }
    mask
}

/// Bitmask of the atoms over `{0..n-1}` whose distinct-argument count is exactly `d`.
pub fn exact_level_mask(sig: &Signature, n: usize, d: usize) -> Bits {
    let lay = sig.layout(n);
    let mut mask = Bits::zeros(lay.total());
    for (i, a) in lay.atoms() {
        if a.distinct_count() == d {
            mask.set(i, true);
        }
    }
    mask
}

impl Trace {
    pub fn new(sig: Arc<Signature>, scope: Vec<usize>, g: usize, assignment: BTreeMap<GroundAtom, bool>) -> Result<Self> {
        if g == 0 {
            return Err(Error::Trace("g must be positive".into()));
        }
        let mut sorted = scope.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != scope {
            return Err(Error::Trace("scope must be strictly ascending".into()));
        }
        let expected = atoms_within(&sig, &scope, g);
        if expected.len() != assignment.len() || expected.iter().any(|a| !assignment.contains_key(a)) {
            return Err(Error::Trace(format!(
                "assignment must cover exactly the {} atoms over the scope with at most {g} distinct arguments",
                expected.len()
            )));
        }
        Ok(Trace {
            sig,
            scope,
            g,
            assignment,
        })
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn assignment(&self) -> &BTreeMap<GroundAtom, bool> {
        &self.assignment
    }

    pub fn value(&self, atom: &GroundAtom) -> Option<bool> {
        self.assignment.get(atom).copied()
    }

    /// The g'-trace (g' ≤ g) contained in this one.
    pub fn coarsen(&self, g: usize) -> Result<Trace> {
        if g == 0 || g > self.g {
            return Err(Error::Trace(format!("cannot coarsen a {}-trace to {g}", self.g)));
        }
        let assignment = self
            .assignment
            .iter()
            .filter(|(a, _)| a.distinct_count() <= g)
            .map(|(a, &v)| (a.clone(), v))
            .collect();
        Ok(Trace {
            sig: self.sig.clone(),
            scope: self.scope.clone(),
            g,
            assignment,
        })
    }

    /// The world on `{0..n-1}` this trace pins down, when it covers every atom of that domain.
    pub fn determined_world(&self, n: usize) -> Option<World> {
        if self.scope.len() != n || self.scope.iter().enumerate().any(|(i, &x)| i != x) {
            return None;
        }
        if self.g < self.sig.max_arity().min(n) {
            return None;
        }
        World::from_atoms(
            self.sig.clone(),
            n,
            self.assignment.iter().filter(|(_, &v)| v).map(|(a, _)| a.clone()),
        )
        .ok()
    }

    /// (mask, value) bit pattern of this trace inside a domain of size `n`.
    pub(crate) fn pattern(&self, n: usize) -> Result<(Bits, Bits)> {
        if let Some(&e) = self.scope.iter().find(|&&e| e >= n) {
            return Err(Error::OutOfDomain { element: e, n });
        }
        let lay = self.sig.layout(n);
        let mut mask = Bits::zeros(lay.total());
        let mut value = Bits::zeros(lay.total());
        for (a, &v) in &self.assignment {
            let i = lay.index_of(a);
            mask.set(i, true);
            value.set(i, v);
        }
        Ok((mask, value))
    }

    /// True iff the world agrees with every assignment of this trace.
    pub fn satisfied_by(&self, w: &World) -> bool {
        w.signature() == &self.sig
            && self
                .assignment
                .iter()
                .all(|(a, &v)| a.args.iter().all(|&e| e < w.domain_size()) && w.holds(a) == v)
    }

    pub fn display(&self) -> String {
        let parts: Vec<String> = self
            .assignment
            .iter()
            .map(|(a, &v)| format!("{}{}", if v { "" } else { "~" }, a.display(&self.sig)))
            .collect();
        parts.join(" ")
    }
}

/// The g-trace of `w` over its whole domain.
pub fn g_trace(w: &World, g: usize) -> Result<Trace> {
    let scope: Vec<usize> = (0..w.domain_size()).collect();
    trace_on(w, &scope, g)
}

/// The g-trace of `w` restricted to the ascending `scope`.
pub fn trace_on(w: &World, scope: &[usize], g: usize) -> Result<Trace> {
    let assignment = atoms_within(w.signature(), scope, g)
        .into_iter()
        .map(|a| {
            let v = w.holds(&a);
            (a, v)
        })
        .collect();
    Trace::new(w.signature().clone(), scope.to_vec(), g, assignment)
}

/// All worlds on `{0..n-1}` consistent with the trace, in canonical order.
pub fn trace_models(t: &Trace, n: usize, budget: Budget) -> Result<Vec<World>> {
    let (mask, value) = t.pattern(n)?;
    let k = t.sig.atom_count(n);
    budget.check(format!("models of a trace at n={n}"), k)?;
    let (m, v) = (mask.as_u64().unwrap(), value.as_u64().unwrap());
    Ok((0..(1u64 << k))
        .filter(|w| w & m == v)
        .map(|w| World::from_bits(t.sig.clone(), n, Bits::from_u64(k, w)))
        .collect())
}

/// Relabels a trace so that `order[i]` becomes `i`. `order` must enumerate the scope.
pub fn canonicalize_trace(t: &Trace, order: &[usize]) -> Result<Trace> {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != t.scope {
        return Err(Error::Trace("order is not a permutation of the trace scope".into()));
    }
    let relabel = |e: usize| order.iter().position(|&x| x == e).unwrap();
    let assignment = t
        .assignment
        .iter()
        .map(|(a, &v)| (GroundAtom::new(a.rel, a.args.iter().map(|&e| relabel(e))), v))
        .collect();
    Ok(Trace {
        sig: t.sig.clone(),
        scope: (0..order.len()).collect(),
        g: t.g,
        assignment,
    })
}

fn permute_atom(a: &GroundAtom, perm: &[usize]) -> GroundAtom {
    GroundAtom::new(a.rel, a.args.iter().map(|&e| perm[e]))
}

fn fixed_by(t: &Trace, perm: &[usize]) -> bool {
    t.assignment
        .iter()
        .all(|(a, &v)| t.assignment.get(&permute_atom(a, perm)) == Some(&v))
}

/// True iff every permutation of `{0..g}` that fixes `theta` also fixes `gamma`.
pub fn symmetric_extension(theta: &Trace, gamma: &Trace) -> Result<bool> {
    let g = theta.g;
    let canonical: Vec<usize> = (0..=g).collect();
    if theta.scope != canonical || gamma.scope != canonical {
        return Err(Error::Trace(format!("traces must be canonical over {{0..{g}}}")));
    }
    if gamma.g != g + 1 {
        return Err(Error::Trace(format!("gamma must be a {}-trace", g + 1)));
    }
    if theta.assignment.iter().any(|(a, v)| gamma.assignment.get(a) != Some(v)) {
        return Err(Error::Trace("gamma does not extend theta".into()));
    }
    Ok(permutations(g + 1)
        .iter()
        .filter(|p| fixed_by(theta, p))
        .all(|p| fixed_by(gamma, p)))
}

/// World-level form of [`symmetric_extension`]: `theta` and `gamma` are worlds on `{0..g}`,
/// `theta` carrying only atoms with at most `g` distinct arguments and `gamma ⊇ theta`.
pub fn is_symmetric_extension_world(theta: &World, gamma: &World) -> bool {
    let n = theta.domain_size();
    permutations(n).into_iter().all(|p| {
        let m = DomainMap::new(n, p).unwrap();
        apply_map(theta, &m).unwrap() != *theta || apply_map(gamma, &m).unwrap() == *gamma
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(s: &str) -> Arc<Signature> {
        Arc::new(Signature::parse(s).unwrap())
    }

    fn canonical_trace(s: &Arc<Signature>, n: usize, g: usize, text: &str) -> Trace {
        let w = World::parse(text, s.clone(), n).unwrap();
        g_trace(&w, g).unwrap()
    }

    #[test]
    fn one_trace_of_binary_records_loops_only() {
        let e = sig("E/2");
        let w = World::parse("E(0,1) E(0,0)", e.clone(), 3).unwrap();
        let t = g_trace(&w, 1).unwrap();
        assert_eq!(t.assignment().len(), 3);
        assert_eq!(t.value(&GroundAtom::new(0, [0, 0])), Some(true));
        assert_eq!(t.value(&GroundAtom::new(0, [1, 1])), Some(false));
        assert_eq!(t.value(&GroundAtom::new(0, [2, 2])), Some(false));
        assert_eq!(t.value(&GroundAtom::new(0, [0, 1])), None);

        let v = World::parse("E(0,0)", e, 3).unwrap();
        assert_eq!(g_trace(&v, 1).unwrap(), t);
    }

    #[test]
    fn full_trace_determines_world() {
        let s = sig("P/1 E/2");
        let w = World::parse("P(1) E(0,1) E(1,1)", s, 2).unwrap();
        let t = g_trace(&w, 2).unwrap();
        assert_eq!(t.determined_world(2).unwrap(), w);
        assert_eq!(trace_models(&t, 2, Budget::default()).unwrap(), vec![w]);
    }

    #[test]
    fn trace_models_counts() {
        let e = sig("E/2");
        let empty = Trace::new(e.clone(), vec![], 1, BTreeMap::new()).unwrap();
        assert_eq!(trace_models(&empty, 2, Budget::default()).unwrap().len(), 16);
        // "no loops": the two off-diagonal atoms are free
        let t = canonical_trace(&e, 2, 1, "{}");
        assert_eq!(trace_models(&t, 2, Budget::default()).unwrap().len(), 4);
    }

    #[test]
    fn canonicalize_relabels_and_inverts() {
        let s = sig("P/1 E/2");
        let w = World::parse("P(2) E(2,5) E(5,5)", s.clone(), 6).unwrap();
        let t = trace_on(&w, &[2, 5], 2).unwrap();
        let c = canonicalize_trace(&t, &[2, 5]).unwrap();
        assert_eq!(c.scope(), &[0, 1]);
        assert_eq!(c.value(&GroundAtom::new(0, [0])), Some(true));
        assert_eq!(c.value(&GroundAtom::new(1, [0, 1])), Some(true));
        assert_eq!(c.value(&GroundAtom::new(1, [1, 1])), Some(true));
        assert_eq!(canonicalize_trace(&c, &[0, 1]).unwrap(), c);
        let swapped = canonicalize_trace(&c, &[1, 0]).unwrap();
        assert_eq!(canonicalize_trace(&swapped, &[1, 0]).unwrap(), c);
        assert!(canonicalize_trace(&t, &[2, 3]).is_err());
    }

    #[test]
    fn symmetric_extension_examples() {
        let s = sig("P/1 E/2");
        let theta = canonical_trace(&s, 2, 1, "{}");
        let both = canonical_trace(&s, 2, 2, "E(0,1) E(1,0)");
        let single = canonical_trace(&s, 2, 2, "E(0,1)");
        assert!(symmetric_extension(&theta, &both).unwrap());
        assert!(!symmetric_extension(&theta, &single).unwrap());

        let distinguishing = canonical_trace(&s, 2, 1, "P(0)");
        let ext = canonical_trace(&s, 2, 2, "P(0) E(0,1)");
        assert!(symmetric_extension(&distinguishing, &ext).unwrap());
        assert!(symmetric_extension(&theta, &ext).is_err());
    }

    #[test]
    fn world_level_symmetry_agrees() {
        let s = sig("P/1 E/2");
        let theta = World::parse("{}", s.clone(), 2).unwrap();
        let both = World::parse("E(0,1) E(1,0)", s.clone(), 2).unwrap();
        let single = World::parse("E(0,1)", s.clone(), 2).unwrap();
        assert!(is_symmetric_extension_world(&theta, &both));
        assert!(!is_symmetric_extension_world(&theta, &single));
    }
}
