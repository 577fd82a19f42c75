use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{Budget, Error, Result};
use crate::gplp::{gather, reduct_table, GeneralizedPlp};
use crate::measures::{pow, Dist, Rational};
use crate::relational::{distinct_count, Bits, Signature};
use crate::rules::{check_tuple_local, Evaluator};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    /// Factored when the program is tuple-local, otherwise enumerate.
    #[default]
    Auto,
    /// Every free world at size `n`.
    Enumerate,
    /// Level by level over element subsets; requires a tuple-local program.
    Factored,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "enumerate" => Ok(Strategy::Enumerate),
            "factored" => Ok(Strategy::Factored),
            _ => Err(Error::Format(format!("unknown strategy `{s}` (auto, enumerate, factored)"))),
        }
    }
}

type Counts = SmallVec<[u8; 8]>;

/// Probability of a free assignment from per-relation true counts.
struct CountTable {
    tables: Vec<Vec<Rational>>,
}

impl CountTable {
    fn new(weights: &[Rational], lens: &[usize]) -> Self {
        let tables = weights
            .iter()
            .zip(lens)
            .map(|(w, &len)| {
                let q = Rational::one() - w;
                (0..=len).map(|t| pow(w, t) * pow(&q, len - t)).collect()
            })
            .collect();
        CountTable { tables }
    }

    fn prob(&self, counts: &[u8]) -> Rational {
        self.tables
            .iter()
            .zip(counts)
            .fold(Rational::one(), |acc, (t, &c)| acc * &t[c as usize])
    }

    fn finish(&self, acc: HashMap<(Bits, Counts), u64>) -> BTreeMap<Bits, Rational> {
        let mut out: BTreeMap<Bits, Rational> = BTreeMap::new();
        for ((b, counts), c) in acc {
            let p = self.prob(&counts) * Rational::from_integer(c.into());
            *out.entry(b).or_insert_with(Rational::zero) += p;
        }
        out
    }
}

fn merge(mut a: HashMap<(Bits, Counts), u64>, b: HashMap<(Bits, Counts), u64>) -> HashMap<(Bits, Counts), u64> {
    if a.len() < b.len() {
        return merge(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

/// The induced distribution over the program's full signature.
pub fn induced_dist(plp: &GeneralizedPlp, n: usize, strategy: Strategy, budget: Budget) -> Result<Dist> {
    let full = plp.program().full_signature().clone();
    induced_marginal(plp, n, &full, strategy, budget)
}

/// The induced distribution at size `n`, marginalized to `sub` (a subsignature of the
/// program's full signature).
pub fn induced_marginal(
    plp: &GeneralizedPlp,
    n: usize,
    sub: &Arc<Signature>,
    strategy: Strategy,
    budget: Budget,
) -> Result<Dist> {
    if !sub.is_subsignature_of(plp.program().full_signature()) {
        return Err(Error::NotSubsignature(format!(
            "{sub} is not contained in {}",
            plp.program().full_signature()
        )));
    }
    match strategy {
        Strategy::Enumerate => enumerate(plp, n, sub, budget),
        Strategy::Factored => factored(plp, n, sub, budget),
        Strategy::Auto if plp.is_tuple_local() => factored(plp, n, sub, budget),
        Strategy::Auto => enumerate(plp, n, sub, budget),
    }
}

fn enumerate(plp: &GeneralizedPlp, n: usize, sub: &Arc<Signature>, budget: Budget) -> Result<Dist> {
    let program = plp.program();
    let free = program.free_signature();
    let k = free.atom_count(n);
    budget.check(format!("free worlds of the program at n={n}"), k)?;
    let ev = Evaluator::new(program, n)?;
    let proj = reduct_table(program.full_signature(), sub, n)?;
    let lay = free.layout(n);
    let blocks: Vec<u64> = (0..free.len())
        .map(|r| {
            let len = lay.block_len(r);
            let ones = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
            ones << lay.offset(r)
        })
        .collect();
    let lens: Vec<usize> = (0..free.len()).map(|r| lay.block_len(r)).collect();
    let table = CountTable::new(&plp.weights().for_signature(free)?, &lens);
    let acc = (0..1u64 << k)
        .into_par_iter()
        .fold(HashMap::new, |mut acc: HashMap<(Bits, Counts), u64>, idx| {
            let out = ev.eval_bits(&Bits::from_u64(k, idx));
            let key = gather(out.words(), &proj);
            let counts: Counts = blocks.iter().map(|m| (idx & m).count_ones() as u8).collect();
            *acc.entry((key, counts)).or_insert(0) += 1;
            acc
        })
        .reduce(HashMap::new, merge);
    Dist::from_bit_map(sub.clone(), n, table.finish(acc))
}

/// One domain size `s`: rule instances whose head covers all of `{0..s-1}`, the free atoms
/// over exactly `{0..s-1}` that matter, and the visible atoms split by level.
struct LevelPlan {
    ev: Evaluator,
    full_total: usize,
    enum_atoms: Vec<usize>,
    enum_rel: Vec<usize>,
    table: CountTable,
    // (visible index at s, full index at s)
    lower: Vec<(usize, usize)>,
    exact: Vec<(usize, usize)>,
}

impl LevelPlan {
    fn new(plp: &GeneralizedPlp, vis: &Signature, visible_full: &[usize], s: usize, budget: Budget) -> Result<Self> {
        let program = plp.program();
        let full = program.full_signature();
        let ev = Evaluator::with_filter(program, s, |_, rule, binding| {
            let args: SmallVec<[usize; 4]> = rule.head.args.iter().map(|&v| binding[v]).collect();
            distinct_count(&args) == s
        })?;
        let referenced = ev.referenced_atoms();
        let lay = full.layout(s);
        let free_total = program.free_signature().atom_count(s);
        let mut enum_atoms = Vec::new();
        let mut enum_rel = Vec::new();
        for (i, a) in lay.atoms().take(free_total) {
            if a.distinct_count() == s && (referenced.get(i) || visible_full.contains(&a.rel)) {
                enum_atoms.push(i);
                enum_rel.push(a.rel);
            }
        }
        budget.check(format!("free atoms over one {s}-element subset"), enum_atoms.len())?;
        let weights = plp.weights().for_signature(program.free_signature())?;
        let lens: Vec<usize> = (0..weights.len())
            .map(|r| enum_rel.iter().filter(|&&x| x == r).count())
            .collect();
        let table = CountTable::new(&weights, &lens);
        let mut lower = Vec::new();
        let mut exact = Vec::new();
        for (vi, a) in vis.layout(s).atoms() {
            let fi = lay.index(visible_full[a.rel], &a.args);
            if a.distinct_count() == s {
                exact.push((vi, fi));
            } else {
                lower.push((vi, fi));
            }
        }
        Ok(LevelPlan {
            ev,
            full_total: lay.total(),
            enum_atoms,
            enum_rel,
            table,
            lower,
            exact,
        })
    }

    /// Distribution of the exact-level visible atoms given the lower visible atoms (`key`,
    /// in `self.lower` order).
    fn outcomes(&self, key: &Bits) -> Vec<(Bits, Rational)> {
        let mut base = Bits::zeros(self.full_total);
        for (j, &(_, fi)) in self.lower.iter().enumerate() {
            if key.get(j) {
                base.set(fi, true);
            }
        }
        let nrel = self.table.tables.len();
        let mut acc: HashMap<(Bits, Counts), u64> = HashMap::new();
        for a in 0..1u64 << self.enum_atoms.len() {
            let mut state = base.clone();
            let mut counts: Counts = SmallVec::from_elem(0, nrel);
            for (t, &i) in self.enum_atoms.iter().enumerate() {
                if (a >> t) & 1 == 1 {
                    state.set(i, true);
                    counts[self.enum_rel[t]] += 1;
                }
            }
            self.ev.run(state.words_mut());
            let mut out = Bits::zeros(self.exact.len());
            for (j, &(_, fi)) in self.exact.iter().enumerate() {
                if state.get(fi) {
                    out.set(j, true);
                }
            }
            *acc.entry((out, counts)).or_insert(0) += 1;
        }
        self.table.finish(acc).into_iter().collect()
    }
}

/// Relations read from a strictly smaller argument set than the rule head's.
fn cross_level_relations(plp: &GeneralizedPlp) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for r in plp.program().rules() {
        let head: BTreeSet<usize> = r.head.args.iter().copied().collect();
        for (a, _) in r.body_atoms() {
            let vars: BTreeSet<usize> = a.args.iter().copied().collect();
            if vars.len() < head.len() {
                out.insert(a.pred);
            }
        }
    }
    out
}

fn subsets_by_size(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u64..1 << n)
        .map(|m| (0..n).filter(|i| (m >> i) & 1 == 1).collect::<Vec<_>>())
        .filter(|s: &Vec<usize>| s.len() <= max)
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn factored(plp: &GeneralizedPlp, n: usize, sub: &Arc<Signature>, budget: Budget) -> Result<Dist> {
    let program = plp.program();
    let report = check_tuple_local(program, &plp.stages()?)?;
    if !report.passed() {
        return Err(Error::NotTupleLocal(report.to_string()));
    }
    let full = program.full_signature();
    let mut visible = cross_level_relations(plp);
    for r in sub.relations() {
        visible.insert(full.index_of(&r.name).expect("subsignature checked"));
    }
    let visible_full: Vec<usize> = visible.iter().copied().collect();
    let vis = Signature::new(visible_full.iter().map(|&i| {
        let r = full.relation(i);
        (r.name.clone(), r.arity)
    }))?;
    let max_level = full.max_arity().min(n);
    let plans: Vec<LevelPlan> = (1..=max_level)
        .map(|s| LevelPlan::new(plp, &vis, &visible_full, s, budget))
        .collect::<Result<_>>()?;
    let vis_n = vis.layout(n);
    let mut memo: HashMap<(usize, Bits), Vec<(Bits, Rational)>> = HashMap::new();
    let mut states: BTreeMap<Bits, Rational> = BTreeMap::new();
    states.insert(Bits::zeros(vis_n.total()), Rational::one());
    for subset in subsets_by_size(n, max_level) {
        let s = subset.len();
        let plan = &plans[s - 1];
        let small = vis.layout(s);
        let to_n = |vi: usize| {
            let a = small.atom(vi);
            let args: SmallVec<[usize; 4]> = a.args.iter().map(|&x| subset[x]).collect();
            vis_n.index(a.rel, &args)
        };
        let lower_n: Vec<usize> = plan.lower.iter().map(|&(vi, _)| to_n(vi)).collect();
        let exact_n: Vec<usize> = plan.exact.iter().map(|&(vi, _)| to_n(vi)).collect();
        let mut next: BTreeMap<Bits, Rational> = BTreeMap::new();
        for (state, p) in states {
            let mut key = Bits::zeros(lower_n.len());
            for (j, &i) in lower_n.iter().enumerate() {
                if state.get(i) {
                    key.set(j, true);
                }
            }
            let outs = memo.entry((s, key)).or_insert_with_key(|(_, key)| plan.outcomes(key));
            for (o, q) in outs.iter() {
                let mut st = state.clone();
                for j in o.iter_ones() {
                    st.set(exact_n[j], true);
                }
                *next.entry(st).or_insert_with(Rational::zero) += &p * q;
            }
        }
        states = next;
    }
    let proj = reduct_table(&vis, sub, n)?;
    let mut out: BTreeMap<Bits, Rational> = BTreeMap::new();
    for (b, p) in states {
        *out.entry(gather(b.words(), &proj)).or_insert_with(Rational::zero) += p;
    }
    Dist::from_bit_map(sub.clone(), n, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{marginalize_signature, rat};
    use crate::relational::World;

    fn plp(weights: &[(&str, Rational)], program: &str, target: &[&str]) -> GeneralizedPlp {
        let w = crate::measures::WeightFn::strict(weights.iter().map(|(k, v)| (k.to_string(), v.clone()))).unwrap();
        let p = crate::rules::parse_program(program).unwrap();
        let t: Vec<String> = target.iter().map(|s| s.to_string()).collect();
        GeneralizedPlp::new(w, p, &t).unwrap()
    }

    #[test]
    fn copy_rule() {
        let g = plp(&[("f", rat(1, 2))], "#free f/1\n#derived q/1\nq(X) :- f(X).", &["q"]);
        let d = induced_dist(&g, 1, Strategy::Enumerate, Budget::default()).unwrap();
        let full = g.program().full_signature().clone();
        assert_eq!(d.prob(&World::parse("f(0) q(0)", full.clone(), 1).unwrap()), rat(1, 2));
        assert_eq!(d.prob(&World::parse("{}", full, 1).unwrap()), rat(1, 2));
        let m = marginalize_signature(&d, g.target()).unwrap();
        assert_eq!(m.prob(&World::parse("q(0)", g.target().clone(), 1).unwrap()), rat(1, 2));
    }

    #[test]
    fn negation_splits_mass() {
        let g = plp(&[("f", rat(1, 3))], "#free f/1\n#derived q/1 r/1\nq(X) :- f(X).\nr(X) :- not f(X).", &["q", "r"]);
        let d = induced_dist(&g, 1, Strategy::Enumerate, Budget::default()).unwrap();
        assert_eq!(d.dump(), "f(0) q(0) ; 1/3\nr(0) ; 2/3\nTOTAL ; 1\n");
        assert_eq!(induced_dist(&g, 1, Strategy::Factored, Budget::default()).unwrap(), d);
    }

    #[test]
    fn strategies_agree_on_cross_level_reads() {
        let g = plp(
            &[("f", rat(1, 3)), ("e", rat(2, 5))],
            "#free f/1 e/2\n#derived c/1 q/2 s/2\nc(X) :- f(X), not e(X,X).\nq(X,Y) :- e(X,Y), c(Y), X != Y.\ns(X,Y) :- not q(X,Y), not q(Y,X), f(X).",
            &["q", "s"],
        );
        for n in 1..=3 {
            let a = induced_marginal(&g, n, g.target(), Strategy::Enumerate, Budget::default()).unwrap();
            let b = induced_marginal(&g, n, g.target(), Strategy::Factored, Budget::default()).unwrap();
            assert_eq!(a, b, "n={n}");
        }
        let full = g.program().full_signature().clone();
        let a = induced_marginal(&g, 2, &full, Strategy::Enumerate, Budget::default()).unwrap();
        let b = induced_marginal(&g, 2, &full, Strategy::Factored, Budget::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn factored_requires_tuple_locality() {
        let g = plp(&[("e", rat(1, 2))], "#free e/2\n#derived q/1\nq(X) :- e(X,Y).", &["q"]);
        assert!(matches!(
            induced_dist(&g, 2, Strategy::Factored, Budget::default()),
            Err(Error::NotTupleLocal(_))
        ));
        assert!(induced_dist(&g, 2, Strategy::Auto, Budget::default()).is_ok());
    }
}
