use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::relational::{Bits, Layout, World};
use crate::rules::ast::{Literal, Rule, RuleProgram};
use crate::rules::stratify::{evaluation_order, stratify};

/// One ground rule instance: the rule index, the variable binding and the head atom index
/// in the full signature's layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundInstance {
    pub rule: usize,
    pub binding: SmallVec<[usize; 4]>,
    pub head: usize,
}

type Masks = SmallVec<[(u32, u64); 2]>;

#[derive(Clone, Debug)]
struct Compiled {
    head_word: u32,
    head_mask: u64,
    pos: Masks,
    neg: Masks,
    id: u32,
}

impl Compiled {
    #[inline]
    fn body_holds(&self, state: &[u64]) -> bool {
        self.pos.iter().all(|&(w, m)| state[w as usize] & m == m)
            && self.neg.iter().all(|&(w, m)| state[w as usize] & m == 0)
    }
}

#[derive(Clone, Debug)]
struct Group {
    recursive: bool,
    instances: Vec<Compiled>,
}

fn add_mask(masks: &mut Masks, idx: usize) {
    let (w, m) = ((idx / 64) as u32, 1u64 << (idx % 64));
    match masks.iter_mut().find(|(x, _)| *x == w) {
        Some((_, mm)) => *mm |= m,
        None => masks.push((w, m)),
    }
}

/// A program ground over `{0..n-1}` once, then evaluated on many inputs.
///
/// Instances are grouped by strongly connected component of the dependency graph in
/// topological order; non-recursive components need a single pass.
#[derive(Clone, Debug)]
pub struct Evaluator {
    n: usize,
    layout: Layout,
    free_atoms: usize,
    words: usize,
    groups: Vec<Group>,
    meta: Vec<GroundInstance>,
}

impl Evaluator {
    pub fn new(p: &RuleProgram, n: usize) -> Result<Self> {
        Self::with_filter(p, n, |_, _, _| true)
    }

    /// Grounds only the instances for which `keep(rule_index, rule, binding)` holds.
    pub fn with_filter(
        p: &RuleProgram,
        n: usize,
        keep: impl Fn(usize, &Rule, &[usize]) -> bool,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::SizeMismatch("domain size must be at least 1".into()));
        }
        stratify(p)?;
        let full = p.full_signature();
        let layout = full.layout(n);
        let nfree = p.free_signature().len();
        let order = evaluation_order(p);
        let mut group_of = vec![0usize; p.derived_signature().len()];
        for (gi, (members, _)) in order.iter().enumerate() {
            for &m in members {
                group_of[m] = gi;
            }
        }
        let mut groups: Vec<Group> = order
            .iter()
            .map(|(_, recursive)| Group {
                recursive: *recursive,
                instances: Vec::new(),
            })
            .collect();
        let mut meta = Vec::new();
        let mut args: SmallVec<[usize; 4]> = SmallVec::new();
        for (ri, rule) in p.rules().iter().enumerate() {
            let v = rule.var_count();
            let count = n
                .checked_pow(v as u32)
                .ok_or_else(|| Error::Program(format!("grounding rule {ri} overflows")))?;
            let mut binding: SmallVec<[usize; 4]> = SmallVec::from_elem(0, v);
            'bindings: for code in 0..count {
                let mut c = code;
                for slot in binding.iter_mut().rev() {
                    *slot = c % n;
                    c /= n;
                }
                let mut pos = Masks::new();
                let mut neg = Masks::new();
                for lit in &rule.body {
                    match lit {
                        Literal::Neq(x, y) => {
                            if binding[*x] == binding[*y] {
                                continue 'bindings;
                            }
                        }
                        Literal::Pos(a) | Literal::Neg(a) => {
                            args.clear();
                            args.extend(a.args.iter().map(|&x| binding[x]));
                            let idx = layout.index(a.pred, &args);
                            add_mask(if matches!(lit, Literal::Pos(_)) { &mut pos } else { &mut neg }, idx);
                        }
                    }
                }
                if !keep(ri, rule, &binding) {
                    continue;
                }
                // a literal required both true and false can never fire
                if pos.iter().any(|(w, m)| neg.iter().any(|(w2, m2)| w == w2 && m & m2 != 0)) {
                    continue;
                }
                args.clear();
                args.extend(rule.head.args.iter().map(|&x| binding[x]));
                let head = layout.index(rule.head.pred, &args);
                let id = meta.len() as u32;
                meta.push(GroundInstance {
                    rule: ri,
                    binding: binding.clone(),
                    head,
                });
                groups[group_of[rule.head.pred - nfree]].instances.push(Compiled {
                    head_word: (head / 64) as u32,
                    head_mask: 1u64 << (head % 64),
                    pos,
                    neg,
                    id,
                });
            }
        }
        groups.retain(|g| !g.instances.is_empty());
        let free_atoms = p.free_signature().atom_count(n);
        let words = layout.total().div_ceil(64).max(1);
        Ok(Evaluator {
            n,
            layout,
            free_atoms,
            words,
            groups,
            meta,
        })
    }

    pub fn domain_size(&self) -> usize {
        self.n
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn free_atom_count(&self) -> usize {
        self.free_atoms
    }

    pub fn word_count(&self) -> usize {
        self.words
    }

    pub fn instance_count(&self) -> usize {
        self.meta.len()
    }

    /// Fixpoint from `state` (full-signature words). Atoms already true stay true, so
    /// atoms of relations with no grounded instances act as pinned inputs.
    pub fn run(&self, state: &mut [u64]) {
        for g in &self.groups {
            loop {
                let mut changed = false;
                for inst in &g.instances {
                    let hw = inst.head_word as usize;
                    if state[hw] & inst.head_mask != 0 {
                        continue;
                    }
                    if inst.body_holds(state) {
                        state[hw] |= inst.head_mask;
                        changed = true;
                    }
                }
                if !g.recursive || !changed {
                    break;
                }
            }
        }
    }

    /// Full-signature output for a free-signature input bitmask.
    pub fn eval_bits(&self, free: &Bits) -> Bits {
        let mut out = free.clone();
        out.resize(self.layout.total());
        self.run(out.words_mut());
        out
    }

    /// Atoms read by some grounded instance body.
    pub fn referenced_atoms(&self) -> Bits {
        let mut b = Bits::zeros(self.layout.total());
        let words = b.words_mut();
        for inst in self.groups.iter().flat_map(|g| g.instances.iter()) {
            for &(w, m) in inst.pos.iter().chain(inst.neg.iter()) {
                words[w as usize] |= m;
            }
        }
        b
    }

    /// Instances whose body holds in `state`.
    pub fn fired<'a>(&'a self, state: &'a [u64]) -> impl Iterator<Item = &'a GroundInstance> + 'a {
        self.groups
            .iter()
            .flat_map(|g| g.instances.iter())
            .filter(move |i| i.body_holds(state))
            .map(move |i| &self.meta[i.id as usize])
    }
}

/// The perfect model of `p` on `input`, a world over exactly the free signature.
pub fn apply_program(p: &RuleProgram, input: &World) -> Result<World> {
    if input.signature().as_ref() != p.free_signature().as_ref() {
        return Err(Error::NotSubsignature(format!(
            "input world is over {}, program expects {}",
            input.signature(),
            p.free_signature()
        )));
    }
    let ev = Evaluator::new(p, input.domain_size())?;
    Ok(World::from_bits(
        p.full_signature().clone(),
        input.domain_size(),
        ev.eval_bits(input.bits()),
    ))
}
