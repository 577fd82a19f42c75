use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Budget, Result};
use crate::gplp::{induced_marginal, GeneralizedPlp, Strategy};
use crate::measures::{format_rational, Rational};
use crate::relational::{atoms_within, permutations, Bits, GroundAtom, Signature, World};
use crate::rules::{Evaluator, RuleProgram};
use crate::sip::{sip_dist, SipParams};
use crate::synth::gadget::OrdGadget;
use crate::synth::plan::{StagePlan, SynthesisPlan, ThetaPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// Stage by stage on `h` elements, with the gadget's outcomes aggregated into classes.
    Local,
    /// Whole induced marginal at one domain size against the constructed distribution.
    Global(usize),
}

/// Extension probabilities recovered for one θ, indexed by the code of the new atoms
/// (bit `i` set when the `i`-th new atom in canonical order holds).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalRecord {
    pub h: usize,
    pub theta: World,
    pub recovered: Vec<Rational>,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub records: Vec<LocalRecord>,
    /// Probabilities compared.
    pub checked: usize,
    pub failure: Option<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            Some(msg) => writeln!(f, "FAIL {msg}")?,
            None => match self.mode {
                VerifyMode::Local => writeln!(f, "PASS\nlocal verification: {} probabilities recovered exactly", self.checked)?,
                VerifyMode::Global(n) => {
                    writeln!(f, "PASS\nglobal verification at n={n}: {} world probabilities agree", self.checked)?
                }
            },
        }
        for r in &self.records {
            let v: Vec<String> = r.recovered.iter().map(format_rational).collect();
            writeln!(f, "h={} theta=[{}] ({})", r.h, r.theta, v.join(", "))?;
        }
        Ok(())
    }
}

/// Compares the program's marginal on the parameter signature at size `n`, computed with the
/// factored strategy, against the constructed distribution world by world.
pub fn verify_global(plp: &GeneralizedPlp, params: &SipParams, n: usize, budget: Budget) -> Result<VerifyReport> {
    params.ensure_valid()?;
    let got = induced_marginal(plp, n, params.signature(), Strategy::Factored, budget)?;
    let want = sip_dist(params, n, budget)?;
    let mut rep = VerifyReport {
        mode: VerifyMode::Global(n),
        records: Vec::new(),
        checked: 0,
        failure: None,
    };
    for (w, _) in want.iter().chain(got.iter()) {
        let (a, b) = (got.prob(&w), want.prob(&w));
        rep.checked += 1;
        if a != b {
            rep.failure = Some(format!(
                "world [{w}] at n={n}: program gives {}, parameters give {}",
                format_rational(&a),
                format_rational(&b)
            ));
            break;
        }
    }
    Ok(rep)
}

/// Checks that the synthesized program reproduces `params`.
pub fn verify_synthesis(plan: &SynthesisPlan, params: &SipParams, mode: VerifyMode) -> Result<VerifyReport> {
    params.ensure_valid()?;
    let mut rep = VerifyReport {
        mode,
        records: Vec::new(),
        checked: 0,
        failure: None,
    };
    match mode {
        VerifyMode::Global(n) => return verify_global(&plan.plp, params, n, Budget::default()),
        VerifyMode::Local => {
            if !plan.plp.is_tuple_local() {
                rep.failure = Some("synthesized program is not tuple-local".into());
                return Ok(rep);
            }
            let mut local = Local { params, rep: &mut rep };
            local.run(plan)?;
        }
    }
    Ok(rep)
}

struct Local<'a> {
    params: &'a SipParams,
    rep: &'a mut VerifyReport,
}

/// Outcome class of the gadget on one `h`-set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Collision,
    Max(Vec<usize>),
}

fn set_atom(state: &mut [u64], i: usize) {
    state[i / 64] |= 1 << (i % 64);
}

fn get_atom(state: &[u64], i: usize) -> bool {
    state[i / 64] >> (i % 64) & 1 == 1
}

impl Local<'_> {
    fn fail(&mut self, msg: String) -> bool {
        if self.rep.failure.is_none() {
            self.rep.failure = Some(msg);
        }
        false
    }

    fn run(&mut self, plan: &SynthesisPlan) -> Result<()> {
        let target = self.params.signature().clone();
        for st in &plan.stages {
            let ok = match &st.gadget {
                None => self.stage_one(st, &target)?,
                Some(gd) => match self.classes(gd)? {
                    Some(classes) => self.stage(st, &classes, &target)?,
                    None => false,
                },
            };
            if !ok {
                break;
            }
        }
        Ok(())
    }

    fn stage_one(&mut self, st: &StagePlan, target: &Arc<Signature>) -> Result<bool> {
        let prog = st.stage_program(target)?;
        let ev = Evaluator::new(&prog, 1)?;
        let full = prog.full_signature();
        let tp = &st.thetas[0];
        let aux: Vec<usize> = tp
            .disjunction
            .aux_relations
            .iter()
            .map(|n| ev.layout().index(full.index_of(n).expect("declared"), &[0]))
            .collect();
        let atoms = atoms_within(target, &[0], 1);
        let mut got: BTreeMap<Bits, Rational> = BTreeMap::new();
        for code in 0..1u64 << aux.len() {
            let vals: Vec<bool> = (0..aux.len()).map(|i| code >> i & 1 == 1).collect();
            let mut state = vec![0u64; ev.word_count()];
            for (&i, &v) in aux.iter().zip(&vals) {
                if v {
                    set_atom(&mut state, i);
                }
            }
            ev.run(&mut state);
            let mut w = World::empty(target.clone(), 1);
            for a in &atoms {
                let i = level_index(&ev, &prog, target, a);
                w.set(a, get_atom(&state, i));
            }
            *got.entry(w.into_bits()).or_insert_with(Rational::zero) += tp.disjunction.assignment_weight(&vals);
        }
        let one = World::empty(self.params.signature().clone(), 1);
        let want: BTreeMap<Bits, Rational> = self.params.level(0)[one.bits()]
            .iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(b, p)| (b.clone(), p.clone()))
            .collect();
        let recovered = codes(&atoms, &got, target, 1, &Bits::zeros(target.atom_count(1)));
        self.rep.records.push(LocalRecord {
            h: 1,
            theta: one.clone(),
            recovered,
        });
        self.rep.checked += want.len().max(got.len());
        if got != want {
            return Ok(self.fail(format!("stage 1: recovered 1-trace distribution {} differs from {}", show(&got, target, 1), show(&want, target, 1))));
        }
        Ok(true)
    }

    /// Weights of the gadget's outcome classes on `{0..h-1}`, after checking that a
    /// collision is shared by all orderings and otherwise exactly one ordering is maximal.
    fn classes(&mut self, gd: &OrdGadget) -> Result<Option<BTreeMap<Class, Rational>>> {
        let h = gd.arity();
        let prog = gd.selection_program()?;
        let ev = Evaluator::new(&prog, h)?;
        let full = prog.full_signature().clone();
        let perms = permutations(h);
        let m = perms.len();
        let idx = |name: &str, rho: &[usize]| ev.layout().index(full.index_of(name).expect("declared"), rho);
        let unit = Rational::new(BigInt::one(), BigInt::from(gd.k).pow(m as u32));
        let mut out: BTreeMap<Class, Rational> = BTreeMap::new();
        let mut choice = vec![0usize; m];
        loop {
            let mut state = vec![0u64; ev.word_count()];
            for (rho, &j) in perms.iter().zip(&choice) {
                set_atom(&mut state, idx(&gd.ord_relations[j], rho));
            }
            ev.run(&mut state);
            let coll: Vec<bool> = perms.iter().map(|rho| get_atom(&state, idx(&gd.collision, rho))).collect();
            let maxes: Vec<&Vec<usize>> = perms.iter().filter(|rho| get_atom(&state, idx(&gd.max, rho))).collect();
            let class = match (coll.iter().all(|&c| c), coll.iter().any(|&c| c), maxes.as_slice()) {
                (true, _, []) => Class::Collision,
                (false, false, [rho]) => Class::Max(rho.to_vec()),
                _ => {
                    self.fail(format!("gadget h={h}: ord choice {choice:?} gives collision {coll:?} and {} maximal orderings", maxes.len()));
                    return Ok(None);
                }
            };
            *out.entry(class).or_insert_with(Rational::zero) += &unit;
            let mut i = 0;
            while i < m && choice[i] + 1 == gd.k {
                choice[i] = 0;
                i += 1;
            }
            if i == m {
                break;
            }
            choice[i] += 1;
        }
        let each = (Rational::one() - &gd.p_sym) / Rational::from_integer(BigInt::from(m));
        self.rep.checked += out.len();
        let coll = out.get(&Class::Collision).cloned().unwrap_or_else(Rational::zero);
        if coll != gd.p_sym {
            self.fail(format!("gadget h={h}: collision weight {} but p_sym = {}", format_rational(&coll), format_rational(&gd.p_sym)));
            return Ok(None);
        }
        for rho in &perms {
            let w = out.get(&Class::Max(rho.clone())).cloned().unwrap_or_else(Rational::zero);
            if w != each {
                self.fail(format!("gadget h={h}: ordering {rho:?} is maximal with weight {}, expected {}", format_rational(&w), format_rational(&each)));
                return Ok(None);
            }
        }
        Ok(Some(out))
    }

    fn stage(&mut self, st: &StagePlan, classes: &BTreeMap<Class, Rational>, target: &Signature) -> Result<bool> {
        let h = st.h;
        let g = h - 1;
        let gd = st.gadget.as_ref().expect("stage above 1 has a gadget");
        let prog = st.stage_program(target)?;
        let ev = Evaluator::new(&prog, h)?;
        let full = prog.full_signature().clone();
        let scope: Vec<usize> = (0..h).collect();
        let low = atoms_within(target, &scope, g);
        let new: Vec<GroundAtom> = atoms_within(target, &scope, h).into_iter().filter(|a| a.distinct_count() == h).collect();
        let perms = permutations(h);
        let idx = |name: &str, args: &[usize]| ev.layout().index(full.index_of(name).expect("declared"), args);

        for tp in &st.thetas {
            let theta = &tp.theta;
            let mut base = vec![0u64; ev.word_count()];
            for a in low.iter().filter(|a| theta.holds(a)) {
                set_atom(&mut base, level_index(&ev, &prog, target, a));
            }
            let mut got: BTreeMap<Bits, Rational> = BTreeMap::new();
            for (class, cw) in classes {
                let mut pinned = base.clone();
                let elected: Option<(&Vec<usize>, &ThetaPlan)> = match class {
                    Class::Collision => {
                        for rho in &perms {
                            set_atom(&mut pinned, idx(&gd.collision, rho));
                        }
                        None
                    }
                    Class::Max(rho) => {
                        set_atom(&mut pinned, idx(&gd.max, rho));
                        // the θ seen through the elected ordering
                        let view = view_of(theta, rho, target, g);
                        match st.thetas.iter().find(|t| t.theta.bits() == view.bits()) {
                            Some(t) => Some((rho, t)),
                            None => {
                                return Ok(self.fail(format!("h={h}: θ [{theta}] under ordering {rho:?} reads as [{view}], which has no rules")));
                            }
                        }
                    }
                };
                let aux: Vec<usize> = match elected {
                    Some((rho, t)) => t.disjunction.aux_relations.iter().map(|n| idx(n, rho)).collect(),
                    None => Vec::new(),
                };
                // every other aux atom of the stage, to be set all-false and all-true
                let others: Vec<usize> = st
                    .thetas
                    .iter()
                    .flat_map(|t| t.disjunction.aux_relations.iter())
                    .flat_map(|n| perms.iter().map(move |rho| (n, rho)))
                    .map(|(n, rho)| idx(n, rho))
                    .filter(|i| !aux.contains(i))
                    .collect();
                for code in 0..1u64 << aux.len() {
                    let vals: Vec<bool> = (0..aux.len()).map(|i| code >> i & 1 == 1).collect();
                    let mut outcome: Option<Bits> = None;
                    for background in [false, true] {
                        let mut state = pinned.clone();
                        for (&i, &v) in aux.iter().zip(&vals) {
                            if v {
                                set_atom(&mut state, i);
                            }
                        }
                        if background {
                            for &i in &others {
                                set_atom(&mut state, i);
                            }
                        }
                        ev.run(&mut state);
                        let mut w = theta.clone();
                        for a in &new {
                            w.set(a, get_atom(&state, level_index(&ev, &prog, target, a)));
                        }
                        let b = w.into_bits();
                        match &outcome {
                            Some(prev) if *prev != b => {
                                return Ok(self.fail(format!(
                                    "h={h}: θ [{theta}] outcome depends on aux atoms of orderings that were not elected"
                                )));
                            }
                            _ => outcome = Some(b),
                        }
                    }
                    let weight = match elected {
                        Some((_, t)) => cw * t.disjunction.assignment_weight(&vals),
                        None => cw.clone(),
                    };
                    *got.entry(outcome.expect("two runs")).or_insert_with(Rational::zero) += weight;
                }
            }
            let want: BTreeMap<Bits, Rational> = self.params.level(g)[theta.bits()]
                .iter()
                .filter(|(_, p)| !p.is_zero())
                .map(|(nb, p)| {
                    let mut b = theta.bits().clone();
                    b.or_assign(nb);
                    (b, p.clone())
                })
                .collect();
            let recovered = codes(&new, &got, target, h, theta.bits());
            self.rep.records.push(LocalRecord {
                h,
                theta: theta.clone(),
                recovered,
            });
            self.rep.checked += want.len().max(got.len());
            if got != want {
                return Ok(self.fail(format!(
                    "h={h}: θ [{theta}] recovered {} but parameters give {}",
                    show(&got, target, h),
                    show(&want, target, h)
                )));
            }
        }
        Ok(true)
    }
}

/// Index of the `lvl` atom standing for target atom `a`.
fn level_index(ev: &Evaluator, prog: &RuleProgram, target: &Signature, a: &GroundAtom) -> usize {
    let name = format!("lvl{}_{}", a.distinct_count(), target.relation(a.rel).name);
    let rel = prog.full_signature().index_of(&name).expect("level relation declared");
    ev.layout().index(rel, &a.args)
}

/// θ read through ordering `rho`: atom `R(a..)` of the view holds iff `R(rho(a)..)` holds in θ.
fn view_of(theta: &World, rho: &[usize], target: &Signature, g: usize) -> World {
    let scope: Vec<usize> = (0..=g).collect();
    let mut w = World::empty(theta.signature().clone(), g + 1);
    for a in atoms_within(target, &scope, g) {
        let image = GroundAtom::new(a.rel, a.args.iter().map(|&e| rho[e]));
        w.set(&a, theta.holds(&image));
    }
    w
}

fn codes(new: &[GroundAtom], got: &BTreeMap<Bits, Rational>, target: &Signature, n: usize, base: &Bits) -> Vec<Rational> {
    let lay = target.layout(n);
    (0..1usize << new.len())
        .map(|code| {
            let mut b = base.clone();
            for (i, a) in new.iter().enumerate() {
                if code >> i & 1 == 1 {
                    b.set(lay.index_of(a), true);
                }
            }
            got.get(&b).cloned().unwrap_or_else(Rational::zero)
        })
        .collect()
}

fn show(d: &BTreeMap<Bits, Rational>, target: &Signature, n: usize) -> String {
    let sig = Arc::new(target.clone());
    let parts: Vec<String> = d
        .iter()
        .map(|(b, p)| format!("[{}] {}", World::from_bits(sig.clone(), n, b.clone()), format_rational(p)))
        .collect();
    parts.join(", ")
}
