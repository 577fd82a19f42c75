use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gplp::GeneralizedPlp;
use crate::measures::{format_rational, Rational, WeightFn};
use crate::relational::{atoms_within, is_symmetric_extension_world, Bits, GroundAtom, Signature, World};
use crate::rules::{compute_stages, parse_program, RuleProgram};
use crate::sip::{permutation_tables, permute, shape, AsymmetryWitness, SipParams};
use crate::synth::ad::{rule, AnnotatedDisjunction};
use crate::synth::gadget::{build_ord_gadget, distinct, vars, OrdGadget};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricChoice {
    pub g: usize,
    pub theta: World,
    /// The chosen symmetric extension, a full world on `{0..g}`.
    pub gamma: World,
    pub prob: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricReps {
    pub choices: Vec<SymmetricChoice>,
    /// Least chosen probability over levels `g ≥ 1`; `None` for unary signatures.
    pub p_min: Option<Rational>,
}

impl SymmetricReps {
    pub(crate) fn get(&self, g: usize, theta: &Bits) -> Option<&SymmetricChoice> {
        self.choices.iter().find(|c| c.g == g && c.theta.bits() == theta)
    }
}

/// Per orbit of positive-probability θ, the most probable symmetric positive extension (ties
/// to the least key), transported to the rest of the orbit.
pub fn choose_symmetric_reps(p: &SipParams) -> Result<SymmetricReps> {
    p.ensure_valid()?;
    let sig = p.signature();
    let mut choices = Vec::new();
    let mut p_min: Option<Rational> = None;
    for g in 1..p.max_arity() {
        let reach = p.theta_dist(g)?;
        let tables = permutation_tables(sig, g);
        let mut done: BTreeMap<Bits, (Bits, Rational)> = BTreeMap::new();
        for t in reach.keys() {
            if done.contains_key(t) {
                continue;
            }
            let theta = World::from_bits(sig.clone(), g + 1, t.clone());
            let positive: Vec<(Bits, World, Rational)> = p
                .level(g)
                .get(t)
                .into_iter()
                .flatten()
                .filter(|(_, q)| !q.is_zero())
                .map(|(new, q)| {
                    let mut b = t.clone();
                    b.or_assign(new);
                    (new.clone(), World::from_bits(sig.clone(), g + 1, b), q.clone())
                })
                .collect();
            let best = positive
                .iter()
                .filter(|(_, w, _)| is_symmetric_extension_world(&theta, w))
                .fold(None::<&(Bits, World, Rational)>, |acc, c| match acc {
                    Some(a) if a.2 >= c.2 => Some(a),
                    _ => Some(c),
                });
            let Some((new, _, q)) = best else {
                return Err(Error::NotRepresentable(Box::new(AsymmetryWitness {
                    g,
                    theta,
                    evidence: positive.into_iter().map(|(_, w, q)| (w, q)).collect(),
                })));
            };
            if p_min.as_ref().is_none_or(|m| q < m) {
                p_min = Some(q.clone());
            }
            for table in &tables {
                let image = permute(t, table);
                if reach.contains_key(&image) {
                    done.entry(image).or_insert_with(|| (permute(new, table), q.clone()));
                }
            }
        }
        for (t, (new, q)) in done {
            let mut b = t.clone();
            b.or_assign(&new);
            choices.push(SymmetricChoice {
                g,
                theta: World::from_bits(sig.clone(), g + 1, t),
                gamma: World::from_bits(sig.clone(), g + 1, b),
                prob: q,
            });
        }
    }
    Ok(SymmetricReps { choices, p_min })
}

/// Rules of one θ: the fallback copy of its representative and the main disjunction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaPlan {
    pub theta: World,
    pub index: usize,
    pub representative: Option<World>,
    /// Alternatives of the main disjunction with their probabilities `q`.
    pub alternatives: Vec<(World, Rational)>,
    pub disjunction: AnnotatedDisjunction,
}

/// Everything emitted for the atoms with exactly `h` distinct arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagePlan {
    pub h: usize,
    pub gadget: Option<OrdGadget>,
    pub thetas: Vec<ThetaPlan>,
    /// Rules deriving the `lvl{h}_R` relations.
    pub rules: Vec<String>,
}

impl StagePlan {
    fn aux(&self) -> impl Iterator<Item = (&String, &Rational)> {
        self.thetas
            .iter()
            .flat_map(|t| t.disjunction.aux_relations.iter().zip(&t.disjunction.aux_weights))
    }

    /// The `lvl{h}` rules alone. Free inputs: this stage's θ aux relations, the lower
    /// `lvl` relations and, from stage 2 on, the gadget's collision and max relations.
    pub fn stage_program(&self, target: &Signature) -> Result<RuleProgram> {
        let h = self.h;
        let mut free: Vec<String> = self.aux().map(|(n, _)| format!("{n}/{h}")).collect();
        for d in 1..h {
            free.extend(level_relations(target, d).into_iter().map(|(n, a)| format!("{n}/{a}")));
        }
        if let Some(gd) = &self.gadget {
            free.push(format!("{}/{h}", gd.collision));
            free.push(format!("{}/{h}", gd.max));
        }
        let derived: Vec<String> = level_relations(target, h).into_iter().map(|(n, a)| format!("{n}/{a}")).collect();
        parse_program(&format!(
            "#free {}\n#derived {}\n{}\n",
            free.join(" "),
            derived.join(" "),
            self.rules.join("\n")
        ))
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisPlan {
    pub params: SipParams,
    pub p_min: Option<Rational>,
    pub stages: Vec<StagePlan>,
    pub plp: GeneralizedPlp,
}

/// `lvl{h}_R` for each target relation with arity at least `h`.
pub(crate) fn level_relations(target: &Signature, h: usize) -> Vec<(String, usize)> {
    target
        .relations()
        .iter()
        .filter(|r| r.arity >= h)
        .map(|r| (format!("lvl{h}_{}", r.name), r.arity))
        .collect()
}

/// `lvl{d}_R(X..)` for a target atom over `{0..}` with `d` distinct arguments.
pub(crate) fn level_atom(target: &Signature, a: &GroundAtom) -> String {
    let args: Vec<String> = a.args.iter().map(|e| format!("X{e}")).collect();
    format!("lvl{}_{}({})", a.distinct_count(), target.relation(a.rel).name, args.join(","))
}

fn trace_body(target: &Signature, theta: &World, g: usize) -> Vec<String> {
    let scope: Vec<usize> = (0..=g).collect();
    atoms_within(target, &scope, g)
        .iter()
        .map(|a| {
            let s = level_atom(target, a);
            if theta.holds(a) {
                s
            } else {
                format!("not {s}")
            }
        })
        .collect()
}

fn new_atoms(gamma: &World, new_mask: &Bits) -> Vec<String> {
    let lay = gamma.layout();
    gamma
        .bits()
        .and(new_mask)
        .iter_ones()
        .map(|i| level_atom(gamma.signature(), &lay.atom(i)))
        .collect()
}

/// Orders alternatives by decreasing probability, ties by key.
fn by_weight(mut v: Vec<(Bits, Rational)>) -> Vec<(Bits, Rational)> {
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Compiles parameters into a generalised PLP whose reduct to the parameter signature is
/// the constructed family.
///
/// Stage 1 draws each element's 1-trace from one disjunction. Stage `h ≥ 2` elects an
/// ordering of each `h`-set with the Ord gadget; under a collision every ordering asserts
/// the θ's symmetric representative, otherwise the elected ordering draws from
/// `q_1 = (p_rep − p_sym)/(1 − p_sym)` for the representative and `q_i = p_i/(1 − p_sym)`
/// for the rest.
pub fn synthesize(p: &SipParams) -> Result<SynthesisPlan> {
    let reps = choose_symmetric_reps(p)?;
    let target = p.signature().clone();
    let r = p.max_arity();
    let mut stages = Vec::new();

    // stage 1
    let sh0 = shape(&target, 0);
    let one = World::empty(target.clone(), 1);
    let alts = by_weight(
        p.level(0)
            .get(one.bits())
            .into_iter()
            .flatten()
            .map(|(b, q)| (b.clone(), q.clone()))
            .collect(),
    );
    let worlds: Vec<World> = alts.iter().map(|(b, _)| World::from_bits(target.clone(), 1, b.clone())).collect();
    let probs: Vec<Rational> = alts.iter().map(|(_, q)| q.clone()).collect();
    let heads: Vec<Vec<String>> = worlds.iter().map(|w| new_atoms(w, &sh0.new)).collect();
    let disjunction = AnnotatedDisjunction::new(&probs, "a1_r")?;
    let rules = disjunction.emit(&heads, &[], "X0");
    stages.push(StagePlan {
        h: 1,
        gadget: None,
        thetas: vec![ThetaPlan {
            theta: one,
            index: 0,
            representative: None,
            alternatives: worlds.into_iter().zip(probs).collect(),
            disjunction,
        }],
        rules,
    });

    for g in 1..r {
        let h = g + 1;
        let p_min = reps.p_min.clone().expect("levels above 0 have representatives");
        let gadget = build_ord_gadget(g, &p_min)?;
        let sh = shape(&target, g);
        let args = vars(h).join(",");
        let collision = format!("{}({args})", gadget.collision);
        let max = format!("{}({args})", gadget.max);
        let ps = &gadget.p_sym;
        let rest = Rational::one() - ps;
        let mut thetas = Vec::new();
        let mut rules = Vec::new();
        for (index, t) in p.theta_dist(g)?.keys().enumerate() {
            let theta = World::from_bits(target.clone(), h, t.clone());
            let rep = reps.get(g, t).expect("every positive θ has a representative");
            let rep_new = rep.gamma.bits().and(&sh.new);
            let body = trace_body(&target, &theta, g);
            let rep_atoms = new_atoms(&rep.gamma, &sh.new);
            for a in &rep_atoms {
                let mut b = body.clone();
                b.push(collision.clone());
                rules.push(rule(a, &b));
            }
            let others = by_weight(
                p.level(g)[t]
                    .iter()
                    .filter(|(new, q)| **new != rep_new && !q.is_zero())
                    .map(|(new, q)| (new.clone(), q / &rest))
                    .collect(),
            );
            let mut alts = vec![(rep_new, (&rep.prob - ps) / &rest)];
            alts.extend(others);
            let worlds: Vec<World> = alts
                .iter()
                .map(|(new, _)| {
                    let mut b = t.clone();
                    b.or_assign(new);
                    World::from_bits(target.clone(), h, b)
                })
                .collect();
            let probs: Vec<Rational> = alts.into_iter().map(|(_, q)| q).collect();
            let heads: Vec<Vec<String>> = worlds.iter().map(|w| new_atoms(w, &sh.new)).collect();
            let disjunction = AnnotatedDisjunction::new(&probs, &format!("t{h}_{index}_r"))?;
            let mut guard = body.clone();
            guard.extend(distinct(h));
            guard.push(max.clone());
            rules.extend(disjunction.emit(&heads, &guard, &args));
            thetas.push(ThetaPlan {
                theta,
                index,
                representative: Some(rep.gamma.clone()),
                alternatives: worlds.into_iter().zip(probs).collect(),
                disjunction,
            });
        }
        stages.push(StagePlan {
            h,
            gadget: Some(gadget),
            thetas,
            rules,
        });
    }

    let plp = assemble(&target, &stages)?;
    Ok(SynthesisPlan {
        params: p.clone(),
        p_min: reps.p_min,
        stages,
        plp,
    })
}

fn assemble(target: &Signature, stages: &[StagePlan]) -> Result<GeneralizedPlp> {
    let mut free: Vec<(String, usize)> = Vec::new();
    let mut weights: Vec<(String, Rational)> = Vec::new();
    let mut derived: Vec<(String, usize)> = Vec::new();
    let mut rules: Vec<String> = Vec::new();
    for st in stages {
        let h = st.h;
        if let Some(gd) = &st.gadget {
            for (n, w) in gd.disjunction.aux_relations.iter().zip(&gd.disjunction.aux_weights) {
                free.push((n.clone(), h));
                weights.push((n.clone(), w.clone()));
            }
            derived.extend(gd.ord_relations.iter().map(|o| (o.clone(), h)));
            for n in [&gd.coincide, &gd.collision, &gd.beaten, &gd.max] {
                derived.push((n.clone(), h));
            }
            rules.extend(gd.ord_rules.iter().cloned());
            rules.extend(gd.selection_rules.iter().cloned());
        }
        for (n, w) in st.aux() {
            free.push((n.clone(), h));
            weights.push((n.clone(), w.clone()));
        }
        derived.extend(level_relations(target, h));
        rules.extend(st.rules.iter().cloned());
    }
    for rel in target.relations() {
        derived.push((rel.name.clone(), rel.arity));
        let args = vars(rel.arity).join(",");
        for h in 1..=rel.arity {
            rules.push(format!("{}({args}) :- lvl{h}_{}({args}).", rel.name, rel.name));
        }
    }
    if let Some((n, _)) = free
        .iter()
        .chain(derived.iter().take(derived.len() - target.len()))
        .find(|(n, _)| target.index_of(n).is_some())
    {
        return Err(Error::Program(format!("target relation `{n}` clashes with a generated name")));
    }
    let decl = |v: &[(String, usize)]| v.iter().map(|(n, a)| format!(" {n}/{a}")).collect::<String>();
    let text = format!("#free{}\n#derived{}\n{}\n", decl(&free), decl(&derived), rules.join("\n"));
    let program = parse_program(&text)?;
    let stages = compute_stages(&program)?;
    let program = program.with_stages(stages)?;
    let w = WeightFn::strict(weights)?;
    let names: Vec<String> = target.relations().iter().map(|r| r.name.clone()).collect();
    GeneralizedPlp::new(w, program, &names)
}

impl SynthesisPlan {
    /// The gadget of stage `h`, if any.
    pub fn gadget(&self, h: usize) -> Option<&OrdGadget> {
        self.stages.iter().find(|s| s.h == h).and_then(|s| s.gadget.as_ref())
    }

    /// Plan summary: k, p_sym, p_min, per-θ alternative vectors and the relation inventory.
    pub fn report(&self) -> String {
        let fmt = |q: &Rational| Value::String(format_rational(q));
        let stages: Vec<Value> = self
            .stages
            .iter()
            .map(|st| {
                let thetas: Vec<Value> = st
                    .thetas
                    .iter()
                    .map(|t| {
                        json!({
                            "theta": t.theta.to_string(),
                            "representative": t.representative.as_ref().map(|w| w.to_string()),
                            "q": t.alternatives.iter().map(|(w, q)| json!([w.to_string(), fmt(q)])).collect::<Vec<_>>(),
                            "aux": t.disjunction.aux_relations.iter().zip(&t.disjunction.aux_weights)
                                .map(|(n, w)| json!([n, fmt(w)])).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                json!({
                    "h": st.h,
                    "k": st.gadget.as_ref().map(|g| g.k),
                    "p_sym": st.gadget.as_ref().map(|g| format_rational(&g.p_sym)),
                    "thetas": thetas,
                })
            })
            .collect();
        let program = self.plp.program();
        let inventory = json!({
            "free": program.free_signature().relations().iter()
                .map(|r| json!([r.name, r.arity, format_rational(self.plp.weights().get(&r.name).expect("weighted"))]))
                .collect::<Vec<_>>(),
            "derived": program.derived_signature().relations().iter()
                .map(|r| json!([r.name, r.arity, program.stages().get(&r.name)]))
                .collect::<Vec<_>>(),
            "rules": program.rules().len(),
        });
        let v = json!({
            "p_min": self.p_min.as_ref().map(format_rational),
            "stages": stages,
            "relations": inventory,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}
