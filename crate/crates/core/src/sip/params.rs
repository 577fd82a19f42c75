use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gplp::gather_table;
use crate::measures::{format_rational, in_unit_interval, parse_rational, Rational};
use crate::relational::{exact_level_mask, parse_atom_list, permutations, trace_mask, Bits, DomainMap, Signature, World};

/// Per-level extension table: `θ → (new part → p_{θ,γ})`. Both keys are bitmasks in the
/// layout over `{0..g}`.
pub(crate) type Level = BTreeMap<Bits, BTreeMap<Bits, Rational>>;

/// Parameters of the stage-wise construction.
///
/// Level `g` (for `0 ≤ g < r`) maps a g-trace θ over `{0..g}` to a distribution over the
/// atoms with exactly `g+1` distinct arguments. Level 0 has the single empty θ and holds the
/// 1-trace probabilities. Omitted extensions have probability zero; θ that the lower levels
/// can never produce may be omitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SipParams {
    sig: Arc<Signature>,
    levels: Vec<Level>,
}

/// Masks over the layout on `{0..g}`: atoms with at most `g` distinct arguments, and atoms
/// with exactly `g+1`.
#[derive(Clone, Debug)]
pub(crate) struct Shape {
    pub low: Bits,
    pub new: Bits,
}

pub(crate) fn shape(sig: &Signature, g: usize) -> Shape {
    let scope: Vec<usize> = (0..=g).collect();
    Shape {
        low: trace_mask(sig, g + 1, &scope, g),
        new: exact_level_mask(sig, g + 1, g + 1),
    }
}

/// Tables sending bits over `{0..g}` to their images under each permutation.
pub(crate) fn permutation_tables(sig: &Signature, g: usize) -> Vec<Vec<usize>> {
    permutations(g + 1)
        .into_iter()
        .map(|p| gather_table(sig, &DomainMap::new(g + 1, p).expect("permutation")))
        .collect()
}

pub(crate) fn scatter(bits: &Bits, table: &[usize], out: &mut Bits) {
    for j in bits.iter_ones() {
        out.set(table[j], true);
    }
}

pub(crate) fn permute(bits: &Bits, table: &[usize]) -> Bits {
    let mut out = Bits::zeros(table.len());
    scatter(bits, table, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.violations.split_first() {
            None => write!(f, "PASS\nparameters valid"),
            Some((first, rest)) => {
                write!(f, "FAIL {first}")?;
                for v in rest {
                    write!(f, "\n{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl SipParams {
    pub fn new(sig: Arc<Signature>) -> Result<Self> {
        if sig.is_empty() {
            return Err(Error::InvalidParams("empty signature".into()));
        }
        let r = sig.max_arity();
        Ok(SipParams {
            sig,
            levels: vec![Level::new(); r],
        })
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    /// Highest arity; levels run over `0..max_arity()`.
    pub fn max_arity(&self) -> usize {
        self.levels.len()
    }

    pub(crate) fn level(&self, g: usize) -> &Level {
        &self.levels[g]
    }

    pub(crate) fn level_mut(&mut self, g: usize) -> &mut Level {
        &mut self.levels[g]
    }

    fn split(&self, g: usize, theta: &World, gamma: &World) -> Result<(Bits, Bits)> {
        if g >= self.levels.len() {
            return Err(Error::InvalidParams(format!("level {g} out of range (max arity {})", self.levels.len())));
        }
        for w in [theta, gamma] {
            if w.signature().as_ref() != self.sig.as_ref() || w.domain_size() != g + 1 {
                return Err(Error::InvalidParams(format!("expected a world over {} on {{0..{g}}}", self.sig)));
            }
        }
        let sh = shape(&self.sig, g);
        if theta.bits().and_not(&sh.low).count_ones() > 0 {
            return Err(Error::InvalidParams(format!("θ [{theta}] has atoms with more than {g} distinct arguments")));
        }
        if gamma.bits().and(&sh.low) != *theta.bits() {
            return Err(Error::InvalidParams(format!("[{gamma}] does not extend θ [{theta}]")));
        }
        Ok((theta.bits().clone(), gamma.bits().and(&sh.new)))
    }

    /// Sets the probability of the 1-trace `gamma`, a world on `{0}`.
    pub fn set_one_trace(&mut self, gamma: &World, p: Rational) -> Result<()> {
        let theta = World::empty(self.sig.clone(), 1);
        self.set_extension(0, &theta, gamma, p)
    }

    /// Sets `p_{θ,γ}`; `theta` and `gamma` are worlds on `{0..g}` with `gamma ⊇ theta`.
    pub fn set_extension(&mut self, g: usize, theta: &World, gamma: &World, p: Rational) -> Result<()> {
        let (t, new) = self.split(g, theta, gamma)?;
        self.levels[g].entry(t).or_default().insert(new, p);
        Ok(())
    }

    /// `p_{θ,γ}`, zero when not listed.
    pub fn prob(&self, g: usize, theta: &World, gamma: &World) -> Result<Rational> {
        let (t, new) = self.split(g, theta, gamma)?;
        Ok(self.levels[g]
            .get(&t)
            .and_then(|e| e.get(&new))
            .cloned()
            .unwrap_or_else(Rational::zero))
    }

    /// Listed θ at level `g` with their extensions `(γ, p)`, γ being the full world on `{0..g}`.
    pub fn stage(&self, g: usize) -> Vec<(World, Vec<(World, Rational)>)> {
        self.levels[g]
            .iter()
            .map(|(t, exts)| {
                let theta = World::from_bits(self.sig.clone(), g + 1, t.clone());
                let exts = exts
                    .iter()
                    .map(|(new, p)| {
                        let mut b = t.clone();
                        b.or_assign(new);
                        (World::from_bits(self.sig.clone(), g + 1, b), p.clone())
                    })
                    .collect();
                (theta, exts)
            })
            .collect()
    }

    /// Copies every listed θ to the isomorphic θ that are missing, transporting its extensions.
    pub fn orbit_fill(&mut self) {
        for g in 0..self.levels.len() {
            let tables = permutation_tables(&self.sig, g);
            let listed: Vec<Bits> = self.levels[g].keys().cloned().collect();
            for t in listed {
                for table in &tables {
                    let image = permute(&t, table);
                    if self.levels[g].contains_key(&image) {
                        continue;
                    }
                    let moved = self.levels[g][&t]
                        .iter()
                        .map(|(new, p)| (permute(new, table), p.clone()))
                        .collect();
                    self.levels[g].insert(image, moved);
                }
            }
        }
    }

    fn world(&self, g: usize, bits: &Bits) -> World {
        World::from_bits(self.sig.clone(), g + 1, bits.clone())
    }

    fn gamma(&self, g: usize, t: &Bits, new: &Bits) -> World {
        let mut b = t.clone();
        b.or_assign(new);
        self.world(g, &b)
    }

    /// Ranges, per-θ sums, isomorphism invariance, and presence of every θ reachable from
    /// the lower levels. Reachability is only assessed while the lower levels are valid.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for g in 0..self.levels.len() {
            let sh = shape(&self.sig, g);
            let level = &self.levels[g];
            if g == 0 && level.keys().any(|t| !t.is_zero()) {
                violations.push("level 0 must use the empty θ".into());
            }
            for (t, exts) in level {
                if t.and_not(&sh.low).count_ones() > 0 {
                    violations.push(format!("g={g}: θ [{}] is not a {g}-trace", self.world(g, t)));
                    continue;
                }
                let mut sum = Rational::zero();
                for (new, p) in exts {
                    if new.and_not(&sh.new).count_ones() > 0 {
                        violations.push(format!("g={g}: extension of θ [{}] sets lower-level atoms", self.world(g, t)));
                    }
                    if !in_unit_interval(p) {
                        violations.push(format!(
                            "g={g}: p(θ=[{}], γ=[{}]) = {} outside [0,1]",
                            self.world(g, t),
                            self.gamma(g, t, new),
                            format_rational(p)
                        ));
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    violations.push(format!(
                        "g={g}: stage sum ≠ 1 at θ [{}] (sum {})",
                        self.world(g, t),
                        format_rational(&sum)
                    ));
                }
            }
            violations.extend(self.iso_violations(g));
            if violations.is_empty() {
                match self.construct(g + 1, g) {
                    Ok(states) => {
                        let reachable: BTreeSet<Bits> = states.into_iter().map(|(b, _)| b).collect();
                        for t in reachable {
                            if !level.contains_key(&t) {
                                violations.push(format!(
                                    "g={g}: no parameters for reachable θ [{}]",
                                    self.world(g, &t)
                                ));
                            }
                        }
                    }
                    Err(e) => violations.push(e.to_string()),
                }
            }
        }
        ValidationReport { violations }
    }

    fn iso_violations(&self, g: usize) -> Vec<String> {
        let level = &self.levels[g];
        let zero = Rational::zero();
        let mut out = Vec::new();
        for table in permutation_tables(&self.sig, g) {
            for (t, exts) in level {
                let t2 = permute(t, &table);
                let Some(exts2) = level.get(&t2) else { continue };
                let keys: BTreeSet<Bits> = exts
                    .keys()
                    .cloned()
                    .chain(exts2.keys().map(|k| permute_back(k, &table)))
                    .collect();
                for new in keys {
                    let new2 = permute(&new, &table);
                    if (t, &new) >= (&t2, &new2) {
                        continue;
                    }
                    let p = exts.get(&new).unwrap_or(&zero);
                    let q = exts2.get(&new2).unwrap_or(&zero);
                    if p != q {
                        out.push(format!(
                            "g={g}: isomorphism violation: p(θ=[{}], γ=[{}]) = {} but p(θ=[{}], γ=[{}]) = {}",
                            self.world(g, t),
                            self.gamma(g, t, &new),
                            format_rational(p),
                            self.world(g, &t2),
                            self.gamma(g, &t2, &new2),
                            format_rational(q)
                        ));
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let r = self.validate();
        match r.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidParams(v.clone())),
        }
    }

    /// File format: see the crate README.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)?;
        let sig = Arc::new(Signature::parse(&file.signature.join(" "))?);
        let mut p = SipParams::new(sig.clone())?;
        let r = p.max_arity();
        let zero = Bits::zeros(sig.atom_count(1));
        for e in &file.one_traces {
            let new = atom_bits(&sig, 0, &e.atoms, Role::New)?;
            insert_once(p.level_mut(0).entry(zero.clone()).or_default(), new, parse_rational(&e.prob)?, 0)?;
        }
        for stage in &file.stages {
            let g = stage.g;
            if g == 0 || g >= r {
                return Err(Error::InvalidParams(format!("stage g={g} outside 1..{}", r.saturating_sub(1))));
            }
            for entry in &stage.entries {
                let t = atom_bits(&sig, g, &entry.theta, Role::Theta)?;
                if p.level(g).contains_key(&t) {
                    return Err(Error::InvalidParams(format!("duplicate θ at g={g}: {:?}", entry.theta)));
                }
                let mut exts = BTreeMap::new();
                for x in &entry.extensions {
                    let new = atom_bits(&sig, g, &x.true_new, Role::New)?;
                    insert_once(&mut exts, new, parse_rational(&x.prob)?, g)?;
                }
                p.level_mut(g).insert(t, exts);
            }
        }
        if file.orbit_fill {
            p.orbit_fill();
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let names = |g: usize, b: &Bits| -> Vec<String> {
            self.world(g, b)
                .true_atoms()
                .iter()
                .map(|a| a.display(&self.sig).to_string())
                .collect()
        };
        let file = ParamsFile {
            signature: self.sig.relations().iter().map(|r| format!("{}/{}", r.name, r.arity)).collect(),
            one_traces: self.levels[0]
                .values()
                .flat_map(|e| e.iter())
                .map(|(new, p)| OneTrace {
                    atoms: names(0, new),
                    prob: format_rational(p),
                })
                .collect(),
            stages: (1..self.levels.len())
                .filter(|&g| !self.levels[g].is_empty())
                .map(|g| StageFile {
                    g,
                    entries: self.levels[g]
                        .iter()
                        .map(|(t, exts)| EntryFile {
                            theta: names(g, t),
                            extensions: exts
                                .iter()
                                .map(|(new, p)| ExtFile {
                                    true_new: names(g, new),
                                    prob: format_rational(p),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
            orbit_fill: false,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("params serialize");
        s.push('\n');
        s
    }
}

fn permute_back(bits: &Bits, table: &[usize]) -> Bits {
    let mut out = Bits::zeros(table.len());
    for (j, &i) in table.iter().enumerate() {
        if bits.get(i) {
            out.set(j, true);
        }
    }
    out
}

fn insert_once(exts: &mut BTreeMap<Bits, Rational>, new: Bits, p: Rational, g: usize) -> Result<()> {
    if exts.insert(new, p).is_some() {
        return Err(Error::InvalidParams(format!("duplicate extension at g={g}")));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Role {
    Theta,
    New,
}

fn atom_bits(sig: &Signature, g: usize, atoms: &[String], role: Role) -> Result<Bits> {
    let lay = sig.layout(g + 1);
    let mut b = Bits::zeros(lay.total());
    for text in atoms {
        let parsed = parse_atom_list(text, sig, g + 1)?;
        let [a] = parsed.as_slice() else {
            return Err(Error::InvalidParams(format!("expected one atom, got `{text}`")));
        };
        let d = a.distinct_count();
        let ok = match role {
            Role::Theta => d <= g,
            Role::New => d == g + 1,
        };
        if !ok {
            let want = match role {
                Role::Theta => format!("at most {g}"),
                Role::New => format!("exactly {}", g + 1),
            };
            return Err(Error::InvalidParams(format!("atom `{text}` at g={g} must have {want} distinct arguments")));
        }
        let i = lay.index_of(a);
        if b.get(i) {
            return Err(Error::InvalidParams(format!("atom `{text}` listed twice")));
        }
        b.set(i, true);
    }
    Ok(b)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    signature: Vec<String>,
    one_traces: Vec<OneTrace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    stages: Vec<StageFile>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    orbit_fill: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OneTrace {
    #[serde(rename = "true")]
    atoms: Vec<String>,
    prob: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    g: usize,
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    theta: Vec<String>,
    extensions: Vec<ExtFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtFile {
    true_new: Vec<String>,
    prob: String,
}
