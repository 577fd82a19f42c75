use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Budget, Result};
use crate::gplp::{gather, gather_table, reduct_family, GeneralizedPlp, Strategy};
use crate::measures::{check_projective, ProjectivityReport};
use crate::relational::{trace_mask, Bits, DomainMap, World};
use crate::rules::Evaluator;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquareFailure {
    pub n: usize,
    pub free_world: World,
    pub map: DomainMap,
    /// Output restricted along the map.
    pub restricted_output: World,
    /// Output on the restricted input.
    pub output_of_restricted: World,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquareReport {
    pub max_n: usize,
    pub failure: Option<SquareFailure>,
    /// Projectivity of the target reduct family, checked when the square commutes.
    pub projective: Option<ProjectivityReport>,
}

impl SquareReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.projective.as_ref().is_none_or(|p| p.passed())
    }
}

impl fmt::Display for SquareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(e) = &self.failure {
            return write!(
                f,
                "FAIL n={} world=[{}] map={} restrict(apply)=[{}] apply(restrict)=[{}]",
                e.n, e.free_world, e.map, e.restricted_output, e.output_of_restricted
            );
        }
        match &self.projective {
            Some(p) if !p.passed() => write!(f, "FAIL induced family not projective: {}", p.failure.as_ref().unwrap()),
            _ => write!(f, "PASS\nsquare commutes up to n={}; induced reduct family projective", self.max_n),
        }
    }
}

/// Injections into `{0..n-1}` are generated by the inclusions `{0..m-1} ⊆ {0..n-1}` and the
/// adjacent transpositions.
fn generators(n: usize) -> Vec<DomainMap> {
    let mut g: Vec<DomainMap> = (1..n).map(|m| DomainMap::inclusion(m, n)).collect();
    g.extend((0..n.saturating_sub(1)).map(|i| DomainMap::transposition(n, i, i + 1)));
    g
}

struct OutputTable {
    words: usize,
    data: Vec<u64>,
}

impl OutputTable {
    fn row(&self, idx: usize) -> &[u64] {
        &self.data[idx * self.words..(idx + 1) * self.words]
    }
}

fn output_table(ev: &Evaluator, k: usize) -> OutputTable {
    let words = ev.word_count();
    let mut data = vec![0u64; (1usize << k) * words];
    data.par_chunks_mut(words).enumerate().for_each(|(idx, row)| {
        row[0] = idx as u64;
        ev.run(row);
    });
    OutputTable { words, data }
}

/// For every free world at every `n ≤ max_n` and every generating injection `m`, restricting
/// the program output along `m` equals the output on the restricted input. When that holds,
/// also checks projectivity of the target reduct family up to `max_n`.
pub fn check_commuting_square(plp: &GeneralizedPlp, max_n: usize, budget: Budget) -> Result<SquareReport> {
    let program = plp.program();
    let free = program.free_signature();
    let full = program.full_signature();
    let mut tables: Vec<OutputTable> = Vec::new();
    for n in 1..=max_n {
        let k = free.atom_count(n);
        budget.check(format!("free worlds of the program at n={n}"), k)?;
        let ev = Evaluator::new(program, n)?;
        let table = output_table(&ev, k);
        for m in generators(n) {
            let s = m.source_size();
            let g = gather_table(full, &m);
            let free_s = free.atom_count(s);
            let small = if s == n { &table } else { &tables[s - 1] };
            let bad = (0..1usize << k).into_par_iter().find_first(|&idx| {
                let out = table.row(idx);
                let restricted_in = gather(&[idx as u64], &g[..free_s]);
                let lhs = gather(out, &g);
                let rhs = small.row(restricted_in.words()[0] as usize);
                lhs.words() != rhs
            });
            if let Some(idx) = bad {
                let restricted_in = gather(&[idx as u64], &g[..free_s]);
                let rhs = Bits::from_words(full.atom_count(s), small.row(restricted_in.words()[0] as usize));
                return Ok(SquareReport {
                    max_n,
                    failure: Some(SquareFailure {
                        n,
                        free_world: World::from_bits(free.clone(), n, Bits::from_u64(k, idx as u64)),
                        map: m.clone(),
                        restricted_output: World::from_bits(full.clone(), s, gather(table.row(idx), &g)),
                        output_of_restricted: World::from_bits(full.clone(), s, rhs),
                    }),
                    projective: None,
                });
            }
        }
        tables.push(table);
    }
    let mut fam = reduct_family(plp);
    fam.strategy = Strategy::Enumerate;
    fam.budget = budget;
    let projective = check_projective(&fam, max_n)?;
    Ok(SquareReport {
        max_n,
        failure: None,
        projective: Some(projective),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceFailure {
    pub n: usize,
    pub first: World,
    pub second: World,
    pub first_output: World,
    pub second_output: World,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceReport {
    pub max_n: usize,
    pub g: usize,
    pub failure: Option<TraceFailure>,
}

impl TraceReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for TraceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(f, "PASS\n{}-traces of outputs depend only on {}-traces of inputs up to n={}", self.g, self.g, self.max_n),
            Some(e) => write!(
                f,
                "FAIL n={} worlds=[{}] and [{}] share a {}-trace; outputs [{}] and [{}] do not",
                e.n, e.first, e.second, self.g, e.first_output, e.second_output
            ),
        }
    }
}

/// Free worlds with equal g-traces must have outputs with equal g-traces.
pub fn check_trace_functoriality(plp: &GeneralizedPlp, max_n: usize, g: usize, budget: Budget) -> Result<TraceReport> {
    let program = plp.program();
    let free = program.free_signature();
    let full = program.full_signature();
    for n in 1..=max_n {
        let k = free.atom_count(n);
        budget.check(format!("free worlds of the program at n={n}"), k)?;
        let ev = Evaluator::new(program, n)?;
        let scope: Vec<usize> = (0..n).collect();
        let in_mask = trace_mask(free, n, &scope, g).as_u64().unwrap_or(u64::MAX);
        let out_mask = trace_mask(full, n, &scope, g);
        // input trace → (first world, its output trace)
        let mut seen: HashMap<u64, (u64, Bits)> = HashMap::new();
        for idx in 0..1u64 << k {
            let out = ev.eval_bits(&Bits::from_u64(k, idx));
            let tr = out.and(&out_mask);
            match seen.get(&(idx & in_mask)) {
                None => {
                    seen.insert(idx & in_mask, (idx, tr));
                }
                Some((first, ftr)) if *ftr != tr => {
                    let first_out = ev.eval_bits(&Bits::from_u64(k, *first));
                    return Ok(TraceReport {
                        max_n,
                        g,
                        failure: Some(TraceFailure {
                            n,
                            first: World::from_bits(free.clone(), n, Bits::from_u64(k, *first)),
                            second: World::from_bits(free.clone(), n, Bits::from_u64(k, idx)),
                            first_output: World::from_bits(full.clone(), n, first_out),
                            second_output: World::from_bits(full.clone(), n, out),
                        }),
                    });
                }
                Some(_) => {}
            }
        }
    }
    Ok(TraceReport { max_n, g, failure: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::rat;

    fn plp(weights: &[(&str, i64, i64)], program: &str, target: &[&str]) -> GeneralizedPlp {
        let w = crate::measures::WeightFn::strict(weights.iter().map(|(k, a, b)| (k.to_string(), rat(*a, *b)))).unwrap();
        let p = crate::rules::parse_program(program).unwrap();
        let t: Vec<String> = target.iter().map(|s| s.to_string()).collect();
        GeneralizedPlp::new(w, p, &t).unwrap()
    }

    #[test]
    fn copy_rule_commutes() {
        let g = plp(&[("f", 1, 2)], "#free f/1\n#derived q/1\nq(X) :- f(X).", &["q"]);
        let r = check_commuting_square(&g, 3, Budget::default()).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.to_string().starts_with("PASS"));
        assert!(check_trace_functoriality(&g, 3, 1, Budget::default()).unwrap().passed());
    }

    #[test]
    fn existential_rule_fails_at_two() {
        let g = plp(&[("e", 1, 2)], "#free e/2\n#derived q/1\nq(X) :- e(X,Y).", &["q"]);
        let r = check_commuting_square(&g, 3, Budget::default()).unwrap();
        let e = r.failure.as_ref().unwrap();
        assert_eq!(e.n, 2);
        assert_eq!(e.free_world.to_string(), "e(0,1)");
        assert_eq!(e.map, DomainMap::inclusion(1, 2));
        assert_eq!(e.restricted_output.to_string(), "q(0)");
        assert_eq!(e.output_of_restricted.to_string(), "{}");

        let t = check_trace_functoriality(&g, 2, 1, Budget::default()).unwrap();
        let e = t.failure.unwrap();
        assert_eq!((e.n, e.first.to_string(), e.second.to_string()), (2, "{}".into(), "e(0,1)".into()));
    }

    #[test]
    fn full_arity_traces_are_vacuous() {
        let g = plp(&[("e", 1, 2)], "#free e/2\n#derived q/1\nq(X) :- e(X,Y).", &["q"]);
        assert!(check_trace_functoriality(&g, 3, 2, Budget::default()).unwrap().passed());
    }
}
