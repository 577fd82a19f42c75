use std::sync::Arc;

use dsem::fixtures;
use dsem::gplp::{induced_dist, GeneralizedPlp, Strategy as Eval};
use dsem::measures::{free_dist, rat, Dist, Rational, WeightFn};
use dsem::relational::Signature;
use dsem::rules::parse_program;
use dsem::sip::{sample_world, sip_prob, SipParams};
use dsem::synth::{p_sym, synthesize, verify_global, verify_synthesis, AnnotatedDisjunction, VerifyMode};
use dsem::Budget;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn probs_from(counts: &[u32]) -> Vec<Rational> {
    let total: u32 = counts.iter().sum();
    counts.iter().map(|&c| rat(c as i64, total as i64)).collect()
}

/// Block-model parameters from integer masses: colour weight `a/(a+b)`; per colour pair the
/// masses of no edge, each single edge, and both edges.
fn block_params(colour: (u32, u32), sym: [[u32; 3]; 2], mixed: [u32; 4]) -> SipParams {
    let c = probs_from(&[colour.0, colour.1]);
    let ext = |theta: &str, m: &[u32]| {
        let p = probs_from(m);
        let news = [r#"[]"#, r#"["E(0,1)"]"#, r#"["E(1,0)"]"#, r#"["E(0,1)", "E(1,0)"]"#];
        let exts: Vec<String> = news
            .iter()
            .zip(&p)
            .map(|(n, q)| format!(r#"{{"true_new": {n}, "prob": "{q}"}}"#))
            .collect();
        format!(r#"{{"theta": {theta}, "extensions": [{}]}}"#, exts.join(", "))
    };
    let [s0, s1] = sym;
    let text = format!(
        r#"{{"signature": ["P/1", "E/2"],
            "one_traces": [{{"true": ["P(0)"], "prob": "{}"}}, {{"true": [], "prob": "{}"}}],
            "stages": [{{"g": 1, "entries": [{}, {}, {}]}}],
            "orbit_fill": true}}"#,
        c[0],
        c[1],
        ext("[]", &[s0[0], s0[1], s0[1], s0[2]]),
        ext(r#"["P(0)", "P(1)"]"#, &[s1[0], s1[1], s1[1], s1[2]]),
        ext(r#"["P(0)"]"#, &mixed),
    );
    SipParams::from_json(&text).unwrap()
}

fn sym_masses() -> impl Strategy<Value = [u32; 3]> {
    // at least one symmetric extension keeps positive mass
    (0u32..4, 0u32..4, 1u32..5).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn disjunction_enumerates_to_its_probabilities(counts in prop::collection::vec(0u32..5, 1..6)) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let probs = probs_from(&counts);
        let ad = AnnotatedDisjunction::new(&probs, "r").unwrap();
        prop_assert!(ad.aux_weights.iter().all(|w| *w > Rational::zero() && *w < Rational::one()));
        let k = ad.aux_relations.len();
        let mut got = vec![Rational::zero(); probs.len()];
        for code in 0..1u32 << k {
            let aux: Vec<bool> = (0..k).map(|i| code >> i & 1 == 1).collect();
            // selectors read directly: alternative i is selected iff all its literals hold
            let hits: Vec<usize> = ad.selectors.iter().enumerate()
                .filter(|(_, s)| s.as_ref().is_some_and(|s| s.iter().all(|&(r, v)| aux[r] == v)))
                .map(|(i, _)| i)
                .collect();
            prop_assert_eq!(hits.len(), 1);
            let w: Rational = ad.aux_weights.iter().zip(&aux)
                .map(|(w, &v)| if v { w.clone() } else { Rational::one() - w })
                .product();
            got[hits[0]] += w;
        }
        prop_assert_eq!(got, probs);
    }

    #[test]
    fn free_dumps_round_trip(p in 1i64..12, e in 1i64..12, n in 1usize..3) {
        let sig = Arc::new(Signature::parse("P/1 E/2").unwrap());
        let w = WeightFn::strict([("P".to_string(), rat(p, 12)), ("E".to_string(), rat(e, 12))]).unwrap();
        let d = free_dist(&w, &sig, n, Budget::default()).unwrap();
        prop_assert_eq!(Dist::parse_dump(&d.dump(), sig, n).unwrap(), d);
    }

    #[test]
    fn strategies_agree(c in 1i64..6, e in 1i64..6, n in 1usize..4) {
        let text = "#free c/1 e/2\n#derived col/1 edge/2\ncol(X) :- c(X).\nedge(X,Y) :- c(X), c(Y), e(X,Y), X != Y.\nedge(X,Y) :- not c(X), e(X,Y), X != Y.";
        let w = WeightFn::strict([("c".to_string(), rat(c, 6)), ("e".to_string(), rat(e, 6))]).unwrap();
        let plp = GeneralizedPlp::new(w, parse_program(text).unwrap(), &["col".into(), "edge".into()]).unwrap();
        let a = induced_dist(&plp, n, Eval::Enumerate, Budget::default()).unwrap();
        let b = induced_dist(&plp, n, Eval::Factored, Budget::default()).unwrap();
        prop_assert_eq!(a.total(), Rational::one());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn samples_lie_in_the_support(seed in any::<u64>(), n in 1usize..5) {
        let p = fixtures::coloured();
        let w = sample_world(&p, n, seed).unwrap();
        prop_assert_eq!(&w, &sample_world(&p, n, seed).unwrap());
        prop_assert!(sip_prob(&p, &w).unwrap() > Rational::zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn block_models_synthesize_exactly(
        colour in (1u32..4, 1u32..4),
        s0 in sym_masses(),
        s1 in sym_masses(),
        mixed in (0u32..4, 0u32..4, 0u32..4, 1u32..4),
    ) {
        let p = block_params(colour, [s0, s1], [mixed.0, mixed.1, mixed.2, mixed.3]);
        let plan = synthesize(&p).unwrap();
        let local = verify_synthesis(&plan, &p, VerifyMode::Local).unwrap();
        prop_assert!(local.passed(), "{}", local);
        // small p_min means many Ord aux atoms per pair; global mode only where it is cheap
        match verify_global(&plan.plp, &p, 2, Budget::new(14)) {
            Ok(global) => prop_assert!(global.passed(), "{}", global),
            Err(e) => prop_assert!(e.is_budget(), "{}", e),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Both-edges mass of at least 3/7 everywhere keeps k ≤ 3, and one single-edge
    /// alternative keeps the free atoms per pair at 16 or fewer.
    #[test]
    fn sparse_block_models_match_globally(
        colour in (1u32..4, 1u32..4),
        s0 in (0u32..4, 3u32..7),
        s1 in (0u32..4, 3u32..7),
        mixed in (0u32..3, 0u32..3, 3u32..7),
    ) {
        let p = block_params(colour, [[s0.0, 0, s0.1], [s1.0, 0, s1.1]], [mixed.0, mixed.1, 0, mixed.2]);
        let plan = synthesize(&p).unwrap();
        prop_assert!(plan.gadget(2).unwrap().k <= 3);
        let global = verify_global(&plan.plp, &p, 2, Budget::new(16)).unwrap();
        prop_assert!(global.passed(), "{}", global);
    }
}

#[test]
fn p_sym_matches_brute_force() {
    for m in [2usize, 6] {
        for k in 1..=6usize {
            let total = k.pow(m as u32);
            let distinct = (0..total)
                .filter(|&code| {
                    let mut seen = vec![false; k];
                    let mut c = code;
                    (0..m).all(|_| {
                        let j = c % k;
                        c /= k;
                        !std::mem::replace(&mut seen[j], true)
                    })
                })
                .count();
            assert_eq!(p_sym(k, m), rat((total - distinct) as i64, total as i64), "k={k} m={m}");
        }
    }
}
