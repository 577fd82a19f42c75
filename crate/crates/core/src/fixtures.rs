//! Reference inputs shared by the tests and the command line.

use std::sync::Arc;

use crate::error::Result;
use crate::gplp::GeneralizedPlp;
use crate::measures::{rat, Dist, Family, FnFamily, WeightFn};
use crate::relational::{GroundAtom, Signature, World};
use crate::rules::parse_program;
use crate::sip::SipParams;

pub const COLOURED_PARAMS: &str = include_str!("../fixtures/coloured.json");
pub const UNARY_PARAMS: &str = include_str!("../fixtures/unary.json");
pub const TERNARY_PARAMS: &str = include_str!("../fixtures/ternary.json");
pub const TOURNAMENT_PARAMS: &str = include_str!("../fixtures/tournament.json");
pub const NONPROJECTIVE_PLP: &str = include_str!("../fixtures/nonprojective.plp.json");

/// Two colours with probability 1/2 each; edges in both directions or neither, with
/// probability 7/10 between coloured nodes and 9/10 otherwise.
pub fn coloured() -> SipParams {
    SipParams::from_json(COLOURED_PARAMS).expect("fixture parses")
}

/// `P(x)` with probability 2/3.
pub fn unary() -> SipParams {
    SipParams::from_json(UNARY_PARAMS).expect("fixture parses")
}

/// A ternary relation holding on all orderings of a triple with probability 99/100.
pub fn ternary() -> SipParams {
    SipParams::from_json(TERNARY_PARAMS).expect("fixture parses")
}

/// Uniform random tournament: no loops, exactly one direction per pair.
pub fn tournament() -> impl Family {
    let sig = Arc::new(Signature::parse("E/2").expect("signature"));
    let s = sig.clone();
    FnFamily::new(sig, move |n| -> Result<Dist> {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let p = rat(1, 1 << pairs.len());
        let worlds = (0..1u64 << pairs.len()).map(|code| {
            let atoms = pairs.iter().enumerate().map(|(b, &(i, j))| {
                if code >> b & 1 == 1 {
                    GroundAtom::new(0, [i, j])
                } else {
                    GroundAtom::new(0, [j, i])
                }
            });
            World::from_atoms(s.clone(), n, atoms).map(|w| (w, p.clone()))
        });
        Dist::from_pairs(s.clone(), n, worlds.collect::<Result<Vec<_>>>()?)
    })
}

/// `q(X) :- e(X,Y).` with `w(e) = 1/2`: the existential body breaks the commuting square.
pub fn nonprojective() -> GeneralizedPlp {
    GeneralizedPlp::from_json(NONPROJECTIVE_PLP).expect("fixture parses")
}

fn plp(weights: &[(&str, i64, i64)], program: &str, target: &[&str]) -> GeneralizedPlp {
    let w = WeightFn::strict(weights.iter().map(|&(n, a, b)| (n.to_string(), rat(a, b)))).expect("weights");
    let p = parse_program(program).expect("program parses");
    let t: Vec<String> = target.iter().map(|s| s.to_string()).collect();
    GeneralizedPlp::new(w, p, &t).expect("plp")
}

/// Small programs whose rules only look inside the tuple they define.
pub fn projective_plps() -> Vec<(&'static str, GeneralizedPlp)> {
    vec![
        ("copy", plp(&[("f", 1, 3)], "#free f/1\n#derived q/1\nq(X) :- f(X).", &["q"])),
        (
            "complement",
            plp(&[("f", 1, 3)], "#free f/1\n#derived q/1 r/1\nq(X) :- f(X).\nr(X) :- not f(X).", &["q", "r"]),
        ),
        (
            "mutual",
            plp(&[("e", 1, 2)], "#free e/2\n#derived s/2\ns(X,Y) :- e(X,Y), e(Y,X).", &["s"]),
        ),
        (
            "one_way",
            plp(&[("e", 1, 2)], "#free e/2\n#derived t/2\nt(X,Y) :- e(X,Y), not e(Y,X).", &["t"]),
        ),
        (
            "coloured_edges",
            plp(
                &[("c", 1, 2), ("e", 2, 3)],
                "#free c/1 e/2\n#derived col/1 edge/2\ncol(X) :- c(X).\nedge(X,Y) :- c(X), c(Y), e(X,Y), X != Y.\nedge(X,Y) :- not c(X), e(X,Y), X != Y.",
                &["col", "edge"],
            ),
        ),
        (
            "loops",
            plp(&[("e", 1, 4)], "#free e/2\n#derived l/1 m/2\nl(X) :- e(X,X).\nm(X,Y) :- l(X), e(X,Y).", &["l", "m"]),
        ),
    ]
}
