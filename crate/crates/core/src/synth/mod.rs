//! Compiling SIP parameters into a tuple-local generalised PLP, and checking the result.

mod ad;
mod gadget;
mod plan;
mod verify;

pub use ad::{compile_ad, AnnotatedDisjunction};
pub use gadget::{build_ord_gadget, p_sym, OrdGadget};
pub use plan::{choose_symmetric_reps, synthesize, StagePlan, SymmetricChoice, SymmetricReps, SynthesisPlan, ThetaPlan};
pub use verify::{verify_global, verify_synthesis, LocalRecord, VerifyMode, VerifyReport};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::error::Error;
    use crate::gplp::check_commuting_square;
    use crate::measures::rat;
    use crate::relational::{Signature, World};
    use crate::sip::SipParams;
    use crate::Budget;

    const COLOURED: &str = include_str!("../../fixtures/coloured.json");

    fn coloured() -> SipParams {
        SipParams::from_json(COLOURED).unwrap()
    }

    #[test]
    fn coloured_plan() {
        let p = coloured();
        let plan = synthesize(&p).unwrap();
        assert_eq!(plan.p_min, Some(rat(7, 10)));
        let gd = plan.gadget(2).unwrap();
        assert_eq!((gd.k, gd.p_sym.clone()), (2, rat(1, 2)));
        let both = plan.stages[1]
            .thetas
            .iter()
            .find(|t| t.theta.to_string() == "P(0) P(1)")
            .unwrap();
        let q: Vec<_> = both.alternatives.iter().map(|(_, q)| q.clone()).collect();
        assert_eq!(q, vec![rat(2, 5), rat(3, 5)]);
        assert_eq!(both.representative.as_ref().unwrap().to_string(), "P(0) P(1) E(0,1) E(1,0)");
        assert_eq!(plan.plp.program().free_signature().atom_count(2), 22);
        assert!(plan.plp.is_tuple_local());
    }

    #[test]
    fn coloured_verifies() {
        let p = coloured();
        let plan = synthesize(&p).unwrap();
        let local = verify_synthesis(&plan, &p, VerifyMode::Local).unwrap();
        assert!(local.passed(), "{local}");
        let r = local.records.iter().find(|r| r.h == 2 && r.theta.to_string() == "P(0) P(1)").unwrap();
        assert_eq!(r.recovered, vec![rat(3, 10), rat(0, 1), rat(0, 1), rat(7, 10)]);
        let global = verify_synthesis(&plan, &p, VerifyMode::Global(2)).unwrap();
        assert!(global.passed(), "{global}");
        assert!(check_commuting_square(&plan.plp, 2, Budget::default()).unwrap().passed());
    }

    #[test]
    fn unary_is_one_disjunction() {
        let sig = Arc::new(Signature::parse("P/1").unwrap());
        let mut p = SipParams::new(sig.clone()).unwrap();
        p.set_one_trace(&World::parse("P(0)", sig.clone(), 1).unwrap(), rat(1, 3)).unwrap();
        p.set_one_trace(&World::empty(sig, 1), rat(2, 3)).unwrap();
        let plan = synthesize(&p).unwrap();
        assert_eq!(plan.p_min, None);
        assert_eq!(plan.stages.len(), 1);
        assert!(verify_synthesis(&plan, &p, VerifyMode::Global(3)).unwrap().passed());
        assert!(verify_synthesis(&plan, &p, VerifyMode::Local).unwrap().passed());
    }

    #[test]
    fn tournament_is_rejected() {
        let p = SipParams::from_json(include_str!("../../fixtures/tournament.json")).unwrap();
        match synthesize(&p) {
            Err(Error::NotRepresentable(w)) => {
                assert_eq!(w.g, 1);
                assert_eq!(w.evidence.len(), 2);
            }
            other => panic!("expected rejection, got {:?}", other.map(|p| p.p_min)),
        }
    }

    #[test]
    fn ternary_needs_large_k() {
        let p = SipParams::from_json(include_str!("../../fixtures/ternary.json")).unwrap();
        let plan = synthesize(&p).unwrap();
        assert_eq!(plan.gadget(3).unwrap().k, 6);
        let local = verify_synthesis(&plan, &p, VerifyMode::Local).unwrap();
        assert!(local.passed(), "{local}");
    }

    #[test]
    fn report_lists_gadget() {
        let plan = synthesize(&coloured()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&plan.report()).unwrap();
        assert_eq!(v["p_min"], "7/10");
        assert_eq!(v["stages"][1]["k"], 2);
        assert_eq!(v["stages"][1]["p_sym"], "1/2");
    }
}
