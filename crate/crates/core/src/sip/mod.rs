//! Families with the strong independence property: construction parameters, exact
//! distributions, sampling, parameter fitting, and direct SIP / IP / essential-asymmetry
//! checks.

mod checks;
mod construction;
mod fit;
mod params;

pub use checks::{
    check_essential_asymmetry, check_ip, check_sip_direct, AsymmetryWitness, IndependenceReport, IndependenceViolation,
    Principle,
};
pub use construction::{ascending_tuples, sample_world, sip_dist, sip_family, sip_prob, SipFamily, SipSampler};
pub use fit::fit_params;
pub use params::{SipParams, ValidationReport};

pub(crate) use params::{permutation_tables, permute, shape};

use crate::error::Result;

impl SipParams {
    /// Essential asymmetry of the constructed family, read from the parameters directly.
    pub fn essential_asymmetry(&self) -> Result<Option<AsymmetryWitness>> {
        self.ensure_valid()?;
        check_essential_asymmetry(&sip_family(self)?)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::error::{Budget, Error};
    use crate::measures::{check_projective, rat, Dist, FnFamily, FreeFamily, Rational, WeightFn};
    use crate::relational::{Signature, World};

    pub(crate) const COLOURED: &str = r#"{
  "signature": ["P/1", "E/2"],
  "one_traces": [
    {"true": [], "prob": "1/2"},
    {"true": ["P(0)"], "prob": "1/2"}
  ],
  "stages": [
    {"g": 1, "entries": [
      {"theta": ["P(0)", "P(1)"], "extensions": [
        {"true_new": [], "prob": "3/10"},
        {"true_new": ["E(0,1)", "E(1,0)"], "prob": "7/10"}]},
      {"theta": ["P(0)"], "extensions": [
        {"true_new": [], "prob": "1/10"},
        {"true_new": ["E(0,1)", "E(1,0)"], "prob": "9/10"}]},
      {"theta": [], "extensions": [
        {"true_new": [], "prob": "1/10"},
        {"true_new": ["E(0,1)", "E(1,0)"], "prob": "9/10"}]}
    ]}
  ],
  "orbit_fill": true
}"#;

    fn coloured() -> SipParams {
        SipParams::from_json(COLOURED).unwrap()
    }

    fn world(p: &SipParams, text: &str, n: usize) -> World {
        World::parse(text, p.signature().clone(), n).unwrap()
    }

    fn unary(p_true: Rational) -> SipParams {
        let sig = Arc::new(Signature::parse("P/1").unwrap());
        let mut p = SipParams::new(sig.clone()).unwrap();
        p.set_one_trace(&World::parse("P(0)", sig.clone(), 1).unwrap(), p_true.clone()).unwrap();
        p.set_one_trace(&World::empty(sig, 1), rat(1, 1) - p_true).unwrap();
        p
    }

    #[test]
    fn coloured_graph_probabilities() {
        let p = coloured();
        assert!(p.validate().passed(), "{}", p.validate());
        assert_eq!(sip_prob(&p, &world(&p, "P(0) P(1) E(0,1) E(1,0)", 2)).unwrap(), rat(7, 40));
        assert_eq!(sip_prob(&p, &world(&p, "E(0,1)", 2)).unwrap(), rat(0, 1));
        for n in 1..=3 {
            assert_eq!(sip_dist(&p, n, Budget::default()).unwrap().total(), rat(1, 1));
        }
        let fam = sip_family(&p).unwrap();
        assert!(check_projective(&fam, 3).unwrap().passed());
    }

    #[test]
    fn unary_product() {
        let p = unary(rat(1, 3));
        let w = World::parse("P(0) P(1)", p.signature().clone(), 2).unwrap();
        assert_eq!(sip_prob(&p, &w).unwrap(), rat(1, 9));
        let d1 = sip_dist(&p, 1, Budget::default()).unwrap();
        assert_eq!(d1.prob(&World::parse("P(0)", p.signature().clone(), 1).unwrap()), rat(1, 3));
    }

    #[test]
    fn validation_messages() {
        let bad = COLOURED.replace("\"9/10\"}]},\n      {\"theta\": []", "\"8/10\"}]},\n      {\"theta\": []");
        let p = SipParams::from_json(&bad).unwrap();
        let r = p.validate();
        assert!(r.violations.iter().any(|v| v.contains("stage sum ≠ 1 at θ [P(0)]")), "{r}");

        // the directed edge given one coloured endpoint, broken across the two orientations
        let sig = Arc::new(Signature::parse("P/1 E/2").unwrap());
        let mut p = coloured();
        let t = World::parse("P(0)", sig.clone(), 2).unwrap();
        p.set_extension(1, &t, &World::parse("P(0) E(0,1)", sig.clone(), 2).unwrap(), rat(1, 10)).unwrap();
        p.set_extension(1, &t, &World::parse("P(0)", sig.clone(), 2).unwrap(), rat(0, 1)).unwrap();
        let r = p.validate();
        assert!(r.violations.iter().any(|v| v.contains("isomorphism violation")), "{r}");

        let missing = SipParams::from_json(&COLOURED.replace("\"orbit_fill\": true", "\"orbit_fill\": false")).unwrap();
        let r = missing.validate();
        assert!(r.violations.iter().any(|v| v.contains("no parameters for reachable θ [P(1)]")), "{r}");
        assert!(matches!(sip_prob(&missing, &world(&missing, "P(0)", 2)), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn json_round_trip() {
        let p = coloured();
        let again = SipParams::from_json(&p.to_json()).unwrap();
        assert_eq!(again, p);
        assert!(matches!(
            SipParams::from_json(r#"{"signature":["E/2"],"one_traces":[{"true":["E(0,1)"],"prob":"1"}]}"#),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            SipParams::from_json(r#"{"signature":["E/2"],"one_traces":[],"stages":[{"g":1,"entries":[{"theta":["E(0,1)"],"extensions":[]}]}]}"#),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn fit_round_trip() {
        let p = coloured();
        let q = fit_params(&sip_family(&p).unwrap()).unwrap();
        for n in 1..=3 {
            assert_eq!(
                sip_dist(&q, n, Budget::default()).unwrap(),
                sip_dist(&p, n, Budget::default()).unwrap()
            );
        }
        // positive parameters agree on reachable θ
        let reach = p.theta_dist(1).unwrap();
        for t in reach.keys() {
            let a: Vec<_> = p.level(1)[t].iter().filter(|(_, v)| **v != rat(0, 1)).collect();
            let b: Vec<_> = q.level(1)[t].iter().collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fit_of_free_family_is_product() {
        let sig = Arc::new(Signature::parse("E/2").unwrap());
        let w = WeightFn::strict([("E".to_string(), rat(1, 3))]).unwrap();
        let q = fit_params(&FreeFamily::new(w, sig.clone()).unwrap()).unwrap();
        for (_, exts) in q.stage(1) {
            let probs: Vec<Rational> = exts.iter().map(|(_, p)| p.clone()).collect();
            assert_eq!(probs, vec![rat(4, 9), rat(2, 9), rat(2, 9), rat(1, 9)]);
        }
    }

    fn all_equal() -> FnFamily<impl Fn(usize) -> crate::error::Result<Dist> + Sync> {
        let sig = Arc::new(Signature::parse("F/1").unwrap());
        let s = sig.clone();
        FnFamily::new(sig, move |n| {
            let all = World::from_atoms(s.clone(), n, (0..n).map(|i| crate::relational::GroundAtom::new(0, [i]))).unwrap();
            Dist::from_pairs(s.clone(), n, [(all, rat(1, 2)), (World::empty(s.clone(), n), rat(1, 2))])
        })
    }

    #[test]
    fn mixture_is_not_reconstructed() {
        let f = all_equal();
        let q = fit_params(&f).unwrap();
        let d = sip_dist(&q, 2, Budget::default()).unwrap();
        assert_ne!(d, crate::measures::Family::dist_at(&f, 2).unwrap());
        let r = check_ip(&f, 2, 1).unwrap();
        let v = r.failure.clone().unwrap();
        assert_eq!((v.phi.as_str(), v.psi.as_str()), ("F(0)", "F(1)"));
        assert_eq!((v.lhs, v.rhs), (rat(1, 2), rat(1, 4)));
        assert!(r.to_string().starts_with("FAIL IP"));
    }

    #[test]
    fn direct_checks_pass_on_products_and_construction() {
        let sig = Arc::new(Signature::parse("E/2").unwrap());
        let w = WeightFn::strict([("E".to_string(), rat(1, 3))]).unwrap();
        let free = FreeFamily::new(w, sig).unwrap();
        let r = check_sip_direct(&free, 3, 2).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.checked > 0);
        assert!(check_ip(&free, 3, 2).unwrap().passed());
        assert!(check_essential_asymmetry(&free).unwrap().is_none());

        let fam = sip_family(&coloured()).unwrap();
        let r = check_sip_direct(&fam, 3, 2).unwrap();
        assert!(r.passed(), "{r}");
        assert!(check_essential_asymmetry(&fam).unwrap().is_none());
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = coloured();
        assert_eq!(sample_world(&p, 3, 7).unwrap(), sample_world(&p, 3, 7).unwrap());
        let sure = unary(rat(1, 1));
        assert_eq!(sample_world(&sure, 3, 1).unwrap().to_string(), "P(0) P(1) P(2)");
    }
}
