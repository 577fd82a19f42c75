use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Budget, Error, Result};
use crate::measures::{exchangeability_failure, Family, Rational};
use crate::relational::Bits;
use crate::sip::params::{permutation_tables, permute, shape, SipParams};

/// Reads construction parameters off a family: the 1-trace distribution at `n = 1`, then
/// `p_{θ,γ} = P(γ) / P(θ)` at `n = g+1`.
///
/// θ that the fitted lower levels reach but the family gives probability zero are filled
/// from an isomorphic positive θ, or uniformly. The result is a fit, not a certificate:
/// compare `sip_dist` of the result with the family to confirm it.
pub fn fit_params(f: &dyn Family) -> Result<SipParams> {
    let sig = f.signature().clone();
    let mut p = SipParams::new(sig.clone())?;
    for g in 0..p.max_arity() {
        let d = f.dist_at(g + 1)?;
        if let Some(fail) = exchangeability_failure(&d)? {
            return Err(Error::Fit(format!("input is not exchangeable: {fail}")));
        }
        let sh = shape(&sig, g);
        let mut marg: BTreeMap<Bits, Rational> = BTreeMap::new();
        let mut joint: BTreeMap<Bits, BTreeMap<Bits, Rational>> = BTreeMap::new();
        for (bits, q) in d.bit_map() {
            let t = bits.and(&sh.low);
            *marg.entry(t.clone()).or_insert_with(Rational::zero) += q;
            *joint.entry(t).or_default().entry(bits.and(&sh.new)).or_insert_with(Rational::zero) += q;
        }
        for (t, exts) in joint.iter_mut() {
            for q in exts.values_mut() {
                *q /= &marg[t];
            }
        }
        let reachable = p.theta_dist(g)?;
        let tables = permutation_tables(&sig, g);
        let new_atoms = sh.new.count_ones();
        let mut level = joint.clone();
        for t in reachable.keys().filter(|t| !joint.contains_key(*t)) {
            let donor = tables
                .iter()
                .find_map(|table| joint.iter().find(|(s, _)| permute(s, table) == *t).map(|(s, e)| (s, e, table)));
            let exts = match donor {
                Some((_, e, table)) => e.iter().map(|(new, q)| (permute(new, table), q.clone())).collect(),
                None => uniform(&sh.new, new_atoms)?,
            };
            level.insert(t.clone(), exts);
        }
        *p.level_mut(g) = level;
    }
    let report = p.validate();
    if !report.passed() {
        return Err(Error::Fit(report.violations.join("; ")));
    }
    Ok(p)
}

fn uniform(mask: &Bits, atoms: usize) -> Result<BTreeMap<Bits, Rational>> {
    Budget::default().check("uniform extensions", atoms)?;
    let positions: Vec<usize> = mask.iter_ones().collect();
    let each = Rational::one() / Rational::from_integer((1u64 << atoms).into());
    Ok((0..1u64 << atoms)
        .map(|code| {
            let mut b = mask.and_not(mask);
            for (i, &pos) in positions.iter().enumerate() {
                if code >> i & 1 == 1 {
                    b.set(pos, true);
                }
            }
            (b, each.clone())
        })
        .collect())
}
