use std::fmt;

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::Result;
use crate::measures::dist::{marginalize_domain, Dist};
use crate::measures::family::Family;
use crate::measures::rational::{format_rational, Rational};
use crate::relational::{apply_map, DomainMap, World};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProjectivityFailure {
    /// `dist_at(n)` gives `world` and its image under `permutation` different probabilities.
    NotExchangeable {
        n: usize,
        permutation: DomainMap,
        world: World,
        p_world: Rational,
        p_image: Rational,
    },
    /// The marginal of `dist_at(n)` on `{0..m-1}` disagrees with `dist_at(m)` at `world`.
    Inconsistent {
        n: usize,
        m: usize,
        world: World,
        marginal: Rational,
        direct: Rational,
    },
}

impl fmt::Display for ProjectivityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectivityFailure::NotExchangeable {
                n,
                permutation,
                world,
                p_world,
                p_image,
            } => write!(
                f,
                "exchangeability n={n} perm={permutation} world=[{world}] p={} p(perm)={}",
                format_rational(p_world),
                format_rational(p_image)
            ),
            ProjectivityFailure::Inconsistent {
                n,
                m,
                world,
                marginal,
                direct,
            } => write!(
                f,
                "marginal n={n} m={m} world=[{world}] marginal={} direct={}",
                format_rational(marginal),
                format_rational(direct)
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectivityReport {
    pub max_n: usize,
    pub failure: Option<ProjectivityFailure>,
}

impl ProjectivityReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for ProjectivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(f, "PASS\nprojective up to n={}", self.max_n),
            Some(e) => write!(f, "FAIL {e}"),
        }
    }
}

/// Adjacent transpositions generate every permutation. Each is an involution, so a
/// violation always shows up at some support world.
pub(crate) fn exchangeability_failure(d: &Dist) -> Result<Option<ProjectivityFailure>> {
    let n = d.domain_size();
    for i in 0..n.saturating_sub(1) {
        let t = DomainMap::transposition(n, i, i + 1);
        for (w, p) in d.iter() {
            let img = apply_map(&w, &t)?;
            let q = d.prob(&img);
            if &q != p {
                return Ok(Some(ProjectivityFailure::NotExchangeable {
                    n,
                    permutation: t,
                    world: w,
                    p_world: p.clone(),
                    p_image: q,
                }));
            }
        }
    }
    Ok(None)
}

fn consistency_failure(big: &Dist, small: &Dist) -> Result<Option<ProjectivityFailure>> {
    let n = big.domain_size();
    let m = small.domain_size();
    let marg = marginalize_domain(big, &DomainMap::inclusion(m, n))?;
    if &marg == small {
        return Ok(None);
    }
    // first disagreeing world in bitmask order over the union of both supports
    let mut keys: Vec<_> = marg.bit_map().keys().chain(small.bit_map().keys()).collect();
    keys.sort();
    keys.dedup();
    for b in keys {
        let a = marg.prob_bits(b).cloned().unwrap_or_else(Rational::zero);
        let c = small.prob_bits(b).cloned().unwrap_or_else(Rational::zero);
        if a != c {
            return Ok(Some(ProjectivityFailure::Inconsistent {
                n,
                m,
                world: World::from_bits(small.signature().clone(), m, b.clone()),
                marginal: a,
                direct: c,
            }));
        }
    }
    Ok(None)
}

/// Exchangeability of every `dist_at(n)` and marginal consistency along every inclusion
/// `{0..m-1} ⊆ {0..n-1}`, for `n ≤ max_n`. Inclusions and permutations generate all injections.
pub fn check_projective(f: &dyn Family, max_n: usize) -> Result<ProjectivityReport> {
    let dists: Vec<Dist> = (1..=max_n)
        .into_par_iter()
        .map(|n| f.dist_at(n))
        .collect::<Result<_>>()?;
    for (i, d) in dists.iter().enumerate() {
        if let Some(e) = exchangeability_failure(d)? {
            return Ok(ProjectivityReport { max_n, failure: Some(e) });
        }
        for small in &dists[..i] {
            if let Some(e) = consistency_failure(d, small)? {
                return Ok(ProjectivityReport { max_n, failure: Some(e) });
            }
        }
    }
    Ok(ProjectivityReport { max_n, failure: None })
}
