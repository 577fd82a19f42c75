use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::dist::Dist;
use crate::relational::Signature;

/// A size-indexed generator of distributions. `dist_at` must be deterministic in `n`.
pub trait Family: Sync {
    fn signature(&self) -> &Arc<Signature>;
    fn dist_at(&self, n: usize) -> Result<Dist>;
}

impl<F: Family + ?Sized> Family for &F {
    fn signature(&self) -> &Arc<Signature> {
        (**self).signature()
    }

    fn dist_at(&self, n: usize) -> Result<Dist> {
        (**self).dist_at(n)
    }
}

impl<F: Family + ?Sized + Send> Family for Box<F> {
    fn signature(&self) -> &Arc<Signature> {
        (**self).signature()
    }

    fn dist_at(&self, n: usize) -> Result<Dist> {
        (**self).dist_at(n)
    }
}

/// Family from a closure.
pub struct FnFamily<F> {
    sig: Arc<Signature>,
    f: F,
}

impl<F> FnFamily<F>
where
    F: Fn(usize) -> Result<Dist> + Sync,
{
    pub fn new(sig: Arc<Signature>, f: F) -> Self {
        FnFamily { sig, f }
    }
}

impl<F> Family for FnFamily<F>
where
    F: Fn(usize) -> Result<Dist> + Sync,
{
    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn dist_at(&self, n: usize) -> Result<Dist> {
        (self.f)(n)
    }
}

/// Family given by an explicit table of distributions, one per domain size.
/// Sizes outside the table are an error.
#[derive(Clone, Debug)]
pub struct TableFamily {
    sig: Arc<Signature>,
    dists: BTreeMap<usize, Dist>,
}

impl TableFamily {
    pub fn new(sig: Arc<Signature>, dists: impl IntoIterator<Item = Dist>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for d in dists {
            if d.signature() != &sig {
                return Err(Error::InvalidDist(format!(
                    "table entry over {} in a family over {sig}",
                    d.signature()
                )));
            }
            table.insert(d.domain_size(), d);
        }
        Ok(TableFamily { sig, dists: table })
    }
}

impl Family for TableFamily {
    fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    fn dist_at(&self, n: usize) -> Result<Dist> {
        self.dists
            .get(&n)
            .cloned()
            .ok_or_else(|| Error::InvalidDist(format!("no distribution tabulated at n={n}")))
    }
}
