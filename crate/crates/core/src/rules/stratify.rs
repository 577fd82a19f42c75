use std::collections::{BTreeMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::rules::ast::RuleProgram;

/// Stratum per derived relation; free relations sit at stratum 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratification {
    pub stratum_of: BTreeMap<String, usize>,
}

impl Stratification {
    pub fn max_stratum(&self) -> usize {
        self.stratum_of.values().copied().max().unwrap_or(0)
    }
}

/// Dependency graph on derived relations (node i = derived relation i), edges body → head,
/// weighted `true` when the dependency is negative.
pub(crate) fn dependency_graph(p: &RuleProgram) -> DiGraph<usize, bool> {
    let nfree = p.free_signature().len();
    let nder = p.derived_signature().len();
    let mut g = DiGraph::with_capacity(nder, p.rules().len());
    for i in 0..nder {
        g.add_node(i);
    }
    for r in p.rules() {
        let h = NodeIndex::new(r.head.pred - nfree);
        for (a, positive) in r.body_atoms() {
            if a.pred >= nfree {
                g.update_edge(NodeIndex::new(a.pred - nfree), h, !positive);
                if !positive {
                    // update_edge keeps one edge per pair; a negative occurrence wins
                    let e = g.find_edge(NodeIndex::new(a.pred - nfree), h).unwrap();
                    g[e] = true;
                }
            }
        }
    }
    g
}

/// Strongly connected components of the dependency graph in evaluation (topological) order.
pub(crate) fn evaluation_order(p: &RuleProgram) -> Vec<(Vec<usize>, bool)> {
    let g = dependency_graph(p);
    let mut sccs = tarjan_scc(&g);
    sccs.reverse();
    sccs.into_iter()
        .map(|c| {
            let recursive = c.len() > 1 || g.find_edge(c[0], c[0]).is_some();
            let mut members: Vec<usize> = c.iter().map(|n| n.index()).collect();
            members.sort_unstable();
            (members, recursive)
        })
        .collect()
}

fn negative_cycle(p: &RuleProgram) -> Vec<String> {
    let g = dependency_graph(p);
    let nfree = p.free_signature().len();
    for comp in tarjan_scc(&g) {
        let inside = |n: NodeIndex| comp.contains(&n);
        for e in g.edge_indices() {
            let (u, v) = g.edge_endpoints(e).unwrap();
            if !g[e] || !inside(u) || !inside(v) {
                continue;
            }
            // shortest path v ⇝ u inside the component closes the cycle u → v ⇝ u
            let mut prev: BTreeMap<NodeIndex, NodeIndex> = BTreeMap::new();
            let mut queue = VecDeque::from([v]);
            let mut seen = vec![v];
            while let Some(x) = queue.pop_front() {
                if x == u {
                    break;
                }
                for y in g.neighbors(x) {
                    if inside(y) && !seen.contains(&y) {
                        seen.push(y);
                        prev.insert(y, x);
                        queue.push_back(y);
                    }
                }
            }
            let mut path = vec![u];
            let mut x = u;
            while x != v {
                x = prev[&x];
                path.push(x);
            }
            path.reverse(); // v ... u
            let mut cycle: Vec<usize> = std::iter::once(u)
                .chain(path.into_iter().filter(|&n| n != u))
                .map(|n| n.index())
                .collect();
            // report in "depends on" direction, starting at the earliest declared relation
            cycle.reverse();
            let start = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap();
            cycle.rotate_left(start);
            return cycle.into_iter().map(|i| p.pred_name(i + nfree).to_string()).collect();
        }
    }
    Vec::new()
}

/// Least stratification: derived relations start at 1; heads sit at or above positive body
/// relations and strictly above negated ones.
pub fn stratify(p: &RuleProgram) -> Result<Stratification> {
    let nfree = p.free_signature().len();
    let nder = p.derived_signature().len();
    let mut s = vec![1usize; nder];
    let stratum = |s: &[usize], pred: usize| if pred < nfree { 0 } else { s[pred - nfree] };
    loop {
        let mut changed = false;
        for r in p.rules() {
            let h = r.head.pred - nfree;
            for (a, positive) in r.body_atoms() {
                let need = stratum(&s, a.pred) + usize::from(!positive);
                if s[h] < need {
                    s[h] = need;
                    changed = true;
                    if need > nder + 1 {
                        return Err(Error::Unstratifiable(negative_cycle(p)));
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Stratification {
        stratum_of: p
            .derived_signature()
            .relations()
            .iter()
            .zip(s)
            .map(|(r, k)| (r.name.clone(), k))
            .collect(),
    })
}
