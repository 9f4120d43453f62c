//! The reduced instance after a truncated first stage: terminals close to
//! the top set in `(V, F)` are contracted into it, and the remaining problem
//! is solved at the BFS root.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::embed::tree::VirtualTree;
use crate::exact::q_u;
use crate::graph::{EdgeId, NodeId, Weight, WeightedGraph};
use crate::instance::{IcInstance, Label};
use crate::moat::candidate::TieBreak;
use crate::moat::central::moat_grow_exact;
use crate::moat::MoatError;
use crate::sim::bellman_ford::{distributed_bellman_ford, BfInput};
use crate::sim::bfs::BfsInfo;
use crate::sim::tree::{broadcast, gather, ItemFilter};
use crate::sim::{RunStats, SimConfig, SimError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedInstance {
    /// Group of every node: its top-set node when contracted, else itself.
    pub group: Vec<NodeId>,
    /// Reduced node index of every node.
    pub node_of: Vec<usize>,
    /// Original representative of every reduced node.
    pub rep: Vec<NodeId>,
    pub graph: WeightedGraph,
    /// Original edge inducing each reduced edge.
    pub induced_by: Vec<EdgeId>,
    /// Reduced label of every reduced node.
    pub labels: Vec<Option<Label>>,
    /// Helper forest over `(top node, label)` co-residence pairs.
    pub helper: Vec<(NodeId, Label)>,
    /// Reduced label of every original label.
    pub label_map: BTreeMap<Label, Label>,
}

/// Hop cap of the contraction search.
pub fn contraction_hops(n: usize) -> usize {
    let n = n.max(2) as f64;
    (3.0 * n.sqrt() * n.ln()).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Node(NodeId),
    Label(Label),
}

/// Local union-find keyed by top nodes and labels.
#[derive(Clone, Debug, Default)]
pub struct HelperForest(HashMap<Key, Key>);

impl HelperForest {
    fn find(&mut self, k: Key) -> Key {
        let p = *self.0.get(&k).unwrap_or(&k);
        if p == k {
            return k;
        }
        let r = self.find(p);
        self.0.insert(k, r);
        r
    }

    fn union(&mut self, a: Key, b: Key) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0.insert(ra, rb);
        true
    }
}

impl ItemFilter<(NodeId, NodeId)> for HelperForest {
    fn admit(&mut self, &(v, l): &(NodeId, Label)) -> bool {
        self.union(Key::Node(v), Key::Label(l))
    }
}

/// Builds the reduced instance from the stage-one forest.
pub fn build_reduced_instance(
    inst: &IcInstance,
    forest: &[EdgeId],
    vt: &VirtualTree,
    tree: &[BfsInfo],
    cfg: &SimConfig,
) -> Result<(ReducedInstance, RunStats), SimError> {
    let g = &inst.graph;
    let n = g.n();
    let mut in_f = vec![false; g.m()];
    for &e in forest {
        in_f[e] = true;
    }
    let in_top: Vec<bool> = (0..n).map(|v| vt.top.contains(&v)).collect();
    let inputs = (0..n)
        .map(|v| BfInput {
            source: in_top[v].then(|| (q_u(0), v)),
            relay: true,
            weights: g.neighbors(v).iter().map(|a| in_f[a.edge].then(|| q_u(1))).collect(),
        })
        .collect();
    let (bf, mut stats) = distributed_bellman_ford(g, inputs, Some(contraction_hops(n)), tree, cfg, "contract")?;
    let group: Vec<NodeId> = (0..n)
        .map(|v| match bf[v].src {
            Some(s) if inst.labels[v].is_some() || in_top[v] => s,
            _ => v,
        })
        .collect();

    let items: Vec<Vec<(NodeId, Label)>> = (0..n)
        .map(|v| match inst.labels[v] {
            Some(l) if group[v] != v || in_top[v] => vec![(group[v], l)],
            _ => Vec::new(),
        })
        .collect();
    let (mut helper, s) = gather(g, tree, items, vec![HelperForest::default(); n], cfg, "helper-gather")?;
    stats.absorb(s);
    helper.sort_unstable();
    let (helper, s) = broadcast(g, tree, helper, cfg, "helper-broadcast")?;
    stats.absorb(s);

    // Local at every node: components of the helper forest, named by their least label.
    let mut uf = HelperForest::default();
    for &(v, l) in &helper {
        uf.union(Key::Node(v), Key::Label(l));
    }
    let mut least: HashMap<Key, Label> = HashMap::new();
    let all: Vec<Label> = inst.labels.iter().flatten().copied().collect();
    for &l in &all {
        let r = uf.find(Key::Label(l));
        let e = least.entry(r).or_insert(l);
        *e = (*e).min(l);
    }
    let label_map: BTreeMap<Label, Label> = all.iter().map(|&l| (l, least[&uf.find(Key::Label(l))])).collect();

    let mut rep: Vec<NodeId> = group.clone();
    rep.sort_unstable();
    rep.dedup();
    let index: BTreeMap<NodeId, usize> = rep.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let node_of: Vec<usize> = group.iter().map(|x| index[x]).collect();
    let mut labels = vec![None; rep.len()];
    for v in 0..n {
        if let Some(l) = inst.labels[v] {
            labels[node_of[v]] = Some(label_map[&l]);
        }
    }
    let mut best: BTreeMap<(usize, usize), (Weight, EdgeId)> = BTreeMap::new();
    for (e, x) in g.edges().iter().enumerate() {
        let (a, b) = (node_of[x.u], node_of[x.v]);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        let cand = (x.w, e);
        best.entry(key).and_modify(|c| *c = (*c).min(cand)).or_insert(cand);
    }
    let graph = WeightedGraph::new(rep.len(), best.iter().map(|(&(a, b), &(w, _))| (a, b, w))).expect("reduced graph is valid");
    let induced_by = best.values().map(|&(_, e)| e).collect();
    Ok((
        ReducedInstance {
            group,
            node_of,
            rep,
            graph,
            induced_by,
            labels,
            helper,
            label_map,
        },
        stats,
    ))
}

/// Solves the reduced instance at the BFS root with exact moat growing and
/// maps the chosen edges back to their inducing edges.
pub fn stage2_solve(red: &ReducedInstance, tree: &[BfsInfo], stats: &mut RunStats) -> Result<Vec<EdgeId>, MoatError> {
    let depth = tree.iter().map(|t| t.depth).max().unwrap_or(0);
    stats.charge("stage2-gather", red.graph.m() + depth + 1);
    let inst = IcInstance::new(red.graph.clone(), red.labels.clone()).minimalized();
    if inst.k() == 0 {
        stats.charge("stage2-broadcast", depth + 1);
        return Ok(Vec::new());
    }
    let (sol, _) = moat_grow_exact(&inst, TieBreak::IdAscending)?;
    stats.charge("stage2-broadcast", sol.edges.len() + depth + 1);
    let mut out: Vec<EdgeId> = sol.edges.iter().map(|&e| red.induced_by[e]).collect();
    out.sort_unstable();
    Ok(out)
}
