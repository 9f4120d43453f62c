//! Exact Steiner Forest optima, minimal subforests and feasibility checks.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use petgraph::unionfind::UnionFind;

use crate::exact::{q_u, Q};
use crate::graph::{EdgeId, NodeId, Weight, WeightedGraph};
use crate::instance::{edge_union_find, is_forest, ForestSolution, SteinerInstance};

/// Largest edge count for subset enumeration.
pub const MAX_ENUM_EDGES: usize = 24;
/// Largest number of demand terminals for the terminal dynamic program.
pub const MAX_DP_TERMINALS: usize = 10;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for the exact oracle ({edges} edges, {terminals} terminals)")]
    TooLarge { edges: usize, terminals: usize },
    #[error("edge set does not solve the instance")]
    Infeasible,
    #[error("edge set contains a cycle")]
    NotAForest,
    #[error("optimum is 0 but the solution has positive weight")]
    ZeroOptimum,
}

/// Terminals that carry a connectivity demand (members of groups of size >= 2).
fn demand_terminals(groups: &[Vec<NodeId>]) -> usize {
    groups.iter().map(Vec::len).sum()
}

pub fn check_feasible(inst: &SteinerInstance, edges: &[EdgeId]) -> bool {
    let uf = edge_union_find(inst.graph(), edges);
    inst.demand_groups()
        .iter()
        .all(|grp| grp.iter().all(|&v| uf.equiv(v, grp[0])))
}

/// Minimum-weight feasible edge set. Among optima of equal weight the
/// lexicographically smallest sorted edge-id sequence is returned.
pub fn exact_optimum(inst: &SteinerInstance) -> Result<ForestSolution, OracleError> {
    let g = inst.graph();
    let groups = inst.demand_groups();
    if g.m() <= MAX_ENUM_EDGES {
        Ok(optimum_by_enumeration(inst))
    } else if demand_terminals(&groups) <= MAX_DP_TERMINALS {
        Ok(optimum_by_terminal_dp(inst))
    } else {
        Err(OracleError::TooLarge {
            edges: g.m(),
            terminals: demand_terminals(&groups),
        })
    }
}

pub fn optimum_weight(inst: &SteinerInstance) -> Result<Weight, OracleError> {
    let g = inst.graph();
    let groups = inst.demand_groups();
    if demand_terminals(&groups) <= MAX_DP_TERMINALS {
        Ok(forest_dp_weight(g, &groups, &vec![Cost::Free; g.m()]).expect("connected graph"))
    } else {
        exact_optimum(inst).map(|s| s.weight)
    }
}

/// Ratio `W(F) / OPT`.
pub fn approx_ratio(inst: &SteinerInstance, edges: &[EdgeId]) -> Result<Q, OracleError> {
    let opt = optimum_weight(inst)?;
    let w = inst.graph().total_weight(edges.iter().copied());
    if opt == 0 {
        return if w == 0 { Ok(q_u(1)) } else { Err(OracleError::ZeroOptimum) };
    }
    Ok(q_u(w) / q_u(opt))
}

/// Branch and bound over edge subsets in edge-id order, including each edge
/// before excluding it. Exponential in `|E|`; intended for `|E| <= 24`.
pub fn optimum_by_enumeration(inst: &SteinerInstance) -> ForestSolution {
    let g = inst.graph();
    let groups = inst.demand_groups();
    let mut search = Enum {
        g,
        groups: &groups,
        chosen: vec![false; g.m()],
        best: None,
        best_w: Weight::MAX,
    };
    search.dfs(0, 0);
    let chosen = search.best.expect("connected graph admits a solution");
    ForestSolution::new(g, (0..g.m()).filter(|&e| chosen[e]).collect())
}

struct Enum<'a> {
    g: &'a WeightedGraph,
    groups: &'a [Vec<NodeId>],
    chosen: Vec<bool>,
    best: Option<Vec<bool>>,
    best_w: Weight,
}

impl Enum<'_> {
    fn satisfied(&self, upto: Option<usize>) -> bool {
        let mut uf = UnionFind::<usize>::new(self.g.n());
        for (e, x) in self.g.edges().iter().enumerate() {
            let usable = match upto {
                None => self.chosen[e],
                Some(i) => self.chosen[e] || e >= i,
            };
            if usable {
                uf.union(x.u, x.v);
            }
        }
        self.groups
            .iter()
            .all(|grp| grp.iter().all(|&v| uf.equiv(v, grp[0])))
    }

    fn dfs(&mut self, i: usize, w: Weight) {
        if w >= self.best_w {
            return;
        }
        if self.satisfied(None) {
            self.best_w = w;
            self.best = Some(self.chosen.clone());
            return;
        }
        if i == self.g.m() || !self.satisfied(Some(i)) {
            return;
        }
        self.chosen[i] = true;
        self.dfs(i + 1, w + self.g.edge(i).w);
        self.chosen[i] = false;
        self.dfs(i + 1, w);
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cost {
    Free,
    Forced,
    Banned,
}

/// Dreyfus–Wagner Steiner tree costs for every subset of `terms`, on the
/// graph with forced edges at cost 0 and banned edges removed.
fn steiner_tree_costs(g: &WeightedGraph, terms: &[NodeId], cost: &[Cost]) -> Vec<Option<Weight>> {
    let n = g.n();
    let t = terms.len();
    let full = 1usize << t;
    const INF: Weight = Weight::MAX / 4;
    let mut dp = vec![vec![INF; n]; full];
    let ew = |e: EdgeId| match cost[e] {
        Cost::Free => Some(g.edge(e).w),
        Cost::Forced => Some(0),
        Cost::Banned => None,
    };
    let relax = |row: &mut Vec<Weight>| {
        let mut heap: BinaryHeap<Reverse<(Weight, NodeId)>> =
            row.iter().enumerate().filter(|(_, &d)| d < INF).map(|(v, &d)| Reverse((d, v))).collect();
        while let Some(Reverse((d, x))) = heap.pop() {
            if d != row[x] {
                continue;
            }
            for a in g.neighbors(x) {
                if let Some(w) = ew(a.edge) {
                    if d + w < row[a.to] {
                        row[a.to] = d + w;
                        heap.push(Reverse((d + w, a.to)));
                    }
                }
            }
        }
    };
    for (i, &v) in terms.iter().enumerate() {
        dp[1 << i][v] = 0;
        relax(&mut dp[1 << i]);
    }
    for mask in 1..full {
        if mask.count_ones() < 2 {
            continue;
        }
        let low = mask & mask.wrapping_neg();
        let mut row = vec![INF; n];
        // Enumerate proper submasks that contain the lowest bit.
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let a = sub | low;
            if a != mask {
                let b = mask ^ a;
                for v in 0..n {
                    let c = dp[a][v] + dp[b][v];
                    if c < row[v] {
                        row[v] = c;
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        relax(&mut row);
        dp[mask] = row;
    }
    dp.into_iter()
        .map(|row| row.into_iter().min().filter(|&d| d < INF))
        .collect()
}

/// Optimal forest weight for the given demand groups under `cost`.
fn forest_dp_weight(g: &WeightedGraph, groups: &[Vec<NodeId>], cost: &[Cost]) -> Option<Weight> {
    let terms: Vec<NodeId> = groups.iter().flatten().copied().collect();
    if terms.is_empty() {
        return Some(0);
    }
    let st = steiner_tree_costs(g, &terms, cost);
    // Bit mask of each group within `terms`.
    let mut offset = 0;
    let group_mask: Vec<usize> = groups
        .iter()
        .map(|grp| {
            let m = ((1usize << grp.len()) - 1) << offset;
            offset += grp.len();
            m
        })
        .collect();
    let k = groups.len();
    let mut f: Vec<Option<Weight>> = vec![None; 1 << k];
    f[0] = Some(0);
    for gm in 1usize..(1 << k) {
        let low = gm & gm.wrapping_neg();
        let rest = gm ^ low;
        let mut sub = rest;
        let mut best: Option<Weight> = None;
        loop {
            let part = sub | low;
            let tmask: usize = (0..k).filter(|&i| part >> i & 1 == 1).map(|i| group_mask[i]).sum();
            if let (Some(a), Some(b)) = (st[tmask], f[gm ^ part]) {
                best = Some(best.map_or(a + b, |x| x.min(a + b)));
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        f[gm] = best;
    }
    f[(1 << k) - 1]
}

/// Optimum via the terminal dynamic program, canonicalized by fixing edges
/// one at a time in id order: an edge is kept whenever some optimum containing
/// all kept edges and avoiding all dropped ones also contains it.
pub fn optimum_by_terminal_dp(inst: &SteinerInstance) -> ForestSolution {
    let g = inst.graph();
    let groups = inst.demand_groups();
    let mut cost = vec![Cost::Free; g.m()];
    let opt = forest_dp_weight(g, &groups, &cost).expect("connected graph admits a solution");
    let mut forced_w = 0;
    for e in 0..g.m() {
        if forced_w == opt {
            cost[e] = Cost::Banned;
            continue;
        }
        cost[e] = Cost::Forced;
        let with = forest_dp_weight(g, &groups, &cost).map(|w| w + forced_w + g.edge(e).w);
        if with == Some(opt) {
            forced_w += g.edge(e).w;
        } else {
            cost[e] = Cost::Banned;
        }
    }
    ForestSolution::new(g, (0..g.m()).filter(|&e| cost[e] == Cost::Forced).collect())
}

/// The inclusion-minimal feasible subset of a feasible forest: the union of
/// the tree paths between same-component terminals.
pub fn minimal_subforest(inst: &SteinerInstance, edges: &[EdgeId]) -> Result<ForestSolution, OracleError> {
    let g = inst.graph();
    if !is_forest(g, edges) {
        return Err(OracleError::NotAForest);
    }
    if !check_feasible(inst, edges) {
        return Err(OracleError::Infeasible);
    }
    let n = g.n();
    let mut adj: Vec<Vec<(NodeId, EdgeId)>> = vec![Vec::new(); n];
    for &e in edges {
        let x = g.edge(e);
        adj[x.u].push((x.v, e));
        adj[x.v].push((x.u, e));
    }
    // Root every tree; record a post-order and parent edges.
    let mut parent: Vec<Option<(NodeId, EdgeId)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for r in 0..n {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let mut stack = vec![r];
        while let Some(x) = stack.pop() {
            order.push(x);
            for &(y, e) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some((x, e));
                    stack.push(y);
                }
            }
        }
    }
    let mut keep = Vec::new();
    let mut count = vec![0usize; n];
    for grp in inst.demand_groups() {
        count.iter_mut().for_each(|c| *c = 0);
        for &v in &grp {
            count[v] += 1;
        }
        for &x in order.iter().rev() {
            if let Some((p, e)) = parent[x] {
                // Feasibility puts the whole group in this tree.
                if count[x] > 0 && count[x] < grp.len() {
                    keep.push(e);
                }
                count[p] += count[x];
            }
        }
    }
    Ok(ForestSolution::new(g, keep))
}
