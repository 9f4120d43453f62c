//! Weighted undirected graphs, exact distances and the parameters D, WD and s.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use num_traits::{One, Zero};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::exact::{q_u, Q};

pub type NodeId = usize;
pub type EdgeId = usize;
pub type Weight = u64;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("parallel edge {0}-{1}")]
    ParallelEdge(NodeId, NodeId),
    #[error("edge {0}-{1} has weight 0")]
    ZeroWeight(NodeId, NodeId),
    #[error("node {0} out of range")]
    NodeOutOfRange(NodeId),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub w: Weight,
}

impl Edge {
    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// One adjacency entry: neighbor, weight of the connecting edge, edge id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arc {
    pub to: NodeId,
    pub w: Weight,
    pub edge: EdgeId,
}

/// Simple undirected graph with positive integer weights. Node identifiers are
/// the indices `0..n`. Edges are stored with `u < v`, sorted by `(u, v)`;
/// edge ids index that list. Adjacency lists are sorted by neighbor id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<Arc>>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<(NodeId, NodeId, Weight)>,
}

impl TryFrom<RawGraph> for WeightedGraph {
    type Error = GraphError;
    fn try_from(r: RawGraph) -> Result<Self, GraphError> {
        WeightedGraph::new(r.n, r.edges)
    }
}

impl From<WeightedGraph> for RawGraph {
    fn from(g: WeightedGraph) -> Self {
        RawGraph {
            n: g.n,
            edges: g.edges.iter().map(|e| (e.u, e.v, e.w)).collect(),
        }
    }
}

impl WeightedGraph {
    /// Builds a graph; edges may be given in any order and orientation.
    /// Connectivity is not required here, see [`WeightedGraph::is_connected`].
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId, Weight)>,
    ) -> Result<Self, GraphError> {
        let mut list = Vec::new();
        for (a, b, w) in edges {
            if a >= n {
                return Err(GraphError::NodeOutOfRange(a));
            }
            if b >= n {
                return Err(GraphError::NodeOutOfRange(b));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if w == 0 {
                return Err(GraphError::ZeroWeight(a, b));
            }
            list.push(Edge {
                u: a.min(b),
                v: a.max(b),
                w,
            });
        }
        list.sort();
        for pair in list.windows(2) {
            if pair[0].u == pair[1].u && pair[0].v == pair[1].v {
                return Err(GraphError::ParallelEdge(pair[0].u, pair[0].v));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for (i, e) in list.iter().enumerate() {
            adj[e.u].push(Arc {
                to: e.v,
                w: e.w,
                edge: i,
            });
            adj[e.v].push(Arc {
                to: e.u,
                w: e.w,
                edge: i,
            });
        }
        for a in &mut adj {
            a.sort_by_key(|x| x.to);
        }
        Ok(WeightedGraph {
            n,
            edges: list,
            adj,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    pub fn neighbors(&self, v: NodeId) -> &[Arc] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        let list = &self.adj[a];
        list.binary_search_by_key(&b, |x| x.to)
            .ok()
            .map(|i| list[i].edge)
    }

    pub fn max_weight(&self) -> Weight {
        self.edges.iter().map(|e| e.w).max().unwrap_or(0)
    }

    pub fn total_weight(&self, es: impl IntoIterator<Item = EdgeId>) -> Weight {
        es.into_iter().map(|e| self.edges[e].w).sum()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        self.bfs_hops(0).iter().all(|d| d.is_some())
    }

    /// Unweighted hop distances from `src`.
    pub fn bfs_hops(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].unwrap();
            for a in &self.adj[x] {
                if dist[a.to].is_none() {
                    dist[a.to] = Some(d + 1);
                    queue.push_back(a.to);
                }
            }
        }
        dist
    }

    /// Weighted distances from `src`.
    pub fn dijkstra(&self, src: NodeId) -> Vec<Option<Weight>> {
        self.dijkstra_hops(src)
            .into_iter()
            .map(|x| x.map(|(d, _)| d))
            .collect()
    }

    /// Distances from `src` paired with the fewest hops over all
    /// minimum-weight paths.
    pub fn dijkstra_hops(&self, src: NodeId) -> Vec<Option<(Weight, usize)>> {
        let mut best: Vec<Option<(Weight, usize)>> = vec![None; self.n];
        let mut heap = BinaryHeap::new();
        best[src] = Some((0, 0));
        heap.push(Reverse((0u64, 0usize, src)));
        while let Some(Reverse((d, h, x))) = heap.pop() {
            if best[x] != Some((d, h)) {
                continue;
            }
            for a in &self.adj[x] {
                let cand = (d + a.w, h + 1);
                if best[a.to].is_none_or(|b| cand < b) {
                    best[a.to] = Some(cand);
                    heap.push(Reverse((cand.0, cand.1, a.to)));
                }
            }
        }
        best
    }

    /// Parses the text format: `n m` on the first line, then `m` lines `u v w`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let (n, m) = parse_header(lines.next())?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            edges.push(parse_edge_line(lines.next())?);
        }
        WeightedGraph::new(n, edges)
    }

    /// Serializes in the text format, edges in canonical order.
    pub fn format(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.m());
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.u, e.v, e.w);
        }
        s
    }
}

pub(crate) fn parse_header(line: Option<&str>) -> Result<(usize, usize), GraphError> {
    let line = line.ok_or_else(|| GraphError::Parse("missing header".into()))?;
    let nums: Vec<usize> = line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| GraphError::Parse(format!("bad header {line:?}"))))
        .collect::<Result<_, _>>()?;
    match nums[..] {
        [n, m] => Ok((n, m)),
        _ => Err(GraphError::Parse(format!("bad header {line:?}"))),
    }
}

pub(crate) fn parse_edge_line(line: Option<&str>) -> Result<(NodeId, NodeId, Weight), GraphError> {
    let line = line.ok_or_else(|| GraphError::Parse("missing edge line".into()))?;
    let nums: Vec<u64> = line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| GraphError::Parse(format!("bad edge {line:?}"))))
        .collect::<Result<_, _>>()?;
    match nums[..] {
        [u, v, w] => Ok((u as NodeId, v as NodeId, w)),
        _ => Err(GraphError::Parse(format!("bad edge {line:?}"))),
    }
}

/// All-pairs distances and the derived diameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphMetrics {
    dist: Vec<Vec<Weight>>,
    hops: Vec<Vec<usize>>,
    /// Unweighted (hop) diameter.
    pub d: usize,
    /// Weighted diameter.
    pub wd: Weight,
    /// Shortest-path diameter: max over pairs of the fewest hops among
    /// minimum-weight paths.
    pub s: usize,
}

impl GraphMetrics {
    pub fn wd_between(&self, a: NodeId, b: NodeId) -> Weight {
        self.dist[a][b]
    }

    /// Fewest hops over all minimum-weight `a`–`b` paths.
    pub fn sp_hops(&self, a: NodeId, b: NodeId) -> usize {
        self.hops[a][b]
    }

    pub fn row(&self, a: NodeId) -> &[Weight] {
        &self.dist[a]
    }
}

pub fn all_pairs_shortest_paths(g: &WeightedGraph) -> Result<GraphMetrics, GraphError> {
    let n = g.n();
    let mut dist = Vec::with_capacity(n);
    let mut hops = Vec::with_capacity(n);
    let (mut d, mut wd, mut s) = (0, 0, 0);
    for v in 0..n {
        let row = g.dijkstra_hops(v);
        let mut dr = Vec::with_capacity(n);
        let mut hr = Vec::with_capacity(n);
        for x in row {
            let (w, h) = x.ok_or(GraphError::DisconnectedGraph)?;
            wd = wd.max(w);
            s = s.max(h);
            dr.push(w);
            hr.push(h);
        }
        for h in g.bfs_hops(v).into_iter().flatten() {
            d = d.max(h);
        }
        dist.push(dr);
        hops.push(hr);
    }
    Ok(GraphMetrics {
        dist,
        hops,
        d,
        wd,
        s,
    })
}

/// The canonical least-weight path from `a` to `b`: the lexicographically
/// smallest node sequence among all minimum-weight paths.
pub fn canonical_path(g: &WeightedGraph, m: &GraphMetrics, a: NodeId, b: NodeId) -> Vec<NodeId> {
    let mut path = vec![a];
    let mut x = a;
    while x != b {
        let rest = m.wd_between(x, b);
        let next = g
            .neighbors(x)
            .iter()
            .find(|arc| arc.w + m.wd_between(arc.to, b) == rest)
            .expect("some neighbor lies on a shortest path");
        x = next.to;
        path.push(x);
    }
    path
}

/// Edge ids along a node sequence.
pub fn path_edges(g: &WeightedGraph, path: &[NodeId]) -> Vec<EdgeId> {
    path.windows(2)
        .map(|p| g.edge_between(p[0], p[1]).expect("path uses graph edges"))
        .collect()
}

/// The closed ball of radius `radius` around `center`, including the
/// fractions of edges it covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallView {
    pub center: NodeId,
    pub radius: Q,
    /// Nodes `u` with `Wd(center, u) <= radius`, ascending.
    pub interior: Vec<NodeId>,
    /// Every edge with a positive covered fraction, ascending by edge id.
    /// Fractions lie in (0, 1].
    pub edges: Vec<(EdgeId, Q)>,
}

impl BallView {
    pub fn contains(&self, v: NodeId) -> bool {
        self.interior.binary_search(&v).is_ok()
    }

    pub fn fraction(&self, e: EdgeId) -> Q {
        match self.edges.binary_search_by_key(&e, |x| x.0) {
            Ok(i) => self.edges[i].1.clone(),
            Err(_) => Q::zero(),
        }
    }

    /// Edges covered only partially.
    pub fn boundary(&self) -> impl Iterator<Item = &(EdgeId, Q)> {
        self.edges.iter().filter(|(_, f)| !f.is_one())
    }
}

/// Covered fraction of the edge `{a, b}` by a ball reaching `a` with slack
/// `r - d_a` and `b` with slack `r - d_b`: the part of the edge within
/// distance `r` of the center, divided by the edge weight.
pub fn edge_fraction(r: &Q, da: Weight, db: Weight, w: Weight) -> Q {
    let slack = |d: Weight| {
        let x = r - q_u(d);
        if x > Q::zero() {
            x
        } else {
            Q::zero()
        }
    };
    let f = (slack(da) + slack(db)) / q_u(w);
    if f > Q::one() {
        Q::one()
    } else {
        f
    }
}

pub fn ball(g: &WeightedGraph, m: &GraphMetrics, center: NodeId, radius: &Q) -> BallView {
    let row = m.row(center);
    let interior = (0..g.n()).filter(|&u| q_u(row[u]) <= *radius).collect();
    let edges = g
        .edges()
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let f = edge_fraction(radius, row[e.u], row[e.v], e.w);
            (!f.is_zero()).then_some((i, f))
        })
        .collect();
    BallView {
        center,
        radius: radius.clone(),
        interior,
        edges,
    }
}

/// Minimum spanning forest edges by Kruskal, ties by edge id.
pub fn mst_edges(g: &WeightedGraph) -> Vec<EdgeId> {
    let mut order: Vec<EdgeId> = (0..g.m()).collect();
    order.sort_by_key(|&e| (g.edge(e).w, e));
    let mut uf = UnionFind::<usize>::new(g.n());
    order
        .into_iter()
        .filter(|&e| {
            let x = g.edge(e);
            uf.union(x.u, x.v)
        })
        .collect()
}

pub fn mst_weight(g: &WeightedGraph) -> Weight {
    g.total_weight(mst_edges(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{q, q_frac};
    use crate::harness::gen::random_connected;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize, w: Weight) -> WeightedGraph {
        WeightedGraph::new(n, (1..n).map(|i| (i - 1, i, w))).unwrap()
    }

    fn triangle() -> WeightedGraph {
        // a=0, b=1, c=2
        WeightedGraph::new(3, [(0, 1, 2), (1, 2, 1), (2, 0, 1)]).unwrap()
    }

    #[test]
    fn unit_path_metrics() {
        let m = all_pairs_shortest_paths(&path(4, 1)).unwrap();
        assert_eq!((m.s, m.d, m.wd), (3, 3, 3));
    }

    #[test]
    fn triangle_metrics() {
        let g = triangle();
        let m = all_pairs_shortest_paths(&g).unwrap();
        assert_eq!(m.wd_between(0, 1), 2);
        // a–b direct and a–c–b both weigh 2; the direct edge has one hop.
        assert_eq!(m.sp_hops(0, 1), 1);
        assert_eq!(m.s, 1);
        assert_eq!(canonical_path(&g, &m, 0, 1), vec![0, 1]);
    }

    #[test]
    fn self_distance_zero() {
        let g = triangle();
        let m = all_pairs_shortest_paths(&g).unwrap();
        for v in 0..3 {
            assert_eq!(m.wd_between(v, v), 0);
        }
    }

    #[test]
    fn disconnected_rejected() {
        let g = WeightedGraph::new(3, [(0, 1, 1)]).unwrap();
        assert_eq!(all_pairs_shortest_paths(&g), Err(GraphError::DisconnectedGraph));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(WeightedGraph::new(2, [(0, 0, 1)]), Err(GraphError::SelfLoop(0)));
        assert_eq!(WeightedGraph::new(2, [(0, 1, 0)]), Err(GraphError::ZeroWeight(0, 1)));
        assert_eq!(
            WeightedGraph::new(2, [(0, 1, 1), (1, 0, 2)]),
            Err(GraphError::ParallelEdge(0, 1))
        );
        assert_eq!(WeightedGraph::new(2, [(0, 2, 1)]), Err(GraphError::NodeOutOfRange(2)));
    }

    #[test]
    fn text_roundtrip() {
        let g = WeightedGraph::new(4, [(3, 1, 5), (0, 1, 2), (2, 0, 7)]).unwrap();
        let text = g.format();
        assert_eq!(text, "4 3\n0 1 2\n0 2 7\n1 3 5\n");
        assert_eq!(WeightedGraph::parse(&text).unwrap(), g);
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<WeightedGraph>(&json).unwrap(), g);
    }

    #[test]
    fn ball_two_thirds() {
        let g = WeightedGraph::new(2, [(0, 1, 3)]).unwrap();
        let m = all_pairs_shortest_paths(&g).unwrap();
        let b = ball(&g, &m, 0, &q(2));
        assert_eq!(b.interior, vec![0]);
        assert_eq!(b.edges, vec![(0, q_frac(2, 3))]);
    }

    #[test]
    fn ball_radius_zero() {
        let g = path(3, 1);
        let m = all_pairs_shortest_paths(&g).unwrap();
        let b = ball(&g, &m, 1, &q(0));
        assert_eq!(b.interior, vec![1]);
        assert!(b.edges.is_empty());
    }

    #[test]
    fn ball_half_on_unit_path() {
        let g = path(3, 1);
        let m = all_pairs_shortest_paths(&g).unwrap();
        let b = ball(&g, &m, 0, &q_frac(3, 2));
        assert_eq!(b.interior, vec![0, 1]);
        assert_eq!(b.fraction(0), q(1));
        assert_eq!(b.fraction(1), q_frac(1, 2));
        assert_eq!(b.boundary().count(), 1);
    }

    #[test]
    fn ball_at_wd_misses_far_edge_midpoints() {
        // c=0, x=1, y=2: both x and y at distance 3, the x–y edge midpoint at 3.5.
        let g = WeightedGraph::new(3, [(0, 1, 3), (0, 2, 3), (1, 2, 1)]).unwrap();
        let m = all_pairs_shortest_paths(&g).unwrap();
        assert_eq!(m.wd, 3);
        let b = ball(&g, &m, 0, &q(3));
        assert_eq!(b.interior.len(), 3);
        assert_eq!(b.fraction(g.edge_between(1, 2).unwrap()), q(0));
    }

    #[test]
    fn mst_small_cases() {
        assert_eq!(mst_weight(&triangle()), 2);
        assert_eq!(mst_weight(&path(4, 1)), 3);
    }

    /// Minimum spanning tree weight by trying every (n-1)-edge subset.
    fn brute_mst(g: &WeightedGraph) -> Weight {
        let m = g.m();
        let mut best = Weight::MAX;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != g.n() - 1 {
                continue;
            }
            let mut uf = UnionFind::<usize>::new(g.n());
            let mut ok = true;
            let mut w = 0;
            for e in 0..m {
                if mask >> e & 1 == 1 {
                    let x = g.edge(e);
                    ok &= uf.union(x.u, x.v);
                    w += x.w;
                }
            }
            if ok {
                best = best.min(w);
            }
        }
        best
    }

    #[test]
    fn mst_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = rng.gen_range(7..=14);
            let g = random_connected(8, m, 9, &mut rng);
            assert_eq!(mst_weight(&g), brute_mst(&g));
        }
    }

    /// Hop-layered Bellman–Ford: `layer[h][x]` is the least weight of a walk
    /// with at most `h` hops. The hop count of a pair is the first layer that
    /// reaches the true distance.
    fn layered_s(g: &WeightedGraph) -> usize {
        let n = g.n();
        let mut s = 0;
        for src in 0..n {
            let mut layer = vec![Weight::MAX; n];
            layer[src] = 0;
            let mut per_hop = vec![layer.clone()];
            for _ in 1..n {
                let prev = per_hop.last().unwrap().clone();
                let mut next = prev.clone();
                for e in g.edges() {
                    if prev[e.u] != Weight::MAX {
                        next[e.v] = next[e.v].min(prev[e.u] + e.w);
                    }
                    if prev[e.v] != Weight::MAX {
                        next[e.u] = next[e.u].min(prev[e.v] + e.w);
                    }
                }
                per_hop.push(next);
            }
            let fin = per_hop.last().unwrap();
            for t in 0..n {
                let h = per_hop.iter().position(|l| l[t] == fin[t]).unwrap();
                s = s.max(h);
            }
        }
        s
    }

    #[test]
    fn s_matches_layered_bellman_ford() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..60 {
            let n = rng.gen_range(2..=30);
            let max_m = n * (n - 1) / 2;
            let m = rng.gen_range(n - 1..=max_m.min(3 * n));
            // Small weight ranges create many equal-weight paths.
            let wmax = if i % 2 == 0 { 3 } else { 20 };
            let g = random_connected(n, m, wmax, &mut rng);
            let metrics = all_pairs_shortest_paths(&g).unwrap();
            assert_eq!(metrics.s, layered_s(&g), "graph {}", g.format());
            assert!(metrics.d <= metrics.s);
        }
    }

    #[test]
    fn canonical_path_is_shortest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_connected(12, 20, 4, &mut rng);
            let m = all_pairs_shortest_paths(&g).unwrap();
            for a in 0..12 {
                for b in 0..12 {
                    let p = canonical_path(&g, &m, a, b);
                    assert_eq!(g.total_weight(path_edges(&g, &p)), m.wd_between(a, b));
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn graph_strategy() -> impl Strategy<Value = WeightedGraph> {
            (2usize..14, any::<u64>(), 1u64..12).prop_map(|(n, seed, wmax)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = rng.gen_range(n - 1..=(n * (n - 1) / 2).min(2 * n));
                random_connected(n, m, wmax, &mut rng)
            })
        }

        proptest! {
            #[test]
            fn triangle_inequality(g in graph_strategy()) {
                let m = all_pairs_shortest_paths(&g).unwrap();
                let n = g.n();
                for a in 0..n {
                    for b in 0..n {
                        prop_assert_eq!(m.wd_between(a, b), m.wd_between(b, a));
                        for c in 0..n {
                            prop_assert!(m.wd_between(a, b) <= m.wd_between(a, c) + m.wd_between(c, b));
                        }
                    }
                }
            }

            #[test]
            fn ball_monotone(g in graph_strategy(), c in 0usize..14, r1 in 0u64..60, dr in 0u64..60) {
                let c = c % g.n();
                let m = all_pairs_shortest_paths(&g).unwrap();
                let small = ball(&g, &m, c, &q_frac(r1 as i64, 2));
                let big = ball(&g, &m, c, &q_frac((r1 + dr) as i64, 2));
                for v in &small.interior {
                    prop_assert!(big.contains(*v));
                }
                for e in 0..g.m() {
                    prop_assert!(small.fraction(e) <= big.fraction(e));
                }
            }

            #[test]
            fn ball_at_wd_covers_nodes(g in graph_strategy(), c in 0usize..14) {
                let c = c % g.n();
                let m = all_pairs_shortest_paths(&g).unwrap();
                let b = ball(&g, &m, c, &q_u(m.wd));
                prop_assert_eq!(b.interior.len(), g.n());
                let wider = ball(&g, &m, c, &q_u(m.wd + g.max_weight()));
                for e in 0..g.m() {
                    prop_assert_eq!(wider.fraction(e), q(1));
                }
            }
        }
    }
}
