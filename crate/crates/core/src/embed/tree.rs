//! Virtual tree: random ranks, a random scale, least-element lists and the
//! ancestors read off them.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{q_u, serde_q, Q};
use crate::graph::{GraphMetrics, NodeId, Weight, WeightedGraph};
use crate::instance::Label;
use crate::sim::bellman_ford::{distributed_bellman_ford, BfInput};
use crate::sim::bfs::BfsInfo;
use crate::sim::detect::{Detect, DetectInput};
use crate::sim::{run, NodeCtx, NodeProgram, Payload, RunStats, SimConfig, SimError, Status, Step};

/// Granularity of the scale: `beta` is a multiple of `2^-BETA_BITS`.
pub const BETA_BITS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeMode {
    /// Every ancestor up to the root.
    Full,
    /// Ancestor chains cut at the first top-rank node, which is replaced by
    /// the closest top-rank node.
    Truncate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeEntry {
    pub node: NodeId,
    pub rank: usize,
    pub dist: Weight,
    /// Neighbor on a least-weight path towards `node`.
    pub next: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ancestor {
    pub level: usize,
    pub node: NodeId,
    pub dist: Weight,
    pub next: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualTree {
    #[serde(with = "serde_q")]
    pub beta: Q,
    /// `L`: the top level.
    pub levels: usize,
    pub mode: TreeMode,
    /// Random rank of every node; a permutation of `0..n`.
    pub rank: Vec<usize>,
    /// Top-rank node set, empty in full mode.
    pub top: Vec<NodeId>,
    pub le: Vec<Vec<LeEntry>>,
    /// Ancestors `v_0 .. v_{cut-1}`.
    pub ancestors: Vec<Vec<Ancestor>>,
    /// First level whose ball meets the top set; `levels + 1` in full mode.
    pub cut: Vec<usize>,
    /// Closest top-rank node, at level `cut`.
    pub closest: Vec<Option<Ancestor>>,
}

impl VirtualTree {
    /// The node `v` routes to in phase `i`.
    pub fn destination(&self, v: NodeId, i: usize) -> NodeId {
        if i < self.cut[v] {
            self.ancestors[v][i].node
        } else {
            self.closest[v].as_ref().expect("truncated chains end at the top set").node
        }
    }

    /// Next hop at `x` towards `dest`, if `x` knows a route.
    pub fn next_hop(&self, x: NodeId, dest: NodeId) -> Option<NodeId> {
        if let Some(e) = self.le[x].iter().find(|e| e.node == dest) {
            return e.next;
        }
        self.closest[x].as_ref().filter(|c| c.node == dest).and_then(|c| c.next)
    }

    /// Routing table of `x`: destination to next hop.
    pub fn hop_table(&self, x: NodeId) -> BTreeMap<NodeId, NodeId> {
        let mut t: BTreeMap<NodeId, NodeId> = self.le[x].iter().filter_map(|e| e.next.map(|nx| (e.node, nx))).collect();
        if let Some(c) = &self.closest[x] {
            if let Some(nx) = c.next {
                t.insert(c.node, nx);
            }
        }
        t
    }

    /// Nodes from `v` to `dest` along next hops.
    pub fn path(&self, v: NodeId, dest: NodeId) -> Vec<NodeId> {
        let mut p = vec![v];
        let mut x = v;
        while x != dest {
            x = self.next_hop(x, dest).expect("route known along the path");
            p.push(x);
            assert!(p.len() <= self.rank.len(), "routing loop");
        }
        p
    }

    /// Destinations `v` routes to over all phases.
    pub fn destinations(&self, v: NodeId) -> Vec<NodeId> {
        let mut d: Vec<NodeId> = self.ancestors[v].iter().map(|a| a.node).collect();
        d.extend(self.closest[v].as_ref().map(|c| c.node));
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Per node, the number of distinct destinations whose routes it relays.
    pub fn relay_multiplicity(&self) -> Vec<usize> {
        let n = self.rank.len();
        let mut through: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
        for v in 0..n {
            for dest in self.destinations(v) {
                let p = self.path(v, dest);
                for &x in &p[..p.len() - 1] {
                    through[x].insert(dest);
                }
            }
        }
        through.iter().map(BTreeSet::len).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

/// `L = ceil(log2 wd)`, and 0 for `wd <= 1`.
pub fn levels_for(wd: Weight) -> usize {
    let mut l = 0;
    while (1u128 << l) < u128::from(wd) {
        l += 1;
    }
    l
}

/// Weight `beta * 2^i` of the virtual edge from level `i - 1` to level `i`.
pub fn virtual_edge_weight(beta: &Q, i: usize) -> Q {
    beta * q_u(1u64 << i)
}

/// `1 + r / 2^BETA_BITS`.
pub fn beta_from(r: u64) -> Q {
    Q::one() + Q::new(r.into(), (1u64 << BETA_BITS).into())
}

/// Ranks (a permutation) and scale drawn from `seed`.
pub fn draw(n: usize, seed: u64) -> (Vec<usize>, Q) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(&mut rng);
    let beta = beta_from(rng.gen_range(0..=(1u64 << BETA_BITS)));
    (rank, beta)
}

/// Size of the top-rank set: `ceil(sqrt n)`.
pub fn top_size(n: usize) -> usize {
    crate::dist::sublinear::ceil_sqrt(n)
}

// ---------------------------------------------------------------------------
// Least-element lists.

#[derive(Clone, Debug)]
pub struct LeMsg {
    pub node: NodeId,
    pub rank: usize,
    pub dist: Weight,
}

impl Payload for LeMsg {
    fn words(&self) -> usize {
        4
    }
    fn tag(&self) -> &'static str {
        "le-entry"
    }
}

#[derive(Clone, Debug)]
pub struct LeInput {
    pub rank: usize,
    /// Takes part at all; top-rank nodes stay out in truncate mode.
    pub member: bool,
    /// Entries at this distance or beyond are useless here.
    pub limit: Option<Weight>,
}

/// Each node keeps the entries `(u, d)` that no kept entry beats with a
/// strictly smaller distance and a higher rank, and announces every new or
/// improved entry to all neighbors.
pub struct LeLists;

#[derive(Clone, Debug)]
pub struct LeState {
    input: LeInput,
    entries: BTreeMap<NodeId, (Weight, usize, Option<NodeId>)>,
    queues: Vec<VecDeque<NodeId>>,
}

impl LeState {
    fn announce(&mut self, u: NodeId) {
        for q in &mut self.queues {
            if !q.contains(&u) {
                q.push_back(u);
            }
        }
    }
}

impl NodeProgram for LeLists {
    type Input = LeInput;
    type State = LeState;
    type Msg = LeMsg;
    type Output = Vec<LeEntry>;

    fn init(&self, ctx: &NodeCtx, input: LeInput) -> LeState {
        LeState {
            input,
            entries: BTreeMap::new(),
            queues: vec![VecDeque::new(); ctx.arcs.len()],
        }
    }

    fn step(&self, ctx: &NodeCtx, st: &mut LeState, round: usize, inbox: &[(NodeId, LeMsg)], _: &mut ChaCha8Rng) -> Step<LeMsg> {
        if !st.input.member {
            return Step::done(Vec::new());
        }
        if round == 1 {
            st.entries.insert(ctx.id, (0, st.input.rank, None));
            st.announce(ctx.id);
        }
        for (from, m) in inbox {
            let cand = m.dist + ctx.arc_to(*from).expect("sender is a neighbor").w;
            if st.input.limit.is_some_and(|l| cand >= l) {
                continue;
            }
            match st.entries.get_mut(&m.node) {
                Some((d, _, _)) if *d < cand => continue,
                Some((d, _, nx)) if *d == cand => {
                    if nx.is_some_and(|p| *from < p) {
                        *nx = Some(*from);
                    }
                    continue;
                }
                _ => {}
            }
            if st.entries.values().any(|(d, r, _)| *d < cand && *r > m.rank) {
                continue;
            }
            st.entries.retain(|_, (d, r, _)| !(*d > cand && *r < m.rank));
            st.entries.insert(m.node, (cand, m.rank, Some(*from)));
            st.announce(m.node);
        }
        let mut out = Vec::new();
        for (i, a) in ctx.arcs.iter().enumerate() {
            if let Some(u) = st.queues[i].pop_front() {
                if let Some((d, r, _)) = st.entries.get(&u) {
                    out.push((
                        a.to,
                        LeMsg {
                            node: u,
                            rank: *r,
                            dist: *d,
                        },
                    ));
                }
            }
        }
        let status = if st.queues.iter().any(|q| !q.is_empty()) { Status::Busy } else { Status::Idle };
        Step::new(out, status)
    }

    fn output(&self, _: &NodeCtx, st: LeState) -> Vec<LeEntry> {
        let mut v: Vec<LeEntry> = st
            .entries
            .into_iter()
            .map(|(node, (dist, rank, next))| LeEntry { node, rank, dist, next })
            .collect();
        v.sort_by_key(|e| (e.dist, e.node));
        v
    }
}

fn to_weight(x: &Q) -> Weight {
    assert!(x.is_integer(), "integer distances");
    x.to_integer().to_u64().expect("distance fits")
}

/// Builds the virtual tree on the simulator. `levels` is the public top
/// level `ceil(log2 WD)`.
pub fn virtual_tree_on(
    g: &WeightedGraph,
    seed: u64,
    mode: TreeMode,
    levels: usize,
    tree: &[BfsInfo],
    cfg: &SimConfig,
) -> Result<(VirtualTree, RunStats), SimError> {
    let n = g.n();
    let (rank, beta) = draw(n, seed);
    let mut stats = RunStats::default();
    let top: Vec<NodeId> = match mode {
        TreeMode::Full => Vec::new(),
        TreeMode::Truncate => {
            let s = top_size(n);
            let mut t: Vec<NodeId> = (0..n).filter(|&v| rank[v] >= n - s).collect();
            t.sort_by_key(|&v| std::cmp::Reverse(rank[v]));
            t
        }
    };
    let in_top: Vec<bool> = (0..n).map(|v| top.contains(&v)).collect();
    // Voronoi cells of the top set.
    let mut vor: Vec<Option<(Weight, NodeId, Option<NodeId>)>> = vec![None; n];
    if !top.is_empty() {
        let inputs = (0..n)
            .map(|v| BfInput {
                source: in_top[v].then(|| (Q::default(), v)),
                relay: true,
                weights: Vec::new(),
            })
            .collect();
        let (out, s) = distributed_bellman_ford(g, inputs, None, tree, cfg, "top-voronoi")?;
        stats.absorb(s);
        for (v, o) in out.into_iter().enumerate() {
            vor[v] = Some((to_weight(&o.dist.expect("connected")), o.src.expect("connected"), o.parent));
        }
    }
    let inputs: Vec<DetectInput<LeInput>> = (0..n)
        .map(|v| DetectInput {
            tree: tree[v].clone(),
            inner: LeInput {
                rank: rank[v],
                member: !in_top[v],
                limit: vor[v].map(|x| x.0),
            },
        })
        .collect();
    let prog = Detect {
        inner: LeLists,
        budget: cfg.words_per_msg,
    };
    let lg = levels_for(n as Weight) + 1;
    let (le, s) = run(g, &prog, inputs, cfg, "le-lists", cfg.stage_cap((n + 2) * (lg + 1)))?;
    stats.absorb(s);

    let mut ancestors = Vec::with_capacity(n);
    let mut cut = Vec::with_capacity(n);
    let mut closest = Vec::with_capacity(n);
    for v in 0..n {
        let c = match (mode, vor[v]) {
            (TreeMode::Full, _) => levels + 1,
            (TreeMode::Truncate, Some((d, _, _))) => (0..=levels)
                .find(|&i| q_u(d) <= virtual_edge_weight(&beta, i))
                .expect("the top level ball covers the graph"),
            (TreeMode::Truncate, None) => unreachable!("voronoi ran"),
        };
        let anc: Vec<Ancestor> = (0..c)
            .map(|i| {
                let r = virtual_edge_weight(&beta, i);
                let e = le[v]
                    .iter()
                    .filter(|e| q_u(e.dist) <= r)
                    .max_by_key(|e| e.rank)
                    .expect("own entry");
                Ancestor {
                    level: i,
                    node: e.node,
                    dist: e.dist,
                    next: e.next,
                }
            })
            .collect();
        ancestors.push(anc);
        closest.push(vor[v].map(|(d, src, parent)| Ancestor {
            level: c,
            node: src,
            dist: d,
            next: parent,
        }));
        cut.push(c);
    }
    Ok((
        VirtualTree {
            beta,
            levels,
            mode,
            rank,
            top,
            le,
            ancestors,
            cut,
            closest,
        },
        stats,
    ))
}

/// Virtual tree with its own BFS tree; `levels` from the weighted diameter.
pub fn build_virtual_tree(g: &WeightedGraph, seed: u64, mode: TreeMode, cfg: &SimConfig) -> Result<(VirtualTree, RunStats), SimError> {
    let (tree, mut stats) = crate::sim::bfs::build_bfs_tree(g, cfg)?;
    let wd = crate::graph::all_pairs_shortest_paths(g).expect("connected graph").wd;
    let (vt, s) = virtual_tree_on(g, seed, mode, levels_for(wd), &tree, cfg)?;
    stats.absorb(s);
    Ok((vt, stats))
}

// ---------------------------------------------------------------------------
// Centralized evaluation.

/// Ancestor chains `v_0 .. v_L` by direct ball maxima over exact distances.
pub fn central_chains(m: &GraphMetrics, rank: &[usize], beta: &Q, levels: usize) -> Vec<Vec<NodeId>> {
    let n = rank.len();
    (0..n)
        .map(|v| {
            let row = m.row(v);
            (0..=levels)
                .map(|i| {
                    let r = virtual_edge_weight(beta, i);
                    (0..n)
                        .filter(|&u| q_u(row[u]) <= r)
                        .max_by_key(|&u| rank[u])
                        .expect("ball holds its center")
                })
                .collect()
        })
        .collect()
}

/// Weight of the optimal solution on the full virtual tree: the union over
/// labels of the least subtrees spanning their terminals. Tree nodes at
/// level `i` are identified by their chain `(v_i, .., v_L)`.
pub fn virtual_tree_optimum(m: &GraphMetrics, rank: &[usize], beta: &Q, levels: usize, labels: &[Option<Label>]) -> Q {
    let chains = central_chains(m, rank, beta, levels);
    let n = rank.len();
    // Intern chain suffixes top-down: id[v][i] names v's level-i tree node.
    let mut intern: HashMap<(usize, NodeId, usize), usize> = HashMap::new();
    let mut id = vec![vec![0usize; levels + 1]; n];
    for v in 0..n {
        let mut above = usize::MAX;
        for i in (0..=levels).rev() {
            let key = (i, chains[v][i], above);
            let next = intern.len();
            let x = *intern.entry(key).or_insert(next);
            id[v][i] = x;
            above = x;
        }
    }
    let mut groups: BTreeMap<Label, Vec<NodeId>> = BTreeMap::new();
    for (v, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            groups.entry(*l).or_default().push(v);
        }
    }
    // Edge from the level-(i-1) node (leaf for i = 0) to its parent.
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for members in groups.values() {
        if members.len() < 2 {
            continue;
        }
        for i in 0..=levels {
            let mut below: BTreeMap<usize, usize> = BTreeMap::new();
            for &v in members {
                let child = if i == 0 { v } else { id[v][i - 1] };
                *below.entry(child).or_default() += 1;
            }
            if below.len() == 1 {
                break;
            }
            for child in below.keys() {
                edges.insert((i, *child));
            }
        }
    }
    edges.iter().map(|&(i, _)| virtual_edge_weight(beta, i)).sum()
}
