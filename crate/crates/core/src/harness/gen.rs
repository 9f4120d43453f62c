//! Random and structured instance generators.

use petgraph::unionfind::UnionFind;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, Weight, WeightedGraph};
use crate::instance::{CrInstance, IcInstance, Label, SteinerInstance};

/// A connected graph with `n` nodes and `m` edges (clamped to the feasible
/// range) and weights uniform in `1..=wmax`: a random spanning tree plus
/// uniformly random extra edges.
pub fn random_connected<R: Rng>(n: usize, m: usize, wmax: Weight, rng: &mut R) -> WeightedGraph {
    let max_m = n * n.saturating_sub(1) / 2;
    let m = m.clamp(n.saturating_sub(1), max_m);
    let mut perm: Vec<NodeId> = (0..n).collect();
    perm.shuffle(rng);
    let mut present = vec![vec![false; n]; n];
    let mut edges = Vec::with_capacity(m);
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (a, b) = (perm[i], perm[j]);
        present[a][b] = true;
        present[b][a] = true;
        edges.push((a, b, rng.gen_range(1..=wmax)));
    }
    while edges.len() < m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !present[a][b] {
            present[a][b] = true;
            present[b][a] = true;
            edges.push((a, b, rng.gen_range(1..=wmax)));
        }
    }
    WeightedGraph::new(n, edges).expect("generator emits a simple graph")
}

/// `t` random terminals spread round-robin over `k` labels `0..k`.
pub fn random_ic_labels<R: Rng>(n: usize, t: usize, k: usize, rng: &mut R) -> Vec<Option<Label>> {
    let mut nodes: Vec<NodeId> = (0..n).collect();
    nodes.shuffle(rng);
    let mut labels = vec![None; n];
    for (i, &v) in nodes.iter().take(t.min(n)).enumerate() {
        labels[v] = Some(i % k.max(1));
    }
    labels
}

/// Graph family and its size knobs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Points on a 1000 x 1000 integer grid joined within `radius`; weight is
    /// the rounded-up distance over 10. Components are joined by their
    /// closest pairs.
    Geometric { n: usize, radius: u32 },
    /// Random spanning tree plus uniform extra edges.
    Gnm { n: usize, m: usize },
    Grid { rows: usize, cols: usize },
    /// Unit path with heavy chords from node 0, so `s = n - 1` and `D = 2`.
    WeightedPath { n: usize },
    /// Cliques hanging off a hub through paths of `arm` edges.
    StarOfCliques { cliques: usize, size: usize, arm: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    /// Weight range for families with random weights.
    pub wmin: Weight,
    pub wmax: Weight,
    /// Terminal count `t` and label count `k`.
    pub terminals: usize,
    pub components: usize,
    /// Emit connection requests (pairs along each label group) instead of labels.
    #[serde(default)]
    pub requests: bool,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub id: String,
    pub seed: u64,
    pub instance: SteinerInstance,
}

impl GenSpec {
    fn node_count(&self) -> usize {
        match self.family {
            Family::Geometric { n, .. } | Family::Gnm { n, .. } | Family::WeightedPath { n } => n,
            Family::Grid { rows, cols } => rows * cols,
            Family::StarOfCliques { cliques, size, arm } => 1 + cliques * (size + arm.saturating_sub(1)),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |s: &str| Err(GenError::InvalidSpec(s.to_string()));
        let n = self.node_count();
        if n < 2 {
            return bad("fewer than two nodes");
        }
        if self.wmin == 0 || self.wmin > self.wmax {
            return bad("weights must satisfy 1 <= wmin <= wmax");
        }
        if self.terminals > n {
            return bad("more terminals than nodes");
        }
        if self.components == 0 && self.terminals > 0 {
            return bad("terminals need at least one component");
        }
        match self.family {
            Family::Geometric { radius: 0, .. } => bad("radius must be positive"),
            Family::WeightedPath { n } if n < 3 => bad("path needs three nodes"),
            Family::StarOfCliques { size, arm, .. } if size == 0 || arm == 0 => bad("cliques and arms must be nonempty"),
            _ => Ok(()),
        }
    }
}

fn geometric<R: Rng>(n: usize, radius: u32, rng: &mut R) -> WeightedGraph {
    let pts: Vec<(i64, i64)> = (0..n).map(|_| (rng.gen_range(0..=1000), rng.gen_range(0..=1000))).collect();
    let mut pairs: Vec<(i64, NodeId, NodeId)> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
            pairs.push((dx * dx + dy * dy, a, b));
        }
    }
    pairs.sort_unstable();
    let weight = |d2: i64| -> Weight {
        let d = (d2 as f64).sqrt();
        ((d / 10.0).ceil() as Weight).max(1)
    };
    let r2 = i64::from(radius) * i64::from(radius);
    let mut uf = UnionFind::<usize>::new(n);
    let mut edges = Vec::new();
    for &(d2, a, b) in &pairs {
        if d2 <= r2 {
            uf.union(a, b);
            edges.push((a, b, weight(d2)));
        }
    }
    for &(d2, a, b) in &pairs {
        if d2 > r2 && uf.union(a, b) {
            edges.push((a, b, weight(d2)));
        }
    }
    WeightedGraph::new(n, edges).expect("generator emits a simple graph")
}

fn grid<R: Rng>(rows: usize, cols: usize, wmin: Weight, wmax: Weight, rng: &mut R) -> WeightedGraph {
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1), rng.gen_range(wmin..=wmax)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c), rng.gen_range(wmin..=wmax)));
            }
        }
    }
    WeightedGraph::new(rows * cols, edges).expect("generator emits a simple graph")
}

fn weighted_path(n: usize) -> WeightedGraph {
    let mut edges: Vec<(NodeId, NodeId, Weight)> = (0..n - 1).map(|i| (i, i + 1, 1)).collect();
    edges.extend((2..n).map(|j| (0, j, n as Weight)));
    WeightedGraph::new(n, edges).expect("generator emits a simple graph")
}

fn star_of_cliques<R: Rng>(cliques: usize, size: usize, arm: usize, wmin: Weight, wmax: Weight, rng: &mut R) -> WeightedGraph {
    let mut edges = Vec::new();
    let mut next = 1;
    for _ in 0..cliques {
        let mut prev = 0;
        for _ in 0..arm - 1 {
            edges.push((prev, next, rng.gen_range(wmin..=wmax)));
            prev = next;
            next += 1;
        }
        let members: Vec<NodeId> = (next..next + size).collect();
        next += size;
        edges.push((prev, members[0], rng.gen_range(wmin..=wmax)));
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                edges.push((a, b, rng.gen_range(wmin..=wmax)));
            }
        }
    }
    WeightedGraph::new(next, edges).expect("generator emits a simple graph")
}

/// Connection requests joining consecutive members of every label group.
pub fn requests_from_labels(labels: &[Option<Label>]) -> Vec<Vec<NodeId>> {
    let mut groups: std::collections::BTreeMap<Label, Vec<NodeId>> = std::collections::BTreeMap::new();
    for (v, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            groups.entry(*l).or_default().push(v);
        }
    }
    let mut req = vec![Vec::new(); labels.len()];
    for members in groups.values() {
        for w in members.windows(2) {
            req[w[0]].push(w[1]);
            req[w[1]].push(w[0]);
        }
    }
    req
}

/// One instance of the family for `seed`.
pub fn generate(spec: &GenSpec, seed: u64) -> Result<SteinerInstance, GenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (spec.wmin, spec.wmax);
    let g = match spec.family {
        Family::Geometric { n, radius } => geometric(n, radius, &mut rng),
        Family::Gnm { n, m } => {
            let g = random_connected(n, m, hi - lo + 1, &mut rng);
            let shifted: Vec<(NodeId, NodeId, Weight)> = g.edges().iter().map(|e| (e.u, e.v, e.w + lo - 1)).collect();
            WeightedGraph::new(n, shifted).expect("same shape")
        }
        Family::Grid { rows, cols } => grid(rows, cols, lo, hi, &mut rng),
        Family::WeightedPath { n } => weighted_path(n),
        Family::StarOfCliques { cliques, size, arm } => star_of_cliques(cliques, size, arm, lo, hi, &mut rng),
    };
    let labels = random_ic_labels(g.n(), spec.terminals, spec.components, &mut rng);
    Ok(if spec.requests {
        SteinerInstance::Cr(CrInstance::new(g, requests_from_labels(&labels)))
    } else {
        SteinerInstance::Ic(IcInstance::new(g, labels))
    })
}

/// Instances for every seed in `seeds`, identified by family and seed.
pub fn gen_family(spec: &GenSpec, seeds: std::ops::Range<u64>) -> Result<Vec<Generated>, GenError> {
    let tag = serde_json::to_value(&spec.family)
        .ok()
        .and_then(|v| v.get("family").and_then(|f| f.as_str()).map(str::to_string))
        .unwrap_or_default();
    seeds
        .map(|seed| {
            Ok(Generated {
                id: format!("{tag}-n{}-t{}-k{}-s{seed}", spec.node_count(), spec.terminals, spec.components),
                seed,
                instance: generate(spec, seed)?,
            })
        })
        .collect()
}
