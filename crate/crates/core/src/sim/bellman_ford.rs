//! Multi-source Bellman-Ford with source tags.
//!
//! Sources start with a fixed distance and tag. Relaying nodes adopt the
//! lexicographically least `(distance, tag)` offer and re-announce every
//! improvement. Among equal offers the smallest sender becomes the parent.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{q_u, serde_q_opt, Q};
use crate::graph::{NodeId, WeightedGraph};
use crate::sim::bfs::BfsInfo;
use crate::sim::detect::{Detect, DetectInput};
use crate::sim::{run, NodeCtx, NodeProgram, Payload, RunStats, SimConfig, SimError, Step};

#[derive(Clone, Debug, Default)]
pub struct BfInput {
    /// Initial distance and tag of a source.
    pub source: Option<(Q, NodeId)>,
    /// Whether a non-source node takes part at all.
    pub relay: bool,
    /// Per-arc weight override aligned with the node's arcs; `None` entries
    /// mark unusable arcs. Empty means plain edge weights.
    pub weights: Vec<Option<Q>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfOutput {
    #[serde(with = "serde_q_opt")]
    pub dist: Option<Q>,
    pub src: Option<NodeId>,
    pub parent: Option<NodeId>,
}

#[derive(Clone, Debug)]
pub struct Offer {
    pub dist: Q,
    pub src: NodeId,
}

impl Payload for Offer {
    fn words(&self) -> usize {
        4
    }
    fn tag(&self) -> &'static str {
        "bf-offer"
    }
}

/// With `hop_cap = Some(h)` only paths of at most `h` hops are explored and
/// the program stops by itself after `h + 1` rounds; otherwise it must run
/// under [`Detect`].
pub struct BellmanFord {
    pub hop_cap: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct BfState {
    input: BfInput,
    best: Option<(Q, NodeId)>,
    parent: Option<NodeId>,
}

impl BfState {
    fn arc_weight(&self, ctx: &NodeCtx, from: NodeId) -> Option<Q> {
        let i = ctx.arcs.binary_search_by_key(&from, |a| a.to).ok()?;
        if self.input.weights.is_empty() {
            Some(q_u(ctx.arcs[i].w))
        } else {
            self.input.weights[i].clone()
        }
    }

    fn usable(&self, i: usize) -> bool {
        self.input.weights.is_empty() || self.input.weights[i].is_some()
    }
}

impl NodeProgram for BellmanFord {
    type Input = BfInput;
    type State = BfState;
    type Msg = Offer;
    type Output = BfOutput;

    fn init(&self, _: &NodeCtx, input: BfInput) -> BfState {
        BfState {
            best: input.source.clone(),
            input,
            parent: None,
        }
    }

    fn step(&self, ctx: &NodeCtx, st: &mut BfState, round: usize, inbox: &[(NodeId, Offer)], _: &mut ChaCha8Rng) -> Step<Offer> {
        let hops = round - 1;
        let within = self.hop_cap.is_none_or(|h| hops <= h);
        let mut changed = round == 1 && st.input.source.is_some();
        if st.input.source.is_none() && st.input.relay && within {
            for (from, o) in inbox {
                let Some(w) = st.arc_weight(ctx, *from) else { continue };
                let cand = (&o.dist + w, o.src);
                match &st.best {
                    Some(b) if cand > *b => {}
                    Some(b) if cand == *b => {
                        if st.parent.is_some_and(|p| *from < p) {
                            st.parent = Some(*from);
                        }
                    }
                    _ => {
                        st.best = Some(cand);
                        st.parent = Some(*from);
                        changed = true;
                    }
                }
            }
        }
        let mut out = Vec::new();
        if changed && self.hop_cap.is_none_or(|h| round <= h) {
            let (d, s) = st.best.clone().expect("changed implies a value");
            for (i, a) in ctx.arcs.iter().enumerate() {
                if st.usable(i) {
                    out.push((a.to, Offer { dist: d.clone(), src: s }));
                }
            }
        }
        match self.hop_cap {
            Some(h) if round > h => Step::done(out),
            _ => Step::idle(out),
        }
    }

    fn output(&self, _: &NodeCtx, st: BfState) -> BfOutput {
        BfOutput {
            dist: st.best.as_ref().map(|b| b.0.clone()),
            src: st.best.map(|b| b.1),
            parent: st.parent,
        }
    }
}

/// Runs Bellman-Ford: hop-capped on its own, otherwise until quiescence
/// detected over `tree`.
pub fn distributed_bellman_ford(
    g: &WeightedGraph,
    inputs: Vec<BfInput>,
    hop_cap: Option<usize>,
    tree: &[BfsInfo],
    cfg: &SimConfig,
    stage: &str,
) -> Result<(Vec<BfOutput>, RunStats), SimError> {
    let bound = 3 * g.n() + 3;
    match hop_cap {
        Some(h) => run(g, &BellmanFord { hop_cap: Some(h) }, inputs, cfg, stage, cfg.stage_cap(h + 2)),
        None => {
            let prog = Detect {
                inner: BellmanFord { hop_cap: None },
                budget: cfg.words_per_msg,
            };
            let inputs = inputs
                .into_iter()
                .zip(tree)
                .map(|(i, t)| DetectInput {
                    tree: t.clone(),
                    inner: i,
                })
                .collect();
            run(g, &prog, inputs, cfg, stage, cfg.stage_cap(bound))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;
    use crate::graph::all_pairs_shortest_paths;
    use crate::harness::gen::random_connected;
    use crate::sim::bfs::build_bfs_tree;
    use rand::{Rng, SeedableRng};
    use std::collections::BinaryHeap;
    use std::cmp::Reverse;

    fn plain(n: usize, sources: &[(NodeId, i64)]) -> Vec<BfInput> {
        (0..n)
            .map(|v| BfInput {
                source: sources.iter().find(|s| s.0 == v).map(|s| (q(s.1), v)),
                relay: true,
                weights: Vec::new(),
            })
            .collect()
    }

    fn tree(g: &WeightedGraph) -> Vec<BfsInfo> {
        build_bfs_tree(g, &SimConfig::default()).unwrap().0
    }

    #[test]
    fn unit_path_single_source() {
        let g = WeightedGraph::new(5, (1..5).map(|i| (i - 1, i, 1))).unwrap();
        let t = tree(&g);
        let (out, _) = distributed_bellman_ford(&g, plain(5, &[(0, 0)]), None, &t, &SimConfig::default(), "bf").unwrap();
        let d: Vec<Q> = out.iter().map(|o| o.dist.clone().unwrap()).collect();
        assert_eq!(d, (0..5).map(q).collect::<Vec<_>>());
        assert_eq!(out[3].parent, Some(2));
    }

    #[test]
    fn equidistant_middle_goes_to_smaller_source() {
        let g = WeightedGraph::new(5, (1..5).map(|i| (i - 1, i, 1))).unwrap();
        let t = tree(&g);
        let (out, _) = distributed_bellman_ford(&g, plain(5, &[(0, 0), (4, 0)]), None, &t, &SimConfig::default(), "bf").unwrap();
        assert_eq!(out[2].dist, Some(q(2)));
        assert_eq!(out[2].src, Some(0));
        assert_eq!(out[2].parent, Some(1));
        assert_eq!(out[3].src, Some(4));
    }

    #[test]
    fn hop_cap_leaves_far_nodes_unassigned() {
        let g = WeightedGraph::new(5, (1..5).map(|i| (i - 1, i, 1))).unwrap();
        let (out, stats) = distributed_bellman_ford(&g, plain(5, &[(0, 0)]), Some(2), &[], &SimConfig::default(), "bf").unwrap();
        assert_eq!(out[2].dist, Some(q(2)));
        assert_eq!(out[3].dist, None);
        assert!(stats.rounds <= 3);
    }

    /// Dijkstra over `(dist, tag)` with the same parent rule, on explicit
    /// rational arc weights.
    fn central(g: &WeightedGraph, w: &dyn Fn(usize) -> Q, sources: &[(NodeId, Q)]) -> Vec<Option<(Q, NodeId)>> {
        let mut best: Vec<Option<(Q, NodeId)>> = vec![None; g.n()];
        let mut heap = BinaryHeap::new();
        for (s, d) in sources {
            best[*s] = Some((d.clone(), *s));
            heap.push(Reverse((d.clone(), *s, *s)));
        }
        let mut fixed = vec![false; g.n()];
        while let Some(Reverse((d, tag, u))) = heap.pop() {
            if fixed[u] || best[u] != Some((d.clone(), tag)) {
                continue;
            }
            fixed[u] = true;
            for a in g.neighbors(u) {
                if sources.iter().any(|s| s.0 == a.to) {
                    continue;
                }
                let c = (&d + w(a.edge), tag);
                if best[a.to].as_ref().is_none_or(|b| c < *b) {
                    best[a.to] = Some(c.clone());
                    heap.push(Reverse((c.0, c.1, a.to)));
                }
            }
        }
        best
    }

    #[test]
    fn reduced_weights_match_central_dijkstra() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_connected(18, 35, 6, &mut rng);
            // Edges inside a declared ball get weight zero.
            let zero: Vec<bool> = (0..g.m()).map(|_| rng.gen_bool(0.3)).collect();
            let w = |e: usize| if zero[e] { q(0) } else { q_u(g.edge(e).w) };
            let srcs: Vec<(NodeId, Q)> = vec![(0, q(0)), (5, q(1)), (11, q(0))];
            let inputs = (0..g.n())
                .map(|v| BfInput {
                    source: srcs.iter().find(|s| s.0 == v).map(|s| (s.1.clone(), v)),
                    relay: true,
                    weights: g.neighbors(v).iter().map(|a| Some(w(a.edge))).collect(),
                })
                .collect();
            let t = tree(&g);
            let (out, _) = distributed_bellman_ford(&g, inputs, None, &t, &SimConfig::default(), "bf").unwrap();
            let want = central(&g, &w, &srcs);
            for v in 0..g.n() {
                assert_eq!(out[v].dist, want[v].as_ref().map(|x| x.0.clone()));
                assert_eq!(out[v].src, want[v].as_ref().map(|x| x.1));
                if let Some(p) = out[v].parent {
                    let e = g.edge_between(v, p).unwrap();
                    assert_eq!(out[p].dist.clone().unwrap() + w(e), out[v].dist.clone().unwrap());
                }
            }
        }
    }

    #[test]
    fn hop_cap_s_equals_central_distances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let g = random_connected(16, 30, 9, &mut rng);
            let m = all_pairs_shortest_paths(&g).unwrap();
            let (out, _) = distributed_bellman_ford(&g, plain(g.n(), &[(3, 0)]), Some(m.s), &[], &SimConfig::default(), "bf").unwrap();
            for v in 0..g.n() {
                assert_eq!(out[v].dist, Some(q_u(m.wd_between(3, v))));
            }
        }
    }
}
