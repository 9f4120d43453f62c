//! Stage one: per level, labels travel from their carriers to the level's
//! ancestor, each traversed edge joins the output, and the collected labels
//! are handed back to a single carrier per destination.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::transform::TwoPerLabel;
use crate::embed::tree::VirtualTree;
use crate::graph::{EdgeId, NodeId, WeightedGraph};
use crate::instance::{IcInstance, Label};
use crate::sim::bfs::BfsInfo;
use crate::sim::detect::{Detect, DetectInput};
use crate::sim::tree::{broadcast, gather};
use crate::sim::{run, NodeCtx, NodeProgram, Outbox, Payload, RunStats, SimConfig, SimError, Status, Step};

#[derive(Clone, Debug)]
pub struct LabelTo {
    pub label: Label,
    pub dest: NodeId,
}

impl Payload for LabelTo {
    fn words(&self) -> usize {
        3
    }
    fn tag(&self) -> &'static str {
        "label-to"
    }
}

/// Where a node first heard of a destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Back {
    /// The node loaded an entry for the destination itself.
    Origin,
    From(NodeId),
}

#[derive(Clone, Debug)]
pub struct RouteInput {
    pub start: Vec<(Label, NodeId)>,
    pub hops: BTreeMap<NodeId, NodeId>,
}

#[derive(Clone, Debug, Default)]
pub struct RouteOutput {
    pub used: Vec<EdgeId>,
    pub back: BTreeMap<NodeId, Back>,
    pub collected: Vec<Label>,
}

/// Forwards the first `(label, dest)` of every pair towards `dest`, one
/// pending pair per outgoing edge and round, serving the destinations
/// sharing an edge round-robin.
pub struct Route;

#[derive(Clone, Debug)]
pub struct RouteState {
    hops: BTreeMap<NodeId, NodeId>,
    start: Vec<(Label, NodeId)>,
    seen: BTreeMap<NodeId, BTreeSet<Label>>,
    pending: BTreeMap<NodeId, VecDeque<Label>>,
    back: BTreeMap<NodeId, Back>,
    collected: BTreeSet<Label>,
    used: BTreeSet<EdgeId>,
    last: BTreeMap<NodeId, NodeId>,
}

impl RouteState {
    fn add(&mut self, me: NodeId, l: Label, w: NodeId) {
        if w == me {
            self.collected.insert(l);
        } else if self.seen.entry(w).or_default().insert(l) {
            self.pending.entry(w).or_default().push_back(l);
        }
    }
}

impl NodeProgram for Route {
    type Input = RouteInput;
    type State = RouteState;
    type Msg = LabelTo;
    type Output = RouteOutput;

    fn init(&self, _: &NodeCtx, input: RouteInput) -> RouteState {
        RouteState {
            hops: input.hops,
            start: input.start,
            seen: BTreeMap::new(),
            pending: BTreeMap::new(),
            back: BTreeMap::new(),
            collected: BTreeSet::new(),
            used: BTreeSet::new(),
            last: BTreeMap::new(),
        }
    }

    fn step(&self, ctx: &NodeCtx, st: &mut RouteState, round: usize, inbox: &[(NodeId, LabelTo)], _: &mut ChaCha8Rng) -> Step<LabelTo> {
        if round == 1 {
            for (l, w) in std::mem::take(&mut st.start) {
                st.back.insert(w, Back::Origin);
                st.add(ctx.id, l, w);
            }
        }
        for (from, m) in inbox {
            st.back.entry(m.dest).or_insert(Back::From(*from));
            st.add(ctx.id, m.label, m.dest);
        }
        let mut by_hop: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (w, q) in &st.pending {
            if !q.is_empty() {
                let hop = *st.hops.get(w).expect("route to every pending destination");
                by_hop.entry(hop).or_default().push(*w);
            }
        }
        let mut out = Vec::new();
        for (y, ws) in by_hop {
            let w = match st.last.get(&y) {
                Some(&prev) => ws.iter().copied().find(|&w| w > prev).unwrap_or(ws[0]),
                None => ws[0],
            };
            st.last.insert(y, w);
            let l = st.pending.get_mut(&w).unwrap().pop_front().unwrap();
            st.used.insert(ctx.arc_to(y).expect("next hop is a neighbor").edge);
            out.push((y, LabelTo { label: l, dest: w }));
        }
        let status = if st.pending.values().any(|q| !q.is_empty()) { Status::Busy } else { Status::Idle };
        Step::new(out, status)
    }

    fn output(&self, _: &NodeCtx, st: RouteState) -> RouteOutput {
        RouteOutput {
            used: st.used.into_iter().collect(),
            back: st.back,
            collected: st.collected.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HandoffInput {
    pub give: Vec<Label>,
    pub back: BTreeMap<NodeId, Back>,
}

/// Sends every destination's collected labels back along the first-arrival
/// pointers to the carrier the pointers end at.
pub struct Handoff;

#[derive(Clone, Debug)]
pub struct HandoffState {
    input: HandoffInput,
    outbox: Outbox<LabelTo>,
    got: BTreeSet<Label>,
}

impl HandoffState {
    fn pass(&mut self, l: Label, w: NodeId) {
        match self.input.back.get(&w) {
            Some(Back::Origin) => {
                self.got.insert(l);
            }
            Some(Back::From(y)) => self.outbox.push(*y, LabelTo { label: l, dest: w }),
            None => unreachable!("handoff only retraces routes"),
        }
    }
}

impl NodeProgram for Handoff {
    type Input = HandoffInput;
    type State = HandoffState;
    type Msg = LabelTo;
    type Output = Vec<Label>;

    fn init(&self, _: &NodeCtx, input: HandoffInput) -> HandoffState {
        HandoffState {
            input,
            outbox: Outbox::default(),
            got: BTreeSet::new(),
        }
    }

    fn step(&self, ctx: &NodeCtx, st: &mut HandoffState, round: usize, inbox: &[(NodeId, LabelTo)], _: &mut ChaCha8Rng) -> Step<LabelTo> {
        if round == 1 {
            for l in std::mem::take(&mut st.input.give) {
                st.pass(l, ctx.id);
            }
        }
        for (_, m) in inbox {
            st.pass(m.label, m.dest);
        }
        let out = st.outbox.drain_round();
        let status = if st.outbox.is_empty() { Status::Idle } else { Status::Busy };
        Step::new(out, status)
    }

    fn output(&self, _: &NodeCtx, st: HandoffState) -> Vec<Label> {
        st.got.into_iter().collect()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Stage1Outcome {
    /// Sorted output edges.
    pub forest: Vec<EdgeId>,
    /// Edges first added in each phase.
    pub phase_edges: Vec<Vec<EdgeId>>,
    /// Labels erased as single-carrier labels, per phase.
    pub purged: Vec<Vec<Label>>,
}

fn detect_run<P: NodeProgram>(
    g: &WeightedGraph,
    prog: P,
    inputs: Vec<P::Input>,
    tree: &[BfsInfo],
    cfg: &SimConfig,
    stage: &str,
    bound: usize,
) -> Result<(Vec<P::Output>, RunStats), SimError> {
    let prog = Detect {
        inner: prog,
        budget: cfg.words_per_msg,
    };
    let inputs = inputs
        .into_iter()
        .zip(tree)
        .map(|(i, t)| DetectInput { tree: t.clone(), inner: i })
        .collect();
    run(g, &prog, inputs, cfg, stage, cfg.stage_cap(bound))
}

/// Runs the level phases `0..=L` on a built virtual tree.
pub fn stage1_select(inst: &IcInstance, vt: &VirtualTree, tree: &[BfsInfo], cfg: &SimConfig) -> Result<(Stage1Outcome, RunStats), SimError> {
    let g = &inst.graph;
    let n = g.n();
    let k = inst.k();
    let depth = tree.iter().map(|t| t.depth).max().unwrap_or(0);
    let lg = crate::embed::tree::levels_for(n as u64) + 1;
    let mut carry: Vec<BTreeSet<Label>> = inst.labels.iter().map(|l| l.iter().copied().collect()).collect();
    let mut stats = RunStats::default();
    let mut out = Stage1Outcome::default();
    let mut forest: BTreeSet<EdgeId> = BTreeSet::new();
    let tables: Vec<BTreeMap<NodeId, NodeId>> = (0..n).map(|x| vt.hop_table(x)).collect();
    for i in 0..=vt.levels {
        // Labels with a single carrier are done.
        let items: Vec<Vec<(Label, NodeId)>> = (0..n).map(|v| carry[v].iter().map(|&l| (l, v)).collect()).collect();
        let (reports, s) = gather(g, tree, items, vec![TwoPerLabel::default(); n], cfg, "purge-gather")?;
        stats.absorb(s);
        let mut count: BTreeMap<Label, usize> = BTreeMap::new();
        for (l, _) in &reports {
            *count.entry(*l).or_default() += 1;
        }
        let single: Vec<Label> = count.into_iter().filter(|&(_, c)| c == 1).map(|(l, _)| l).collect();
        let (single, s) = broadcast(g, tree, single, cfg, "purge-broadcast")?;
        stats.absorb(s);
        for c in &mut carry {
            for l in &single {
                c.remove(l);
            }
        }
        out.purged.push(single);

        let inputs: Vec<RouteInput> = (0..n)
            .map(|v| RouteInput {
                start: carry[v].iter().map(|&l| (l, vt.destination(v, i))).collect(),
                hops: tables[v].clone(),
            })
            .collect();
        let (routed, s) = detect_run(g, Route, inputs, tree, cfg, "route", (depth + n + k + 2) * lg)?;
        stats.absorb(s);
        let before = forest.clone();
        for r in &routed {
            forest.extend(r.used.iter().copied());
        }
        out.phase_edges.push(forest.difference(&before).copied().collect());

        let inputs: Vec<HandoffInput> = routed
            .into_iter()
            .map(|r| HandoffInput {
                give: r.collected,
                back: r.back,
            })
            .collect();
        let (got, s) = detect_run(g, Handoff, inputs, tree, cfg, "handoff", (depth + n + k + 2) * lg)?;
        stats.absorb(s);
        carry = got.into_iter().map(|l| l.into_iter().collect()).collect();
    }
    out.forest = forest.into_iter().collect();
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::tree::{build_virtual_tree, virtual_tree_on, virtual_tree_optimum, TreeMode};
    use crate::graph::all_pairs_shortest_paths;
    use crate::harness::gen::{random_connected, random_ic_labels};
    use crate::instance::SteinerInstance;
    use crate::oracle::check_feasible;
    use crate::sim::bfs::build_bfs_tree;
    use rand::{Rng, SeedableRng};

    #[test]
    fn shared_ancestor_connects_both() {
        // 0 - 1 - 2 - 3 unit path; terminals 0 and 2, both at distance 1 of
        // node 1 which must outrank its ball.
        let g = WeightedGraph::new(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        let cfg = SimConfig::default();
        let (tree, _) = build_bfs_tree(&g, &cfg).unwrap();
        let inst = IcInstance::new(g.clone(), vec![Some(0), None, Some(0), None]);
        let seed = (0..)
            .find(|&s| {
                let (r, b) = crate::embed::tree::draw(4, s);
                r[1] > r[0] && r[1] > r[2] && b < crate::exact::q_u(2)
            })
            .unwrap();
        let (vt, _) = virtual_tree_on(&g, seed, TreeMode::Full, 2, &tree, &cfg).unwrap();
        assert_eq!(vt.ancestors[0][0].node, 1);
        assert_eq!(vt.ancestors[2][0].node, 1);
        let (out, _) = stage1_select(&inst, &vt, &tree, &cfg).unwrap();
        assert_eq!(out.phase_edges[0], vec![0, 1]);
        assert_eq!(out.forest, vec![0, 1]);
        // After the first phase one carrier holds the label alone.
        assert_eq!(out.purged[1], vec![0]);
    }

    #[test]
    fn full_tree_runs_are_feasible_and_within_the_tree_bound() {
        let cfg = SimConfig::default();
        for seed in 0..30u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 100);
            let n = rng.gen_range(3..=30);
            let g = random_connected(n, n + rng.gen_range(0..n), 9, &mut rng);
            let t = rng.gen_range(2..=n.min(10));
            let inst = IcInstance::new(g.clone(), random_ic_labels(n, t, rng.gen_range(1..=3), &mut rng)).minimalized();
            let (tree, _) = build_bfs_tree(&g, &cfg).unwrap();
            let (vt, _) = build_virtual_tree(&g, seed, TreeMode::Full, &cfg).unwrap();
            let (out, stats) = stage1_select(&inst, &vt, &tree, &cfg).unwrap();
            assert!(check_feasible(&SteinerInstance::Ic(inst.clone()), &out.forest));
            let m = all_pairs_shortest_paths(&g).unwrap();
            let bound = virtual_tree_optimum(&m, &vt.rank, &vt.beta, vt.levels, &inst.labels);
            assert!(crate::exact::q_u(g.total_weight(out.forest.iter().copied())) <= bound);
            assert!(stats.max_words <= cfg.words_per_msg);
        }
    }
}
