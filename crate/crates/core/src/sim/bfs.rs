//! BFS tree rooted at the node with the largest identifier: flood-max with
//! echo, then a halt wave from the root.

use std::cmp::Reverse;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, WeightedGraph};
use crate::sim::{run, NodeCtx, NodeProgram, Payload, RunStats, SimConfig, SimError, Step};

/// A node's view of the BFS tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfsInfo {
    pub root: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub children: Vec<NodeId>,
}

impl BfsInfo {
    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }
}

#[derive(Clone, Debug)]
pub enum BfsMsg {
    Announce {
        root: NodeId,
        depth: usize,
        parent: Option<NodeId>,
        done: bool,
    },
    Done { root: NodeId },
    Halt,
}

impl Payload for BfsMsg {
    fn words(&self) -> usize {
        match self {
            BfsMsg::Announce { .. } => 5,
            BfsMsg::Done { .. } => 2,
            BfsMsg::Halt => 1,
        }
    }
    fn tag(&self) -> &'static str {
        match self {
            BfsMsg::Announce { .. } => "bfs-announce",
            BfsMsg::Done { .. } => "bfs-done",
            BfsMsg::Halt => "bfs-halt",
        }
    }
}

pub struct BfsProgram;

#[derive(Clone, Debug)]
pub struct BfsState {
    root: NodeId,
    depth: usize,
    parent: Option<NodeId>,
    /// Latest announcement per neighbor, aligned with the arcs.
    heard: Vec<Option<(NodeId, usize, Option<NodeId>)>>,
    done_from: Vec<bool>,
    sent_done: bool,
    children: Vec<NodeId>,
}

impl BfsState {
    fn children_of(&self, ctx: &NodeCtx) -> Vec<NodeId> {
        ctx.arcs
            .iter()
            .zip(&self.heard)
            .filter(|(_, h)| matches!(h, Some((r, _, Some(p))) if *r == self.root && *p == ctx.id))
            .map(|(a, _)| a.to)
            .collect()
    }
}

impl NodeProgram for BfsProgram {
    type Input = ();
    type State = BfsState;
    type Msg = BfsMsg;
    type Output = BfsInfo;

    fn init(&self, ctx: &NodeCtx, _: ()) -> BfsState {
        BfsState {
            root: ctx.id,
            depth: 0,
            parent: None,
            heard: vec![None; ctx.arcs.len()],
            done_from: vec![false; ctx.arcs.len()],
            sent_done: false,
            children: Vec::new(),
        }
    }

    fn step(&self, ctx: &NodeCtx, st: &mut BfsState, round: usize, inbox: &[(NodeId, BfsMsg)], _: &mut ChaCha8Rng) -> Step<BfsMsg> {
        let idx = |v: NodeId| ctx.arcs.binary_search_by_key(&v, |a| a.to).expect("sender is a neighbor");
        let mut announce = round == 1;
        let mut best: Option<(NodeId, usize, NodeId)> = None;
        for (from, m) in inbox {
            match m {
                BfsMsg::Announce { root, depth, parent, done } => {
                    let i = idx(*from);
                    st.heard[i] = Some((*root, *depth, *parent));
                    if *done && *root == st.root {
                        st.done_from[i] = true;
                    }
                    let better = *root > st.root || (*root == st.root && depth + 1 < st.depth);
                    // Largest root, then smallest depth, then smallest sender.
                    let key = |r: NodeId, d: usize, f: NodeId| (r, Reverse(d), Reverse(f));
                    let beats_best = best.is_none_or(|(r, d, f)| key(*root, *depth, *from) > key(r, d, f));
                    if better && beats_best {
                        best = Some((*root, *depth, *from));
                    }
                }
                BfsMsg::Done { root } => {
                    if *root == st.root {
                        st.done_from[idx(*from)] = true;
                    }
                }
                BfsMsg::Halt => {
                    let out = st.children.iter().map(|&c| (c, BfsMsg::Halt)).collect();
                    return Step::done(out);
                }
            }
        }
        if let Some((root, depth, from)) = best {
            st.root = root;
            st.depth = depth + 1;
            st.parent = Some(from);
            st.sent_done = false;
            // Done flags for the new root may already have arrived this round.
            st.done_from.iter_mut().for_each(|d| *d = false);
            for (from, m) in inbox {
                if let BfsMsg::Announce { root, done: true, .. } = m {
                    if *root == st.root {
                        st.done_from[idx(*from)] = true;
                    }
                }
            }
            announce = true;
        }
        let all_heard = st.heard.iter().all(|h| matches!(h, Some((r, _, _)) if *r == st.root));
        let children = st.children_of(ctx);
        let kids_done = children.iter().all(|&c| st.done_from[idx(c)]);
        let mut done_now = false;
        if !st.sent_done && all_heard && kids_done {
            st.children = children;
            if st.parent.is_none() {
                let out = st.children.iter().map(|&c| (c, BfsMsg::Halt)).collect();
                return Step::done(out);
            }
            st.sent_done = true;
            done_now = true;
        }
        let mut out = Vec::new();
        if announce {
            for a in ctx.arcs {
                out.push((
                    a.to,
                    BfsMsg::Announce {
                        root: st.root,
                        depth: st.depth,
                        parent: st.parent,
                        done: done_now && Some(a.to) == st.parent,
                    },
                ));
            }
        } else if done_now {
            out.push((st.parent.unwrap(), BfsMsg::Done { root: st.root }));
        }
        Step::idle(out)
    }

    fn output(&self, _: &NodeCtx, st: BfsState) -> BfsInfo {
        BfsInfo {
            root: st.root,
            parent: st.parent,
            depth: st.depth,
            children: st.children,
        }
    }
}

/// Builds the BFS tree; O(D) rounds.
pub fn build_bfs_tree(g: &WeightedGraph, cfg: &SimConfig) -> Result<(Vec<BfsInfo>, RunStats), SimError> {
    let cap = cfg.stage_cap(3 * g.n() + 3);
    run(g, &BfsProgram, vec![(); g.n()], cfg, "bfs-tree", cap)
}
