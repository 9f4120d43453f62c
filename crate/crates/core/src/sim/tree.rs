//! Pipelined primitives over a rooted BFS tree: broadcast from the root,
//! filtered convergecast to the root, and a global minimum.

use std::collections::VecDeque;
use std::marker::PhantomData;

use rand_chacha::ChaCha8Rng;

use crate::graph::{NodeId, WeightedGraph};
use crate::sim::bfs::BfsInfo;
use crate::sim::{run, NodeCtx, NodeProgram, Payload, RunStats, SimConfig, SimError, Step};

#[derive(Clone, Debug)]
pub enum Stream<T> {
    Item(T),
    End,
}

impl<T: Payload> Payload for Stream<T> {
    fn words(&self) -> usize {
        match self {
            Stream::Item(t) => t.words(),
            Stream::End => 1,
        }
    }
    fn tag(&self) -> &'static str {
        match self {
            Stream::Item(t) => t.tag(),
            Stream::End => "end",
        }
    }
}

impl Payload for NodeId {
    fn words(&self) -> usize {
        2
    }
    fn tag(&self) -> &'static str {
        "id"
    }
}

impl Payload for (NodeId, NodeId) {
    fn words(&self) -> usize {
        3
    }
    fn tag(&self) -> &'static str {
        "pair"
    }
}

impl Payload for (NodeId, NodeId, NodeId) {
    fn words(&self) -> usize {
        4
    }
    fn tag(&self) -> &'static str {
        "triple"
    }
}

/// Pipelined broadcast of the root's item list, one item per round.
pub struct Broadcast<T>(pub PhantomData<T>);

pub struct BroadcastState<T> {
    tree: BfsInfo,
    queue: VecDeque<Stream<T>>,
    got: Vec<T>,
    ended: bool,
}

impl<T: Payload> NodeProgram for Broadcast<T> {
    type Input = (BfsInfo, Option<Vec<T>>);
    type State = BroadcastState<T>;
    type Msg = Stream<T>;
    type Output = Vec<T>;

    fn init(&self, _: &NodeCtx, (tree, items): Self::Input) -> Self::State {
        let mut st = BroadcastState {
            tree,
            queue: VecDeque::new(),
            got: Vec::new(),
            ended: false,
        };
        if let Some(items) = items {
            st.queue.extend(items.iter().cloned().map(Stream::Item));
            st.queue.push_back(Stream::End);
            st.got = items;
            st.ended = true;
        }
        st
    }

    fn step(&self, _: &NodeCtx, st: &mut Self::State, _: usize, inbox: &[(NodeId, Stream<T>)], _: &mut ChaCha8Rng) -> Step<Stream<T>> {
        for (_, m) in inbox {
            match m {
                Stream::Item(t) => st.got.push(t.clone()),
                Stream::End => st.ended = true,
            }
            st.queue.push_back(m.clone());
        }
        let mut out = Vec::new();
        if let Some(m) = st.queue.pop_front() {
            out = st.tree.children.iter().map(|&c| (c, m.clone())).collect();
        }
        if st.ended && st.queue.is_empty() {
            Step::done(out)
        } else {
            Step::idle(out)
        }
    }

    fn output(&self, _: &NodeCtx, st: Self::State) -> Vec<T> {
        st.got
    }
}

/// Node-local admission rule of a convergecast: items a node refuses are
/// neither forwarded nor delivered.
pub trait ItemFilter<T> {
    fn admit(&mut self, item: &T) -> bool;
}

/// Admits everything.
#[derive(Clone, Debug, Default)]
pub struct KeepAll;

impl<T> ItemFilter<T> for KeepAll {
    fn admit(&mut self, _: &T) -> bool {
        true
    }
}

/// Pipelined convergecast of all admitted items to the root.
pub struct Gather<T, F>(pub PhantomData<(T, F)>);

pub struct GatherState<T, F> {
    tree: BfsInfo,
    queue: VecDeque<T>,
    filter: F,
    ended: usize,
    got: Vec<T>,
}

impl<T: Payload, F: ItemFilter<T>> NodeProgram for Gather<T, F> {
    type Input = (BfsInfo, Vec<T>, F);
    type State = GatherState<T, F>;
    type Msg = Stream<T>;
    type Output = Vec<T>;

    fn init(&self, _: &NodeCtx, (tree, items, filter): Self::Input) -> Self::State {
        GatherState {
            tree,
            queue: items.into(),
            filter,
            ended: 0,
            got: Vec::new(),
        }
    }

    fn step(&self, _: &NodeCtx, st: &mut Self::State, _: usize, inbox: &[(NodeId, Stream<T>)], _: &mut ChaCha8Rng) -> Step<Stream<T>> {
        for (_, m) in inbox {
            match m {
                Stream::Item(t) => st.queue.push_back(t.clone()),
                Stream::End => st.ended += 1,
            }
        }
        let all_ended = st.ended == st.tree.children.len();
        match st.tree.parent {
            None => {
                while let Some(t) = st.queue.pop_front() {
                    if st.filter.admit(&t) {
                        st.got.push(t);
                    }
                }
                if all_ended {
                    Step::done(Vec::new())
                } else {
                    Step::idle(Vec::new())
                }
            }
            Some(p) => {
                while let Some(t) = st.queue.pop_front() {
                    if st.filter.admit(&t) {
                        return Step::busy(vec![(p, Stream::Item(t))]);
                    }
                }
                if all_ended {
                    Step::done(vec![(p, Stream::End)])
                } else {
                    Step::idle(Vec::new())
                }
            }
        }
    }

    fn output(&self, _: &NodeCtx, st: Self::State) -> Vec<T> {
        st.got
    }
}

/// Convergecast of the least value followed by its broadcast.
pub struct TreeMin<T>(pub PhantomData<T>);

#[derive(Clone, Debug)]
pub enum MinMsg<T> {
    Up(Option<T>),
    Down(Option<T>),
}

impl<T: Payload> Payload for MinMsg<T> {
    fn words(&self) -> usize {
        match self {
            MinMsg::Up(Some(t)) | MinMsg::Down(Some(t)) => t.words(),
            _ => 1,
        }
    }
    fn tag(&self) -> &'static str {
        match self {
            MinMsg::Up(_) => "min-up",
            MinMsg::Down(_) => "min-down",
        }
    }
}

pub struct MinState<T> {
    tree: BfsInfo,
    best: Option<T>,
    heard: usize,
    sent: bool,
}

impl<T: Payload + Ord> NodeProgram for TreeMin<T> {
    type Input = (BfsInfo, Option<T>);
    type State = MinState<T>;
    type Msg = MinMsg<T>;
    type Output = Option<T>;

    fn init(&self, _: &NodeCtx, (tree, v): Self::Input) -> Self::State {
        MinState {
            tree,
            best: v,
            heard: 0,
            sent: false,
        }
    }

    fn step(&self, _: &NodeCtx, st: &mut Self::State, _: usize, inbox: &[(NodeId, MinMsg<T>)], _: &mut ChaCha8Rng) -> Step<MinMsg<T>> {
        for (_, m) in inbox {
            match m {
                MinMsg::Up(v) => {
                    st.heard += 1;
                    if let Some(v) = v {
                        if st.best.as_ref().is_none_or(|b| v < b) {
                            st.best = Some(v.clone());
                        }
                    }
                }
                MinMsg::Down(v) => {
                    st.best = v.clone();
                    let out = st.tree.children.iter().map(|&c| (c, MinMsg::Down(v.clone()))).collect();
                    return Step::done(out);
                }
            }
        }
        if !st.sent && st.heard == st.tree.children.len() {
            st.sent = true;
            match st.tree.parent {
                Some(p) => return Step::idle(vec![(p, MinMsg::Up(st.best.clone()))]),
                None => {
                    let out = st.tree.children.iter().map(|&c| (c, MinMsg::Down(st.best.clone()))).collect();
                    return Step::done(out);
                }
            }
        }
        Step::idle(Vec::new())
    }

    fn output(&self, _: &NodeCtx, st: Self::State) -> Option<T> {
        st.best
    }
}

/// Convergecast of a sum followed by its broadcast.
pub struct TreeSum;

#[derive(Clone, Debug)]
pub enum SumMsg {
    Up(u64),
    Down(u64),
}

impl Payload for SumMsg {
    fn words(&self) -> usize {
        2
    }
    fn tag(&self) -> &'static str {
        match self {
            SumMsg::Up(_) => "sum-up",
            SumMsg::Down(_) => "sum-down",
        }
    }
}

impl NodeProgram for TreeSum {
    type Input = (BfsInfo, u64);
    type State = (BfsInfo, u64, usize, bool);
    type Msg = SumMsg;
    type Output = u64;

    fn init(&self, _: &NodeCtx, (tree, v): Self::Input) -> Self::State {
        (tree, v, 0, false)
    }

    fn step(&self, _: &NodeCtx, st: &mut Self::State, _: usize, inbox: &[(NodeId, SumMsg)], _: &mut ChaCha8Rng) -> Step<SumMsg> {
        let (tree, acc, heard, sent) = st;
        for (_, m) in inbox {
            match m {
                SumMsg::Up(x) => {
                    *acc += x;
                    *heard += 1;
                }
                SumMsg::Down(x) => {
                    *acc = *x;
                    return Step::done(tree.children.iter().map(|&c| (c, SumMsg::Down(*x))).collect());
                }
            }
        }
        if !*sent && *heard == tree.children.len() {
            *sent = true;
            return match tree.parent {
                Some(p) => Step::idle(vec![(p, SumMsg::Up(*acc))]),
                None => Step::done(tree.children.iter().map(|&c| (c, SumMsg::Down(*acc))).collect()),
            };
        }
        Step::idle(Vec::new())
    }

    fn output(&self, _: &NodeCtx, st: Self::State) -> u64 {
        st.1
    }
}

fn depth_bound(tree: &[BfsInfo]) -> usize {
    tree.iter().map(|t| t.depth).max().unwrap_or(0) + 1
}

/// Makes the root's items known to every node; returns the common list.
pub fn broadcast<T: Payload + PartialEq>(
    g: &WeightedGraph,
    tree: &[BfsInfo],
    items: Vec<T>,
    cfg: &SimConfig,
    stage: &str,
) -> Result<(Vec<T>, RunStats), SimError> {
    let cap = cfg.stage_cap(depth_bound(tree) + items.len() + 2);
    let mut items = Some(items);
    let inputs = tree
        .iter()
        .map(|t| (t.clone(), if t.is_root() { items.take() } else { None }))
        .collect();
    let (outs, stats) = run(g, &Broadcast(PhantomData), inputs, cfg, stage, cap)?;
    let first = outs[0].clone();
    debug_assert!(outs.iter().all(|o| *o == first));
    Ok((first, stats))
}

/// Collects every node's admitted items at the root.
pub fn gather<T: Payload, F: ItemFilter<T>>(
    g: &WeightedGraph,
    tree: &[BfsInfo],
    items: Vec<Vec<T>>,
    filters: Vec<F>,
    cfg: &SimConfig,
    stage: &str,
) -> Result<(Vec<T>, RunStats), SimError> {
    let total: usize = items.iter().map(Vec::len).sum();
    let cap = cfg.stage_cap(depth_bound(tree) + total + 2);
    let inputs = tree
        .iter()
        .cloned()
        .zip(items)
        .zip(filters)
        .map(|((t, i), f)| (t, i, f))
        .collect();
    let (outs, stats) = run(g, &Gather(PhantomData), inputs, cfg, stage, cap)?;
    let root = tree.iter().position(BfsInfo::is_root).expect("tree has a root");
    Ok((outs.into_iter().nth(root).unwrap(), stats))
}

/// The least of the nodes' values, known to every node afterwards.
pub fn tree_min<T: Payload + Ord>(
    g: &WeightedGraph,
    tree: &[BfsInfo],
    values: Vec<Option<T>>,
    cfg: &SimConfig,
    stage: &str,
) -> Result<(Option<T>, RunStats), SimError> {
    let cap = cfg.stage_cap(2 * depth_bound(tree) + 2);
    let inputs = tree.iter().cloned().zip(values).collect();
    let (outs, stats) = run(g, &TreeMin(PhantomData), inputs, cfg, stage, cap)?;
    Ok((outs.into_iter().next().unwrap(), stats))
}

/// The sum of the nodes' values, known to every node afterwards.
pub fn tree_sum(g: &WeightedGraph, tree: &[BfsInfo], values: Vec<u64>, cfg: &SimConfig, stage: &str) -> Result<(u64, RunStats), SimError> {
    let cap = cfg.stage_cap(2 * depth_bound(tree) + 2);
    let inputs = tree.iter().cloned().zip(values).collect();
    let (outs, stats) = run(g, &TreeSum, inputs, cfg, stage, cap)?;
    debug_assert!(outs.iter().all(|o| *o == outs[0]));
    Ok((outs[0], stats))
}
