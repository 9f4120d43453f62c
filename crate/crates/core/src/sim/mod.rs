//! Round-synchronous CONGEST simulator.
//!
//! A [`NodeProgram`] is a per-node state machine. In round `r` every live node
//! sees the messages its neighbors sent in round `r - 1` and may send at most
//! one message of at most `words_per_msg` words over each incident edge.

pub mod bellman_ford;
pub mod bfs;
pub mod detect;
pub mod tree;

use std::collections::VecDeque;
use std::fmt::Debug;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Arc, NodeId, WeightedGraph};

pub use bfs::{build_bfs_tree, BfsInfo};

pub const DEFAULT_WORDS_PER_MSG: usize = 8;

/// A message: its size in words and a short kind tag for traces.
pub trait Payload: Clone + Debug {
    fn words(&self) -> usize;
    fn tag(&self) -> &'static str;
}

/// What a node knows about itself before the first round.
#[derive(Clone, Copy, Debug)]
pub struct NodeCtx<'a> {
    pub id: NodeId,
    /// Network size, known to all nodes.
    pub n: usize,
    /// Incident edges sorted by neighbor id.
    pub arcs: &'a [Arc],
}

impl NodeCtx<'_> {
    pub fn neighbors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.arcs.iter().map(|a| a.to)
    }

    pub fn arc_to(&self, v: NodeId) -> Option<&Arc> {
        self.arcs.binary_search_by_key(&v, |a| a.to).ok().map(|i| &self.arcs[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Has local work left regardless of incoming messages.
    Busy,
    /// Waits for messages.
    Idle,
    /// Terminated; the node takes no further steps.
    Done,
}

#[derive(Clone, Debug)]
pub struct Step<M> {
    pub out: Vec<(NodeId, M)>,
    pub status: Status,
}

impl<M> Step<M> {
    pub fn new(out: Vec<(NodeId, M)>, status: Status) -> Self {
        Step { out, status }
    }

    pub fn idle(out: Vec<(NodeId, M)>) -> Self {
        Step { out, status: Status::Idle }
    }

    pub fn busy(out: Vec<(NodeId, M)>) -> Self {
        Step { out, status: Status::Busy }
    }

    pub fn done(out: Vec<(NodeId, M)>) -> Self {
        Step { out, status: Status::Done }
    }
}

pub trait NodeProgram {
    type Input;
    type State;
    type Msg: Payload;
    type Output;

    fn init(&self, ctx: &NodeCtx, input: Self::Input) -> Self::State;

    /// One round. `inbox` holds `(sender, message)` sorted by sender.
    fn step(
        &self,
        ctx: &NodeCtx,
        st: &mut Self::State,
        round: usize,
        inbox: &[(NodeId, Self::Msg)],
        rng: &mut ChaCha8Rng,
    ) -> Step<Self::Msg>;

    fn output(&self, ctx: &NodeCtx, st: Self::State) -> Self::Output;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub words_per_msg: usize,
    /// Hard cap on the rounds of any single stage.
    pub round_cap: usize,
    pub seed: u64,
    /// Record every message in [`RunStats::trace`].
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            words_per_msg: DEFAULT_WORDS_PER_MSG,
            round_cap: 1_000_000,
            seed: 0,
            trace: false,
        }
    }
}

impl SimConfig {
    /// Cap for a stage with analytic bound `bound`: 64 times the bound, never
    /// above the configured cap.
    pub fn stage_cap(&self, bound: usize) -> usize {
        self.round_cap.min(bound.saturating_mul(64).max(64))
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SimError {
    #[error("round {round}: node {src} sent {words} words to {dst}, budget is {budget}")]
    BudgetViolation {
        round: usize,
        src: NodeId,
        dst: NodeId,
        words: usize,
        budget: usize,
    },
    #[error("round {round}: node {src} sent two messages to {dst}")]
    DuplicateMessage { round: usize, src: NodeId, dst: NodeId },
    #[error("round {round}: node {src} addressed non-neighbor {dst}")]
    NotNeighbor { round: usize, src: NodeId, dst: NodeId },
    #[error("stage {stage} exceeded the round cap {cap}")]
    RoundCapExceeded { stage: String, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub words: usize,
    pub tag: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub name: String,
    pub rounds: usize,
    pub messages: u64,
    /// True when the rounds were charged for an emulated step rather than
    /// simulated message by message.
    pub charged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub rounds: usize,
    pub messages: u64,
    pub words: u64,
    /// Largest message seen on any directed edge in any round.
    pub max_words: usize,
    /// Messages sent per round.
    pub per_round: Vec<u64>,
    /// Round in which each node terminated, counted over all stages.
    pub termination: Vec<usize>,
    /// Messages addressed to nodes that had already terminated.
    pub dropped: u64,
    /// Rounds charged for emulated steps (included in `rounds`).
    pub charged_rounds: usize,
    pub stages: Vec<StageStats>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl RunStats {
    fn single(name: &str, n: usize) -> Self {
        RunStats {
            termination: vec![0; n],
            stages: vec![StageStats {
                name: name.to_string(),
                ..Default::default()
            }],
            ..Default::default()
        }
    }

    /// Appends a later stage: its rounds start after the rounds of `self`.
    pub fn absorb(&mut self, other: RunStats) {
        let off = self.rounds;
        if self.termination.len() < other.termination.len() {
            self.termination.resize(other.termination.len(), off);
        }
        for (t, o) in self.termination.iter_mut().zip(&other.termination) {
            *t = off + o;
        }
        self.rounds += other.rounds;
        self.messages += other.messages;
        self.words += other.words;
        self.max_words = self.max_words.max(other.max_words);
        self.per_round.extend(other.per_round);
        self.dropped += other.dropped;
        self.charged_rounds += other.charged_rounds;
        self.stages.extend(other.stages);
        self.trace.extend(other.trace.into_iter().map(|mut r| {
            r.round += off;
            r
        }));
    }

    /// Accounts `rounds` rounds for a step that is computed without message
    /// simulation; all nodes are taken to finish together.
    pub fn charge(&mut self, name: &str, rounds: usize) {
        self.rounds += rounds;
        self.charged_rounds += rounds;
        self.per_round.extend(std::iter::repeat_n(0, rounds));
        let r = self.rounds;
        self.termination.iter_mut().for_each(|t| *t = r);
        self.stages.push(StageStats {
            name: name.to_string(),
            rounds,
            messages: 0,
            charged: true,
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Runs `prog` on `g` until every node has terminated.
///
/// A node that terminates in round `r` without sending anything only had to
/// read its inbox, so its termination round is `r - 1`.
pub fn run<P: NodeProgram>(
    g: &WeightedGraph,
    prog: &P,
    inputs: Vec<P::Input>,
    cfg: &SimConfig,
    stage: &str,
    cap: usize,
) -> Result<(Vec<P::Output>, RunStats), SimError> {
    let n = g.n();
    assert_eq!(inputs.len(), n, "one input per node");
    let ctxs: Vec<NodeCtx> = (0..n)
        .map(|id| NodeCtx {
            id,
            n,
            arcs: g.neighbors(id),
        })
        .collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|id| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(id as u64);
            r
        })
        .collect();
    let mut states: Vec<Option<P::State>> = inputs
        .into_iter()
        .enumerate()
        .map(|(v, i)| Some(prog.init(&ctxs[v], i)))
        .collect();
    let mut done = vec![false; n];
    let mut live = n;
    let mut stats = RunStats::single(stage, n);
    let mut inboxes: Vec<Vec<(NodeId, P::Msg)>> = (0..n).map(|_| Vec::new()).collect();
    let mut round = 0;
    while live > 0 {
        round += 1;
        if round > cap {
            return Err(SimError::RoundCapExceeded {
                stage: stage.to_string(),
                cap,
            });
        }
        let mut next: Vec<Vec<(NodeId, P::Msg)>> = (0..n).map(|_| Vec::new()).collect();
        let mut sent = 0u64;
        for v in 0..n {
            if done[v] {
                continue;
            }
            let inbox = std::mem::take(&mut inboxes[v]);
            let st = states[v].as_mut().expect("live node has state");
            let res = prog.step(&ctxs[v], st, round, &inbox, &mut rngs[v]);
            let mut seen: Vec<NodeId> = Vec::with_capacity(res.out.len());
            for (dst, msg) in res.out.iter() {
                let dst = *dst;
                if ctxs[v].arc_to(dst).is_none() {
                    return Err(SimError::NotNeighbor { round, src: v, dst });
                }
                if seen.contains(&dst) {
                    return Err(SimError::DuplicateMessage { round, src: v, dst });
                }
                seen.push(dst);
                let words = msg.words();
                if words > cfg.words_per_msg {
                    return Err(SimError::BudgetViolation {
                        round,
                        src: v,
                        dst,
                        words,
                        budget: cfg.words_per_msg,
                    });
                }
                stats.max_words = stats.max_words.max(words);
                stats.words += words as u64;
                sent += 1;
                if cfg.trace {
                    stats.trace.push(TraceRow {
                        round,
                        src: v,
                        dst,
                        words,
                        tag: msg.tag().to_string(),
                    });
                }
            }
            let sent_any = !res.out.is_empty();
            for (dst, msg) in res.out {
                next[dst].push((v, msg));
            }
            if res.status == Status::Done {
                done[v] = true;
                live -= 1;
                stats.termination[v] = if sent_any { round } else { round - 1 };
            }
        }
        for (dst, msgs) in next.iter_mut().enumerate() {
            if done[dst] {
                stats.dropped += msgs.len() as u64;
                msgs.clear();
            }
        }
        inboxes = next;
        stats.messages += sent;
        stats.per_round.push(sent);
    }
    stats.rounds = stats.termination.iter().copied().max().unwrap_or(0);
    stats.per_round.truncate(stats.rounds);
    stats.stages[0].rounds = stats.rounds;
    stats.stages[0].messages = stats.messages;
    let outputs = states
        .into_iter()
        .enumerate()
        .map(|(v, s)| prog.output(&ctxs[v], s.expect("state present")))
        .collect();
    Ok((outputs, stats))
}

/// Per-neighbor FIFO queues that release at most one message per neighbor
/// per round.
#[derive(Clone, Debug)]
pub struct Outbox<M> {
    queues: Vec<(NodeId, VecDeque<M>)>,
}

impl<M> Default for Outbox<M> {
    fn default() -> Self {
        Outbox { queues: Vec::new() }
    }
}

impl<M> Outbox<M> {
    pub fn push(&mut self, dst: NodeId, msg: M) {
        match self.queues.iter_mut().find(|(d, _)| *d == dst) {
            Some((_, q)) => q.push_back(msg),
            None => self.queues.push((dst, VecDeque::from([msg]))),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(|(_, q)| q.is_empty())
    }

    pub fn pending_to(&self, dst: NodeId) -> usize {
        self.queues.iter().find(|(d, _)| *d == dst).map_or(0, |(_, q)| q.len())
    }

    /// Releases the head of every non-empty queue.
    pub fn drain_round(&mut self) -> Vec<(NodeId, M)> {
        let mut out = Vec::new();
        for (d, q) in self.queues.iter_mut() {
            if let Some(m) = q.pop_front() {
                out.push((*d, m));
            }
        }
        out.sort_by_key(|(d, _)| *d);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug)]
    struct Token;
    impl Payload for Token {
        fn words(&self) -> usize {
            1
        }
        fn tag(&self) -> &'static str {
            "token"
        }
    }

    /// Node 0 starts a flood; every node forwards once and stops.
    struct Flood;
    impl NodeProgram for Flood {
        type Input = ();
        type State = bool;
        type Msg = Token;
        type Output = bool;
        fn init(&self, ctx: &NodeCtx, _: ()) -> bool {
            ctx.id == 0
        }
        fn step(&self, ctx: &NodeCtx, has: &mut bool, _r: usize, inbox: &[(NodeId, Token)], _: &mut ChaCha8Rng) -> Step<Token> {
            if *has || !inbox.is_empty() {
                *has = true;
                let out = ctx
                    .neighbors()
                    .filter(|v| !inbox.iter().any(|(s, _)| s == v))
                    .map(|v| (v, Token))
                    .collect();
                return Step::done(out);
            }
            Step::idle(Vec::new())
        }
        fn output(&self, _: &NodeCtx, has: bool) -> bool {
            has
        }
    }

    struct Wide(usize);
    impl Payload for Vec<u8> {
        fn words(&self) -> usize {
            self.len()
        }
        fn tag(&self) -> &'static str {
            "vec"
        }
    }
    impl NodeProgram for Wide {
        type Input = ();
        type State = ();
        type Msg = Vec<u8>;
        type Output = ();
        fn init(&self, _: &NodeCtx, _: ()) {}
        fn step(&self, ctx: &NodeCtx, _: &mut (), _r: usize, _: &[(NodeId, Vec<u8>)], _: &mut ChaCha8Rng) -> Step<Vec<u8>> {
            Step::done(ctx.neighbors().map(|v| (v, vec![0; self.0])).collect())
        }
        fn output(&self, _: &NodeCtx, _: ()) {}
    }

    fn path(n: usize) -> WeightedGraph {
        WeightedGraph::new(n, (1..n).map(|i| (i - 1, i, 1))).unwrap()
    }

    #[test]
    fn flood_on_a_path_takes_eccentricity_rounds() {
        let g = path(4);
        let (out, stats) = run(&g, &Flood, vec![(); 4], &SimConfig::default(), "flood", 100).unwrap();
        assert!(out.iter().all(|&b| b));
        assert_eq!(stats.rounds, 3);
        assert_eq!(stats.termination, vec![1, 2, 3, 3]);
        assert_eq!(stats.messages, 3);
    }

    #[test]
    fn oversized_messages_are_rejected() {
        let g = path(2);
        let cfg = SimConfig {
            words_per_msg: 2,
            ..Default::default()
        };
        assert!(run(&g, &Wide(2), vec![(); 2], &cfg, "w", 10).is_ok());
        let err = run(&g, &Wide(3), vec![(); 2], &cfg, "w", 10).unwrap_err();
        assert!(matches!(err, SimError::BudgetViolation { words: 3, budget: 2, .. }));
    }

    #[test]
    fn round_cap_is_enforced() {
        let g = path(6);
        let err = run(&g, &Flood, vec![(); 6], &SimConfig::default(), "flood", 3).unwrap_err();
        assert_eq!(
            err,
            SimError::RoundCapExceeded {
                stage: "flood".into(),
                cap: 3
            }
        );
    }

    #[test]
    fn stats_compose() {
        let g = path(4);
        let cfg = SimConfig {
            trace: true,
            ..Default::default()
        };
        let (_, a) = run(&g, &Flood, vec![(); 4], &cfg, "a", 100).unwrap();
        let mut total = a.clone();
        total.absorb(a.clone());
        total.charge("emulated", 5);
        assert_eq!(total.rounds, 11);
        assert_eq!(total.messages, 6);
        assert_eq!(total.charged_rounds, 5);
        assert_eq!(total.per_round.len(), 11);
        assert_eq!(total.trace.len(), 6);
        assert_eq!(total.trace[3].round, 4);
        assert_eq!(total.stages.len(), 3);
        let back: RunStats = serde_json::from_str(&total.to_json()).unwrap();
        assert_eq!(back.rounds, 11);
    }

    #[test]
    fn outbox_releases_one_message_per_neighbor() {
        let mut o = Outbox::default();
        o.push(3, 'a');
        o.push(1, 'b');
        o.push(3, 'c');
        assert_eq!(o.drain_round(), vec![(1, 'b'), (3, 'a')]);
        assert_eq!(o.pending_to(3), 1);
        assert_eq!(o.drain_round(), vec![(3, 'c')]);
        assert!(o.is_empty());
    }
}
