//! Quiescence detection over the BFS tree.
//!
//! Every node reports to its parent the last round in which some node of its
//! subtree was active, together with the round up to which that report is
//! complete. Once the root knows that nothing happened after the last
//! activity, it floods a halt message down the tree.

use rand_chacha::ChaCha8Rng;

use crate::graph::NodeId;
use crate::sim::bfs::BfsInfo;
use crate::sim::{NodeCtx, NodeProgram, Payload, Status, Step};

pub struct Detect<P> {
    pub inner: P,
    /// Word budget; reports ride along with inner messages when they fit.
    pub budget: usize,
}

pub struct DetectInput<I> {
    pub tree: BfsInfo,
    pub inner: I,
}

#[derive(Clone, Debug)]
pub enum DetectMsg<M> {
    Inner(M),
    Report { active: usize, upto: usize },
    Both(M, usize, usize),
    Halt,
}

impl<M: Payload> Payload for DetectMsg<M> {
    fn words(&self) -> usize {
        match self {
            DetectMsg::Inner(m) => m.words(),
            DetectMsg::Report { .. } => 3,
            DetectMsg::Both(m, _, _) => m.words() + 2,
            DetectMsg::Halt => 1,
        }
    }
    fn tag(&self) -> &'static str {
        match self {
            DetectMsg::Inner(m) | DetectMsg::Both(m, _, _) => m.tag(),
            DetectMsg::Report { .. } => "detect-report",
            DetectMsg::Halt => "detect-halt",
        }
    }
}

pub struct DetectState<S> {
    inner: S,
    tree: BfsInfo,
    inner_done: bool,
    last_active: usize,
    /// Latest `(active, upto)` report per child, aligned with `tree.children`.
    reports: Vec<Option<(usize, usize)>>,
}

impl<P: NodeProgram> NodeProgram for Detect<P> {
    type Input = DetectInput<P::Input>;
    type State = DetectState<P::State>;
    type Msg = DetectMsg<P::Msg>;
    type Output = P::Output;

    fn init(&self, ctx: &NodeCtx, input: Self::Input) -> Self::State {
        let k = input.tree.children.len();
        DetectState {
            inner: self.inner.init(ctx, input.inner),
            tree: input.tree,
            inner_done: false,
            last_active: 0,
            reports: vec![None; k],
        }
    }

    fn step(
        &self,
        ctx: &NodeCtx,
        st: &mut Self::State,
        round: usize,
        inbox: &[(NodeId, Self::Msg)],
        rng: &mut ChaCha8Rng,
    ) -> Step<Self::Msg> {
        let mut inner_in = Vec::new();
        for (from, m) in inbox {
            let child = st.tree.children.iter().position(|c| c == from);
            match m {
                DetectMsg::Inner(x) => inner_in.push((*from, x.clone())),
                DetectMsg::Report { active, upto } => {
                    if let Some(i) = child {
                        st.reports[i] = Some((*active, *upto));
                    }
                }
                DetectMsg::Both(x, a, r) => {
                    if let Some(i) = child {
                        st.reports[i] = Some((*a, *r));
                    }
                    inner_in.push((*from, x.clone()));
                }
                DetectMsg::Halt => {
                    let out = st.tree.children.iter().map(|&c| (c, DetectMsg::Halt)).collect();
                    return Step::done(out);
                }
            }
        }
        let mut inner_out = Vec::new();
        let mut active = !inner_in.is_empty();
        if !st.inner_done {
            let res = self.inner.step(ctx, &mut st.inner, round, &inner_in, rng);
            active |= !res.out.is_empty() || res.status == Status::Busy;
            st.inner_done = res.status == Status::Done;
            inner_out = res.out;
        }
        if active {
            st.last_active = round;
        }
        let mut a = st.last_active;
        let mut upto = round;
        for r in &st.reports {
            match r {
                Some((ca, cr)) => {
                    a = a.max(*ca);
                    upto = upto.min(*cr);
                }
                None => upto = 0,
            }
        }
        match st.tree.parent {
            None => {
                if upto > a {
                    let mut out: Vec<_> = inner_out.into_iter().map(|(d, m)| (d, DetectMsg::Inner(m))).collect();
                    debug_assert!(out.is_empty(), "quiescent root sends nothing");
                    out.extend(st.tree.children.iter().map(|&c| (c, DetectMsg::Halt)));
                    return Step::done(out);
                }
                Step::idle(inner_out.into_iter().map(|(d, m)| (d, DetectMsg::Inner(m))).collect())
            }
            Some(p) => {
                let mut out = Vec::with_capacity(inner_out.len() + 1);
                let mut reported = false;
                for (d, m) in inner_out {
                    if d == p && m.words() + 2 <= self.budget {
                        out.push((d, DetectMsg::Both(m, a, upto)));
                        reported = true;
                    } else {
                        if d == p {
                            reported = true;
                        }
                        out.push((d, DetectMsg::Inner(m)));
                    }
                }
                if !reported {
                    out.push((p, DetectMsg::Report { active: a, upto }));
                }
                Step::idle(out)
            }
        }
    }

    fn output(&self, ctx: &NodeCtx, st: Self::State) -> P::Output {
        self.inner.output(ctx, st.inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::sim::bfs::build_bfs_tree;
    use crate::sim::{run, SimConfig};

    #[derive(Clone, Debug)]
    struct Ping(usize);
    impl Payload for Ping {
        fn words(&self) -> usize {
            2
        }
        fn tag(&self) -> &'static str {
            "ping"
        }
    }

    /// Node 0 sends a counter along the path until it reaches the far end,
    /// then falls silent; nobody knows when that happens.
    struct Relay;
    impl NodeProgram for Relay {
        type Input = ();
        type State = Option<usize>;
        type Msg = Ping;
        type Output = Option<usize>;
        fn init(&self, ctx: &NodeCtx, _: ()) -> Option<usize> {
            (ctx.id == 0).then_some(0)
        }
        fn step(&self, ctx: &NodeCtx, st: &mut Option<usize>, round: usize, inbox: &[(NodeId, Ping)], _: &mut ChaCha8Rng) -> Step<Ping> {
            if let Some((_, Ping(c))) = inbox.first() {
                *st = Some(c + 1);
            }
            let fire = (round == 1 && ctx.id == 0) || !inbox.is_empty();
            let out = match (*st, fire) {
                (Some(c), true) => ctx.neighbors().filter(|&v| v > ctx.id).map(|v| (v, Ping(c))).collect(),
                _ => Vec::new(),
            };
            Step::idle(out)
        }
        fn output(&self, _: &NodeCtx, st: Option<usize>) -> Option<usize> {
            st
        }
    }

    #[test]
    fn halts_after_quiescence() {
        let n = 7;
        let g = WeightedGraph::new(n, (1..n).map(|i| (i - 1, i, 1))).unwrap();
        let cfg = SimConfig::default();
        let (tree, _) = build_bfs_tree(&g, &cfg).unwrap();
        let inputs = tree.into_iter().map(|t| DetectInput { tree: t, inner: () }).collect();
        let prog = Detect { inner: Relay, budget: 8 };
        let (out, stats) = run(&g, &prog, inputs, &cfg, "relay", 1000).unwrap();
        assert_eq!(out, (0..n).map(Some).collect::<Vec<_>>());
        // The relay ends at round n; reports climb n-1 hops and the halt
        // travels back down.
        assert!(stats.rounds >= n);
        assert!(stats.rounds <= 3 * n + 2, "rounds {}", stats.rounds);
    }

    #[test]
    fn single_node_halts_at_once() {
        let g = WeightedGraph::new(1, []).unwrap();
        let cfg = SimConfig::default();
        let (tree, _) = build_bfs_tree(&g, &cfg).unwrap();
        let inputs = tree.into_iter().map(|t| DetectInput { tree: t, inner: () }).collect();
        let prog = Detect { inner: Relay, budget: 8 };
        let (_, stats) = run(&g, &prog, inputs, &cfg, "relay", 10).unwrap();
        assert!(stats.rounds <= 1);
    }
}
