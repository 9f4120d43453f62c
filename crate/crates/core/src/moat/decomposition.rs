//! Terminal decomposition: per merge phase, every node reachable from an
//! active moat through uncovered territory is assigned to the terminal with
//! the least reduced distance, along a shortest-path tree rooted there.
//! Nodes covered by a moat keep their owner and tree position for good.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::exact::{q_u, Q};
use crate::graph::{NodeId, Weight, WeightedGraph};
use crate::moat::candidate::CandidateMerge;

/// Per-node region data carried across merge phases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionState {
    pub owner: Vec<Option<NodeId>>,
    pub parent: Vec<Option<NodeId>>,
    /// Weight of the tree path from the owner.
    pub reach: Vec<Weight>,
    pub covered: Vec<bool>,
}

impl RegionState {
    /// Terminals own themselves and are covered from the start.
    pub fn new(n: usize, terminals: &[NodeId]) -> Self {
        let mut s = RegionState {
            owner: vec![None; n],
            parent: vec![None; n],
            reach: vec![0; n],
            covered: vec![false; n],
        };
        for &v in terminals {
            s.owner[v] = Some(v);
            s.covered[v] = true;
        }
        s
    }

    /// Node sequence from the owner of `x` down to `x`.
    pub fn tree_path(&self, x: NodeId) -> Vec<NodeId> {
        let mut p = vec![x];
        let mut cur = x;
        while let Some(par) = self.parent[cur] {
            p.push(par);
            cur = par;
        }
        p.reverse();
        p
    }
}

/// Reduced distance of every owned node at the start of a phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseView {
    pub delta: Vec<Option<Q>>,
}

/// Recomputes the uncovered part of the decomposition for a new phase.
///
/// `active[v]` and `radius[v]` are indexed by node and only read at
/// terminals. Returns the reduced distances `reach - radius(owner)`.
pub fn start_phase(g: &WeightedGraph, st: &mut RegionState, active: &[bool], radius: &[Q]) -> PhaseView {
    let n = g.n();
    let mut delta: Vec<Option<Q>> = vec![None; n];
    let mut best: Vec<Option<(Q, NodeId)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for u in 0..n {
        if st.covered[u] {
            let o = st.owner[u].expect("covered nodes are owned");
            let d = q_u(st.reach[u]) - &radius[o];
            delta[u] = Some(d.clone());
            if active[o] {
                heap.push(Reverse((d, o, u)));
            }
        } else {
            st.owner[u] = None;
            st.parent[u] = None;
            st.reach[u] = 0;
        }
    }
    let mut settled_free = Vec::new();
    while let Some(Reverse((d, o, u))) = heap.pop() {
        if !st.covered[u] {
            if best[u].as_ref() != Some(&(d.clone(), o)) || delta[u].is_some() {
                continue;
            }
            delta[u] = Some(d.clone());
            st.owner[u] = Some(o);
            settled_free.push(u);
        }
        for a in g.neighbors(u) {
            let y = a.to;
            if st.covered[y] || delta[y].is_some() {
                continue;
            }
            let cand = (&d + q_u(a.w), o);
            if best[y].as_ref().is_none_or(|b| cand < *b) {
                best[y] = Some(cand.clone());
                heap.push(Reverse((cand.0, cand.1, y)));
            }
        }
    }
    for &u in &settled_free {
        let du = delta[u].clone().unwrap();
        let o = st.owner[u];
        let par = g
            .neighbors(u)
            .iter()
            .find(|a| {
                st.owner[a.to] == o
                    && delta[a.to].as_ref().is_some_and(|dp| dp + q_u(a.w) == du)
                    && (st.covered[a.to] || settled_before(&delta, a.to, u))
            })
            .expect("a settled node has a tight predecessor");
        st.parent[u] = Some(par.to);
        st.reach[u] = st.reach[par.to] + par.w;
    }
    PhaseView { delta }
}

/// A tight predecessor has strictly smaller reduced distance since weights
/// are positive, so it was settled (and its reach fixed) first.
fn settled_before(delta: &[Option<Q>], p: NodeId, u: NodeId) -> bool {
    delta[p] < delta[u]
}

/// Closes a phase after total growth `growth`: uncovered nodes of active
/// owners with reduced distance at most `growth` become covered.
pub fn end_phase(st: &mut RegionState, view: &PhaseView, active: &[bool], growth: &Q) {
    for u in 0..st.owner.len() {
        if st.covered[u] {
            continue;
        }
        match (st.owner[u], &view.delta[u]) {
            (Some(o), Some(d)) if active[o] && d <= growth => st.covered[u] = true,
            _ => {
                st.owner[u] = None;
                st.parent[u] = None;
                st.reach[u] = 0;
            }
        }
    }
}

/// Candidate merges of a phase: every edge whose endpoints are owned by
/// terminals in different moats, at least one of them active.
/// `moat_of[v]` identifies the moat of terminal `v`.
pub fn candidates(
    g: &WeightedGraph,
    st: &RegionState,
    view: &PhaseView,
    active: &[bool],
    moat_of: &[usize],
    phase: usize,
) -> Vec<CandidateMerge> {
    let mut out = Vec::new();
    for e in g.edges() {
        if let Some(c) = edge_candidate(st, view, active, moat_of, phase, e.u, e.v, e.w) {
            out.push(c);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn edge_candidate(
    st: &RegionState,
    view: &PhaseView,
    active: &[bool],
    moat_of: &[usize],
    phase: usize,
    x: NodeId,
    y: NodeId,
    w: Weight,
) -> Option<CandidateMerge> {
    let (ox, oy) = (st.owner[x]?, st.owner[y]?);
    if moat_of[ox] == moat_of[oy] {
        return None;
    }
    let (dx, dy) = (view.delta[x].as_ref()?, view.delta[y].as_ref()?);
    let sum = dx + q_u(w) + dy;
    let w_hat = match (active[ox], active[oy]) {
        (true, true) => sum / q_u(2),
        (true, false) | (false, true) => sum,
        (false, false) => return None,
    };
    Some(CandidateMerge::new(phase, w_hat, ox, oy, x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{q, q_frac};

    #[test]
    fn two_terminals_on_a_path() {
        // 0 -2- 1 -2- 2 -2- 3, terminals 0 and 3.
        let g = WeightedGraph::new(4, [(0, 1, 2), (1, 2, 2), (2, 3, 2)]).unwrap();
        let mut st = RegionState::new(4, &[0, 3]);
        let active = vec![true, false, false, true];
        let radius = vec![q(0); 4];
        let view = start_phase(&g, &mut st, &active, &radius);
        assert_eq!(st.owner, vec![Some(0), Some(0), Some(3), Some(3)]);
        assert_eq!(st.parent, vec![None, Some(0), Some(3), None]);
        let moat_of = vec![0, 1, 2, 3];
        let c = candidates(&g, &st, &view, &active, &moat_of, 1);
        assert_eq!(c, vec![CandidateMerge::new(1, q(3), 0, 3, 1, 2)]);
        assert_eq!(st.tree_path(1), vec![0, 1]);
    }

    #[test]
    fn voronoi_tie_goes_to_smaller_owner() {
        // 0 -1- 1 -1- 2 -1- 3 -1- 4, terminals 0 and 4; node 2 is equidistant.
        let g = WeightedGraph::new(5, (0..4).map(|i| (i, i + 1, 1))).unwrap();
        let mut st = RegionState::new(5, &[0, 4]);
        let active = vec![true, false, false, false, true];
        let view = start_phase(&g, &mut st, &active, &vec![q(0); 5]);
        assert_eq!(st.owner[2], Some(0));
        assert_eq!(view.delta[2], Some(q(2)));
    }

    #[test]
    fn covered_nodes_persist_and_inactive_do_not_relay() {
        // Triangle-free chain 0 -1- 1 -1- 2 -3- 3, terminals 0 and 3.
        let g = WeightedGraph::new(4, [(0, 1, 1), (1, 2, 1), (2, 3, 3)]).unwrap();
        let mut st = RegionState::new(4, &[0, 3]);
        let active = vec![true, false, false, true];
        let view = start_phase(&g, &mut st, &active, &vec![q(0); 4]);
        end_phase(&mut st, &view, &active, &q(1));
        assert!(st.covered[1] && !st.covered[2]);
        // Terminal 0 goes inactive with radius 1; 3 keeps growing.
        let active = vec![false, false, false, true];
        let radius = vec![q(1), q(0), q(0), q(1)];
        let view = start_phase(&g, &mut st, &active, &radius);
        assert_eq!(st.owner[2], Some(3));
        assert_eq!(view.delta[2], Some(q(2)));
        assert_eq!(view.delta[1], Some(q(0)));
        let moat_of = vec![0, 1, 2, 3];
        let c = candidates(&g, &st, &view, &active, &moat_of, 2);
        assert_eq!(c, vec![CandidateMerge::new(2, q(3), 0, 3, 1, 2)]);
    }

    #[test]
    fn active_pair_weight_is_halved() {
        let g = WeightedGraph::new(2, [(0, 1, 3)]).unwrap();
        let mut st = RegionState::new(2, &[0, 1]);
        let active = vec![true, true];
        let view = start_phase(&g, &mut st, &active, &vec![q(0); 2]);
        let c = candidates(&g, &st, &view, &active, &[0, 1], 1);
        assert_eq!(c[0].w_hat, q_frac(3, 2));
    }
}
