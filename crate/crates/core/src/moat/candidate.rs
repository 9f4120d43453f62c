//! Candidate merges and their total order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::exact::{serde_q, Q};
use crate::graph::NodeId;

/// Direction of the identifier tie-break in the candidate order. Both the
/// centralized and the distributed algorithms take it as a parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    IdAscending,
    IdDescending,
}

impl TieBreak {
    pub fn cmp_ids<T: Ord>(self, a: &T, b: &T) -> Ordering {
        match self {
            TieBreak::IdAscending => a.cmp(b),
            TieBreak::IdDescending => b.cmp(a),
        }
    }
}

/// A proposal to merge the moats of terminals `pair` in merge phase `phase`
/// at reduced weight `w_hat`, induced by the graph edge `edge`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateMerge {
    pub phase: usize,
    #[serde(with = "serde_q")]
    pub w_hat: Q,
    /// Terminals, smaller id first.
    pub pair: (NodeId, NodeId),
    /// Endpoints of the inducing edge, smaller id first.
    pub edge: (NodeId, NodeId),
}

impl CandidateMerge {
    pub fn new(phase: usize, w_hat: Q, v: NodeId, w: NodeId, x: NodeId, y: NodeId) -> Self {
        CandidateMerge {
            phase,
            w_hat,
            pair: (v.min(w), v.max(w)),
            edge: (x.min(y), x.max(y)),
        }
    }

    /// Order by phase, then reduced weight, then pair ids, then edge ids.
    pub fn cmp_by(&self, other: &Self, tb: TieBreak) -> Ordering {
        self.phase
            .cmp(&other.phase)
            .then_with(|| self.w_hat.cmp(&other.w_hat))
            .then_with(|| tb.cmp_ids(&(self.pair, self.edge), &(other.pair, other.edge)))
    }
}

pub fn sort_candidates(c: &mut [CandidateMerge], tb: TieBreak) {
    c.sort_by(|a, b| a.cmp_by(b, tb));
}
