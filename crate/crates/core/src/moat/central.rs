//! Centralized moat growing, exact and with rounded radii.

use num_traits::{One, Zero};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::exact::{q, q_u, serde_q, serde_q_vec, Q};
use crate::graph::{all_pairs_shortest_paths, EdgeId, GraphError, GraphMetrics, NodeId};
use crate::instance::{ForestSolution, IcInstance, Label, SteinerInstance};
use crate::moat::candidate::{sort_candidates, CandidateMerge, TieBreak};
use crate::moat::decomposition::{candidates, end_phase, start_phase, PhaseView, RegionState};
use crate::oracle::minimal_subforest;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum MoatError {
    #[error("instance is not minimal: some label has a single terminal")]
    NotMinimalInstance,
    #[error("epsilon must be positive")]
    InvalidEpsilon,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One iteration of the main loop.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStep {
    /// Merge phase the step belongs to (1-based).
    pub phase: usize,
    #[serde(with = "serde_q")]
    pub mu: Q,
    /// Number of active moats during the step.
    pub active_moats: usize,
    /// True for a rounded-radius checkpoint (no merge).
    pub checkpoint: bool,
    /// Merged terminals, the first one donating its label.
    pub pair: Option<(NodeId, NodeId)>,
    pub witness: Option<CandidateMerge>,
    pub path: Vec<NodeId>,
    /// Path edges kept after dropping cycle-closing ones.
    pub added: Vec<EdgeId>,
    /// State after the step: moats as sorted terminal lists, and per moat its
    /// label and activity.
    pub moats: Vec<Vec<NodeId>>,
    pub labels: Vec<Label>,
    pub active: Vec<bool>,
    /// Radius of every terminal after the step, in terminal order.
    #[serde(with = "serde_q_vec")]
    pub radii: Vec<Q>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoatTrace {
    pub terminals: Vec<NodeId>,
    pub steps: Vec<MergeStep>,
    /// Selected edges before pruning.
    pub forest: Vec<EdgeId>,
    pub merge_phases: usize,
    /// New path edges skipped because they would have closed a cycle.
    pub dropped_edges: usize,
}

impl MoatTrace {
    pub fn merges(&self) -> usize {
        self.steps.iter().filter(|s| !s.checkpoint).count()
    }

    /// Sum over steps of active moats times growth.
    pub fn dual_lower_bound(&self) -> Q {
        self.steps
            .iter()
            .fold(Q::zero(), |acc, s| acc + q_u(s.active_moats as u64) * &s.mu)
    }
}

pub fn dual_lower_bound(trace: &MoatTrace) -> Q {
    trace.dual_lower_bound()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthSchedule {
    #[serde(with = "serde_q")]
    pub eps: Q,
    /// Threshold at each checkpoint, in order.
    #[serde(with = "serde_q_vec")]
    pub thresholds: Vec<Q>,
    /// Merges between consecutive checkpoints.
    pub merges_per_phase: Vec<usize>,
}

impl GrowthSchedule {
    pub fn growth_phases(&self) -> usize {
        self.thresholds.len()
    }
}

/// `1 + c` where `c >= 0` is the least integer with `(1+eps/2)^c >= wd/2`.
pub fn growth_phase_bound(eps: &Q, wd: u64) -> usize {
    let base = Q::one() + eps / q(2);
    let target = q_u(wd) / q(2);
    let mut c = 0;
    let mut pow = Q::one();
    while pow < target {
        pow *= &base;
        c += 1;
    }
    1 + c
}

#[derive(Clone, Debug)]
enum Mode {
    Exact,
    Rounded(Q),
}

pub fn moat_grow_exact(inst: &IcInstance, tb: TieBreak) -> Result<(ForestSolution, MoatTrace), MoatError> {
    let (sol, trace, _) = run(inst, Mode::Exact, tb)?;
    Ok((sol, trace))
}

pub fn moat_grow_rounded(
    inst: &IcInstance,
    eps: &Q,
    tb: TieBreak,
) -> Result<(ForestSolution, MoatTrace, GrowthSchedule), MoatError> {
    if *eps <= Q::zero() {
        return Err(MoatError::InvalidEpsilon);
    }
    let (sol, trace, sched) = run(inst, Mode::Rounded(eps.clone()), tb)?;
    Ok((sol, trace, sched.expect("rounded mode records a schedule")))
}

/// Moat bookkeeping keyed by terminal node id.
struct Moats {
    terms: Vec<NodeId>,
    /// Moat id of every node (meaningful at terminals): the smallest member.
    moat_of: Vec<usize>,
    label: Vec<Label>,
    active: Vec<bool>,
}

impl Moats {
    fn ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.terms.iter().map(|&v| self.moat_of[v]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn members(&self, m: usize) -> Vec<NodeId> {
        self.terms.iter().copied().filter(|&v| self.moat_of[v] == m).collect()
    }

    fn active_count(&self) -> usize {
        self.ids().into_iter().filter(|&m| self.active[m]).count()
    }

    fn any_active(&self) -> bool {
        self.active_count() > 0
    }

    /// Per-node activity of the owning moat.
    fn node_activity(&self, n: usize) -> Vec<bool> {
        let mut a = vec![false; n];
        for &v in &self.terms {
            a[v] = self.active[self.moat_of[v]];
        }
        a
    }

    fn sole_carrier(&self, m: usize) -> bool {
        let l = self.label[m];
        self.ids().into_iter().all(|o| o == m || self.label[o] != l)
    }

    /// Merges the moats of `v` and `w` into one carrying the label of `v`'s
    /// moat; every moat labelled like `w`'s moat is relabelled too.
    fn merge(&mut self, v: NodeId, w: NodeId) -> usize {
        let (mv, mw) = (self.moat_of[v], self.moat_of[w]);
        let (lv, lw) = (self.label[mv], self.label[mw]);
        let new = mv.min(mw);
        for &u in &self.terms {
            if self.moat_of[u] == mv || self.moat_of[u] == mw {
                self.moat_of[u] = new;
            }
        }
        for m in self.ids() {
            if self.label[m] == lw {
                self.label[m] = lv;
            }
        }
        self.label[new] = lv;
        new
    }
}

struct PairScan {
    mu: Option<Q>,
}

/// Least growth until two moats touch, over terminal pairs in different moats.
fn pair_scan(m: &GraphMetrics, moats: &Moats, radius: &[Q]) -> PairScan {
    let mut best: Option<Q> = None;
    let terms = &moats.terms;
    for (i, &v) in terms.iter().enumerate() {
        for &w in &terms[i + 1..] {
            let (mv, mw) = (moats.moat_of[v], moats.moat_of[w]);
            if mv == mw {
                continue;
            }
            let gap = q_u(m.wd_between(v, w)) - &radius[v] - &radius[w];
            let mu = match (moats.active[mv], moats.active[mw]) {
                (true, true) => gap / q(2),
                (true, false) | (false, true) => gap,
                (false, false) => continue,
            };
            if best.as_ref().is_none_or(|b| mu < *b) {
                best = Some(mu);
            }
        }
    }
    PairScan { mu: best }
}

struct Phase {
    view: PhaseView,
    /// Terminal activity at phase start, per node.
    active: Vec<bool>,
    cands: Vec<CandidateMerge>,
    growth: Q,
}

fn run(
    inst: &IcInstance,
    mode: Mode,
    tb: TieBreak,
) -> Result<(ForestSolution, MoatTrace, Option<GrowthSchedule>), MoatError> {
    if !inst.is_minimal() {
        return Err(MoatError::NotMinimalInstance);
    }
    let g = &inst.graph;
    let n = g.n();
    let metrics = all_pairs_shortest_paths(g)?;
    let terms = inst.terminals();
    let mut moats = Moats {
        terms: terms.clone(),
        moat_of: (0..n).collect(),
        label: inst.labels.iter().map(|l| l.unwrap_or(usize::MAX)).collect(),
        active: inst.labels.iter().map(Option::is_some).collect(),
    };
    let mut radius = vec![Q::zero(); n];
    let mut region = RegionState::new(n, &terms);
    let mut forest: Vec<EdgeId> = Vec::new();
    let mut forest_uf = UnionFind::<usize>::new(n);
    let mut in_forest = vec![false; g.m()];
    let mut steps = Vec::new();
    let mut phase: Option<Phase> = None;
    let mut phase_no = 0;
    let mut dropped = 0;
    let mut total = Q::zero();
    let mut mu_hat = Q::one();
    let mut thresholds = Vec::new();
    let mut merges_per_phase = Vec::new();
    let mut merges_since_checkpoint = 0;

    while moats.any_active() {
        if phase.is_none() {
            phase_no += 1;
            let active = moats.node_activity(n);
            let view = start_phase(g, &mut region, &active, &radius);
            let mut cands = candidates(g, &region, &view, &active, &moats.moat_of, phase_no);
            sort_candidates(&mut cands, tb);
            phase = Some(Phase {
                view,
                active,
                cands,
                growth: Q::zero(),
            });
        }
        let ph = phase.as_mut().unwrap();
        let scan = pair_scan(&metrics, &moats, &radius);
        let active_moats = moats.active_count();
        let old_active = moats.node_activity(n);

        let checkpoint = match &mode {
            Mode::Exact => false,
            Mode::Rounded(_) => scan.mu.as_ref().is_none_or(|mu| &total + mu > mu_hat),
        };
        let mut step = MergeStep {
            phase: phase_no,
            mu: Q::zero(),
            active_moats,
            checkpoint,
            pair: None,
            witness: None,
            path: Vec::new(),
            added: Vec::new(),
            moats: Vec::new(),
            labels: Vec::new(),
            active: Vec::new(),
            radii: Vec::new(),
        };
        let phase_ends;
        if let (true, Mode::Rounded(eps)) = (checkpoint, &mode) {
            let mu = &mu_hat - &total;
            grow(&moats, &old_active, &mut radius, &mu);
            total += &mu;
            ph.growth += &mu;
            let sole: Vec<(usize, bool)> = moats.ids().into_iter().map(|m| (m, !moats.sole_carrier(m))).collect();
            for (m, a) in sole {
                moats.active[m] = a;
            }
            thresholds.push(mu_hat.clone());
            merges_per_phase.push(merges_since_checkpoint);
            merges_since_checkpoint = 0;
            mu_hat *= Q::one() + eps / q(2);
            step.mu = mu;
            phase_ends = true;
        } else {
            let mu = scan.mu.expect("an active moat has a partner moat");
            let witness = ph
                .cands
                .iter()
                .find(|c| moats.moat_of[c.pair.0] != moats.moat_of[c.pair.1])
                .expect("the decomposition proposes every touching pair")
                .clone();
            assert_eq!(
                &witness.w_hat - &ph.growth,
                mu,
                "least candidate must realize the least pair growth"
            );
            grow(&moats, &old_active, &mut radius, &mu);
            total += &mu;
            ph.growth += &mu;
            let (v, w) = oriented_pair(&region, &witness);
            let path = witness_path(&region, &witness, v);
            debug_assert_eq!(
                g.total_weight(crate::graph::path_edges(g, &path)),
                metrics.wd_between(v, w),
                "witness path is a least-weight path"
            );
            for e in crate::graph::path_edges(g, &path) {
                let x = g.edge(e);
                if in_forest[e] {
                    continue;
                }
                if forest_uf.union(x.u, x.v) {
                    in_forest[e] = true;
                    forest.push(e);
                    step.added.push(e);
                } else {
                    dropped += 1;
                }
            }
            let (av, aw) = (moats.active[moats.moat_of[v]], moats.active[moats.moat_of[w]]);
            let merged = moats.merge(v, w);
            match mode {
                Mode::Exact => {
                    moats.active[merged] = !moats.sole_carrier(merged);
                    phase_ends = !(av && aw && moats.active[merged]);
                }
                Mode::Rounded(_) => {
                    moats.active[merged] = true;
                    phase_ends = !(av && aw);
                }
            }
            merges_since_checkpoint += 1;
            step.mu = mu;
            step.pair = Some((v, w));
            step.witness = Some(witness);
            step.path = path;
        }
        if phase_ends {
            let ph = phase.take().unwrap();
            end_phase(&mut region, &ph.view, &ph.active, &ph.growth);
        }
        let ids = moats.ids();
        step.moats = ids.iter().map(|&m| moats.members(m)).collect();
        step.labels = ids.iter().map(|&m| moats.label[m]).collect();
        step.active = ids.iter().map(|&m| moats.active[m]).collect();
        step.radii = terms.iter().map(|&v| radius[v].clone()).collect();
        steps.push(step);
    }

    let sinst = SteinerInstance::Ic(inst.clone());
    let pruned = minimal_subforest(&sinst, &forest).expect("moat growing yields a feasible forest");
    forest.sort_unstable();
    let trace = MoatTrace {
        terminals: terms,
        steps,
        forest,
        merge_phases: phase_no,
        dropped_edges: dropped,
    };
    let sched = match mode {
        Mode::Exact => None,
        Mode::Rounded(eps) => Some(GrowthSchedule {
            eps,
            thresholds,
            merges_per_phase,
        }),
    };
    Ok((pruned, trace, sched))
}

fn grow(moats: &Moats, active: &[bool], radius: &mut [Q], mu: &Q) {
    for &v in &moats.terms {
        if active[v] {
            radius[v] += mu;
        }
    }
}

/// The merged pair with the terminal owning the smaller edge endpoint first.
fn oriented_pair(region: &RegionState, c: &CandidateMerge) -> (NodeId, NodeId) {
    let ox = region.owner[c.edge.0].expect("candidate endpoints are owned");
    let oy = region.owner[c.edge.1].expect("candidate endpoints are owned");
    (ox, oy)
}

/// Tree path from `v` to its edge endpoint, the edge, then the other tree
/// path up to the other terminal.
pub(crate) fn witness_path(region: &RegionState, c: &CandidateMerge, v: NodeId) -> Vec<NodeId> {
    let (x, y) = if region.owner[c.edge.0] == Some(v) {
        (c.edge.0, c.edge.1)
    } else {
        (c.edge.1, c.edge.0)
    };
    let mut p = region.tree_path(x);
    let mut back = region.tree_path(y);
    back.reverse();
    p.extend(back);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q_frac;
    use crate::graph::{mst_weight, WeightedGraph};
    use crate::harness::gen::{random_connected, random_ic_labels};
    use crate::oracle::{check_feasible, exact_optimum};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ic(g: WeightedGraph, labels: Vec<Option<usize>>) -> IcInstance {
        IcInstance::new(g, labels)
    }

    fn random_instance(rng: &mut ChaCha8Rng, nmax: usize, mmax: usize) -> IcInstance {
        let n = rng.gen_range(3..=nmax);
        let m = rng.gen_range(n - 1..=(n * (n - 1) / 2).min(mmax));
        let g = random_connected(n, m, 6, rng);
        let labels = random_ic_labels(n, rng.gen_range(2..=n), rng.gen_range(1..=3), rng);
        ic(g, labels).minimalized()
    }

    #[test]
    fn single_edge() {
        let g = WeightedGraph::new(2, [(0, 1, 4)]).unwrap();
        let inst = ic(g, vec![Some(0), Some(0)]);
        let (sol, trace) = moat_grow_exact(&inst, TieBreak::IdAscending).unwrap();
        assert_eq!(trace.merges(), 1);
        assert_eq!(trace.steps[0].mu, q(2));
        assert_eq!(sol.edges, vec![0]);
        assert_eq!(sol.weight, 4);
        assert_eq!(trace.dual_lower_bound(), q(4));
    }

    #[test]
    fn star_two_leaves() {
        // c=0, x=1, y=2, z=3.
        let g = WeightedGraph::new(4, [(0, 1, 1), (0, 2, 1), (0, 3, 1)]).unwrap();
        let inst = ic(g, vec![None, Some(7), Some(7), None]);
        let (sol, trace) = moat_grow_exact(&inst, TieBreak::IdAscending).unwrap();
        assert_eq!(trace.steps[0].mu, q(1));
        assert_eq!(trace.steps[0].path, vec![1, 0, 2]);
        assert_eq!(sol.weight, 2);
    }

    #[test]
    fn empty_terminal_set() {
        let g = WeightedGraph::new(2, [(0, 1, 4)]).unwrap();
        let (sol, trace) = moat_grow_exact(&ic(g, vec![None, None]), TieBreak::IdAscending).unwrap();
        assert!(sol.edges.is_empty());
        assert_eq!(trace.dual_lower_bound(), q(0));
    }

    #[test]
    fn rejects_non_minimal_and_bad_eps() {
        let g = WeightedGraph::new(2, [(0, 1, 4)]).unwrap();
        let inst = ic(g, vec![Some(0), None]);
        assert_eq!(moat_grow_exact(&inst, TieBreak::IdAscending).unwrap_err(), MoatError::NotMinimalInstance);
        let ok = ic(inst.graph.clone(), vec![Some(0), Some(0)]);
        assert_eq!(
            moat_grow_rounded(&ok, &q(0), TieBreak::IdAscending).unwrap_err(),
            MoatError::InvalidEpsilon
        );
    }

    #[test]
    fn growth_bound_arithmetic() {
        assert_eq!(growth_phase_bound(&q(1), 32), 8);
        assert_eq!(growth_phase_bound(&q(1), 1), 1);
        assert_eq!(growth_phase_bound(&q(1), 2), 1);
    }

    #[test]
    fn exact_quantities_are_half_integers() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..400 {
            let n = rng.gen_range(5..=14);
            let g = random_connected(n, n + 5, 10, &mut rng);
            let inst = ic(g, random_ic_labels(n, n - 2, 4, &mut rng)).minimalized();
            let (_, trace) = moat_grow_exact(&inst, TieBreak::IdAscending).unwrap();
            for s in &trace.steps {
                let two = q(2);
                assert!((&s.mu * &two).is_integer());
                assert!(s.radii.iter().all(|r| (r * &two).is_integer()));
                assert!((&s.witness.as_ref().unwrap().w_hat * &two).is_integer());
            }
        }
    }

    #[test]
    fn rounded_dual_can_exceed_scaled_optimum() {
        // Two terminals joined by a unit edge merge at 1/2; the merged moat
        // stays active until the first checkpoint at 1, so the dual is 3/2
        // while the optimum is 1.
        let g = WeightedGraph::new(2, [(0, 1, 1)]).unwrap();
        let inst = ic(g, vec![Some(0), Some(0)]);
        let (sol, trace, _) = moat_grow_rounded(&inst, &q_frac(1, 10), TieBreak::IdAscending).unwrap();
        assert_eq!(sol.weight, 1);
        assert_eq!(trace.dual_lower_bound(), q_frac(3, 2));
        assert!(trace.dual_lower_bound() > (q(1) + q_frac(1, 20)) * q(1));
    }

    #[test]
    fn all_terminals_gives_mst() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = rng.gen_range(3..=20);
            let g = random_connected(n, 2 * n, 9, &mut rng);
            let w = mst_weight(&g);
            let (sol, _) = moat_grow_exact(&ic(g, vec![Some(0); n]), TieBreak::IdAscending).unwrap();
            assert_eq!(sol.weight, w);
        }
    }

    #[test]
    fn rounded_matches_exact_when_schedule_never_binds() {
        // Single pair at distance 1: the merge happens at growth 1/2 < 1.
        let g = WeightedGraph::new(3, [(0, 1, 1), (1, 2, 5)]).unwrap();
        let inst = ic(g, vec![Some(0), Some(0), None]);
        let (a, _) = moat_grow_exact(&inst, TieBreak::IdAscending).unwrap();
        let (b, trace, sched) = moat_grow_rounded(&inst, &q(1), TieBreak::IdAscending).unwrap();
        assert_eq!(a, b);
        assert_eq!(sched.thresholds, vec![q(1)]);
        assert!(trace.steps.last().unwrap().checkpoint);
    }

    #[test]
    fn huge_eps_first_checkpoint_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 10, 20);
            if inst.t() == 0 {
                continue;
            }
            let (_, trace, sched) = moat_grow_rounded(&inst, &q(1_000_000), TieBreak::IdAscending).unwrap();
            assert_eq!(sched.thresholds[0], q(1));
            let mut total = Q::zero();
            for s in &trace.steps {
                total += &s.mu;
                if s.checkpoint {
                    assert_eq!(total, q(1));
                    break;
                }
                assert!(total <= q(1));
            }
        }
    }

    #[test]
    fn random_guarantees() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..60 {
            let inst = random_instance(&mut rng, 9, 16);
            let sinst = SteinerInstance::Ic(inst.clone());
            let opt = exact_optimum(&sinst).unwrap().weight;
            for tb in [TieBreak::IdAscending, TieBreak::IdDescending] {
                let (sol, trace) = moat_grow_exact(&inst, tb).unwrap();
                assert!(check_feasible(&sinst, &sol.edges));
                let dual = trace.dual_lower_bound();
                assert!(q_u(sol.weight) <= q(2) * &dual || inst.t() == 0);
                assert!(dual <= q_u(opt));
                assert!(trace.merge_phases <= 2 * inst.k().max(1));
                assert_eq!(trace.dropped_edges, 0);
                check_trace(&inst, &trace);
            }
            for eps in [q_frac(1, 10), q_frac(1, 2), q(1)] {
                let (sol, trace, sched) = moat_grow_rounded(&inst, &eps, TieBreak::IdAscending).unwrap();
                assert!(check_feasible(&sinst, &sol.edges));
                assert!(q_u(sol.weight) <= (q(2) + &eps) * q_u(opt));
                let wd = all_pairs_shortest_paths(&inst.graph).unwrap().wd;
                assert!(sched.growth_phases() <= growth_phase_bound(&eps, wd));
                check_trace(&inst, &trace);
            }
        }
    }

    /// Structural invariants of every step.
    fn check_trace(inst: &IcInstance, trace: &MoatTrace) {
        let g = &inst.graph;
        let mut prev_radii = vec![Q::zero(); trace.terminals.len()];
        let mut f: Vec<EdgeId> = Vec::new();
        let mut prev_moats: Vec<Vec<NodeId>> = trace.terminals.iter().map(|&v| vec![v]).collect();
        for s in &trace.steps {
            for (a, b) in prev_radii.iter().zip(&s.radii) {
                assert!(a <= b);
            }
            prev_radii = s.radii.clone();
            f.extend(&s.added);
            assert!(crate::instance::is_forest(g, &f));
            // Moats only coarsen.
            for m in &prev_moats {
                assert!(s.moats.iter().any(|big| m.iter().all(|v| big.contains(v))));
            }
            prev_moats = s.moats.clone();
            // Each moat is the terminal set of one component of (V, F).
            let sol = ForestSolution::new(g, f.clone());
            assert_eq!(sol.terminal_partition(g, &trace.terminals), s.moats);
            // Inactive moats hold complete input components.
            for (m, &act) in s.moats.iter().zip(&s.active) {
                if !act {
                    for &v in m {
                        let l = inst.labels[v];
                        assert!(trace.terminals.iter().filter(|&&u| inst.labels[u] == l).all(|u| m.contains(u)));
                    }
                }
            }
        }
    }

    #[test]
    fn trace_json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = random_instance(&mut rng, 8, 12);
        let (_, trace) = moat_grow_exact(&inst, TieBreak::IdAscending).unwrap();
        let json = serde_json::to_string(&trace).unwrap();
        assert_eq!(serde_json::from_str::<MoatTrace>(&json).unwrap(), trace);
    }
}
