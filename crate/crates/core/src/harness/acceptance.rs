//! Acceptance criteria: each check runs its corpus, compares against the
//! exact oracles and reports one pass/fail line.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::sublinear::ceil_sqrt;
use crate::dist::{fast_prune, full_deterministic, moat_grow_distributed, moat_grow_sublinear};
use crate::embed::{default_repetitions, full_randomized, virtual_tree_optimum, RandomizedOutcome};
use crate::exact::{fmt_q, q_frac, q_u, to_f64, Q};
use crate::graph::{all_pairs_shortest_paths, mst_weight, EdgeId, Weight, WeightedGraph};
use crate::harness::gadget::{all_set_pairs, gen_sd_gadget_cr};
use crate::harness::gen::{generate, random_connected, random_ic_labels, Family, GenSpec};
use crate::harness::par_map;
use crate::harness::suite::{central_ic, enveloped_rounds, envelope_constant, envelope_scale, mini_config, rows_to_csv, run_rows, solve, Algo, SolveError};
use crate::instance::{IcInstance, SteinerInstance};
use crate::moat::candidate::TieBreak;
use crate::moat::central::{growth_phase_bound, moat_grow_exact, moat_grow_rounded};
use crate::oracle::{check_feasible, exact_optimum, minimal_subforest, optimum_weight};
use crate::sim::SimConfig;

/// Calibrated bound on the per-node relayed-route count, as a multiple of `log2 n`.
pub const MULTIPLICITY_CONSTANT: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub tolerance: String,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} [{}] {}: {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.tolerance,
            self.title,
            self.detail
        )
    }
}

/// Corpus sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub oracle_instances: usize,
    pub equivalence_instances: usize,
    pub prune_pairs: usize,
    pub mst_instances: usize,
    pub randomized_instances: usize,
    pub randomized_seeds: u64,
    pub gadget_max_n: usize,
    /// Sampled set pairs per gadget size above 3.
    pub gadget_samples: usize,
}

impl Scale {
    /// The sizes the criteria prescribe.
    pub fn full() -> Self {
        Scale {
            oracle_instances: 200,
            equivalence_instances: 40,
            prune_pairs: 50,
            mst_instances: 10,
            randomized_instances: 30,
            randomized_seeds: 100,
            gadget_max_n: 5,
            gadget_samples: 24,
        }
    }

    /// A quick pass over the same checks.
    pub fn smoke() -> Self {
        Scale {
            oracle_instances: 12,
            equivalence_instances: 4,
            prune_pairs: 6,
            mst_instances: 2,
            randomized_instances: 3,
            randomized_seeds: 4,
            gadget_max_n: 3,
            gadget_samples: 4,
        }
    }
}

/// Errors seen while the criteria ran.
#[derive(Debug, Default)]
pub struct Tally {
    pub runs: AtomicU64,
    pub budget_violations: AtomicU64,
    pub other_errors: AtomicU64,
}

impl Tally {
    fn note<T>(&self, r: Result<T, SolveError>) -> Option<T> {
        self.runs.fetch_add(1, Ordering::Relaxed);
        match r {
            Ok(x) => Some(x),
            Err(e) => {
                if e.is_budget_violation() {
                    self.budget_violations.fetch_add(1, Ordering::Relaxed);
                } else {
                    self.other_errors.fetch_add(1, Ordering::Relaxed);
                }
                None
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleCase {
    pub id: String,
    pub instance: SteinerInstance,
    pub opt: Weight,
}

/// Random instances small enough for the exact oracle: at most 24 edges or
/// at most 10 terminals. Every seventh is given as connection requests.
pub fn oracle_corpus(count: usize) -> Vec<OracleCase> {
    let cases: Vec<(String, SteinerInstance)> = (0..count as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + i);
            let inst = match i % 5 {
                4 => {
                    let spec = GenSpec {
                        family: Family::Grid {
                            rows: rng.gen_range(2..=3),
                            cols: rng.gen_range(2..=4),
                        },
                        wmin: 1,
                        wmax: rng.gen_range(1..=9),
                        terminals: 4,
                        components: rng.gen_range(1..=2),
                        requests: i % 7 == 0,
                    };
                    generate(&spec, i).expect("valid spec")
                }
                _ => {
                    let n = rng.gen_range(3..=12);
                    let max_m = (n * (n - 1) / 2).min(24);
                    let m = rng.gen_range(n - 1..=max_m);
                    let g = random_connected(n, m, rng.gen_range(1..=12), &mut rng);
                    let t = rng.gen_range(2..=n.min(10));
                    let k = rng.gen_range(1..=(t / 2).max(1));
                    let labels = random_ic_labels(n, t, k, &mut rng);
                    if i % 7 == 0 {
                        SteinerInstance::Cr(crate::instance::CrInstance::new(g, crate::harness::gen::requests_from_labels(&labels)))
                    } else {
                        SteinerInstance::Ic(IcInstance::new(g, labels))
                    }
                }
            };
            (format!("oracle-{i}"), inst)
        })
        .collect();
    par_map(&cases, |(id, inst)| OracleCase {
        id: id.clone(),
        instance: inst.clone(),
        opt: optimum_weight(inst).expect("oracle-sized"),
    })
}

/// Connected instances with up to 40 nodes for the equivalence checks.
pub fn equivalence_corpus(count: usize) -> Vec<IcInstance> {
    (0..count as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(20_000 + i);
            let n = rng.gen_range(4..=40);
            let m = (n - 1 + rng.gen_range(0..=n)).min(n * (n - 1) / 2);
            let g = random_connected(n, m, rng.gen_range(1..=20), &mut rng);
            let t = rng.gen_range(2..=n.min(14));
            let k = rng.gen_range(1..=(t / 2).max(1));
            IcInstance::new(g, random_ic_labels(n, t, k, &mut rng)).minimalized()
        })
        .collect()
}

fn report(id: u8, title: &str, tolerance: &str, pass: bool, detail: String) -> CriterionReport {
    CriterionReport {
        id,
        title: title.into(),
        tolerance: tolerance.into(),
        pass,
        detail,
    }
}

const EPSILONS: [(i64, i64); 3] = [(1, 10), (1, 2), (1, 1)];

pub fn criterion_1(corpus: &[OracleCase]) -> CriterionReport {
    let bad: Vec<String> = par_map(corpus, |c| {
        let (sol, _) = moat_grow_exact(&central_ic(&c.instance), TieBreak::IdAscending).expect("central run");
        let ok = check_feasible(&c.instance, &sol.edges) && sol.weight <= 2 * c.opt;
        (!ok).then(|| format!("{} W={} OPT={}", c.id, sol.weight, c.opt))
    })
    .into_iter()
    .flatten()
    .collect();
    report(
        1,
        "exact moat growing: feasible and W <= 2 OPT",
        "exact",
        bad.is_empty() && corpus.len() >= 200,
        format!("{} instances, {} violations {:?}", corpus.len(), bad.len(), bad.iter().take(3).collect::<Vec<_>>()),
    )
}

pub fn criterion_2(corpus: &[OracleCase], cfg: &SimConfig, tally: &Tally) -> CriterionReport {
    let mut detail = Vec::new();
    let mut pass = corpus.len() >= 200;
    for (a, b) in EPSILONS {
        let eps = q_frac(a, b);
        let bound = q_u(2) + &eps;
        let res = par_map(corpus, |c| {
            let opt = q_u(c.opt);
            let (sol, _, _) = moat_grow_rounded(&central_ic(&c.instance), &eps, TieBreak::IdAscending).expect("central run");
            let central_ok = check_feasible(&c.instance, &sol.edges) && q_u(sol.weight) <= &bound * &opt;
            let dist_ok = match tally.note(full_deterministic(&c.instance, &eps, TieBreak::IdAscending, cfg).map_err(SolveError::from)) {
                Some((f, _)) => check_feasible(&c.instance, &f.edges) && q_u(f.weight) <= &bound * &opt,
                None => false,
            };
            (central_ok, dist_ok)
        });
        let cb = res.iter().filter(|r| !r.0).count();
        let db = res.iter().filter(|r| !r.1).count();
        pass &= cb == 0 && db == 0;
        detail.push(format!("eps={a}/{b}: rounded {cb} violations, pipeline {db} violations"));
    }
    report(
        2,
        "rounded moat growing and the deterministic pipeline: W <= (2+eps) OPT",
        "exact",
        pass,
        format!("{} instances; {}", corpus.len(), detail.join("; ")),
    )
}

pub fn criterion_3(corpus: &[OracleCase]) -> CriterionReport {
    let exact_bad = par_map(corpus, |c| {
        let (_, trace) = moat_grow_exact(&central_ic(&c.instance), TieBreak::IdAscending).expect("central run");
        trace.dual_lower_bound() > q_u(c.opt)
    })
    .into_iter()
    .filter(|b| *b)
    .count();
    let mut detail = vec![format!("exact: {exact_bad} of {} duals exceed OPT", corpus.len())];
    let mut pass = exact_bad == 0;
    for (a, b) in EPSILONS {
        let eps = q_frac(a, b);
        let factor = Q::one() + &eps / q_u(2);
        let res = par_map(corpus, |c| {
            let (_, trace, _) = moat_grow_rounded(&central_ic(&c.instance), &eps, TieBreak::IdAscending).expect("central run");
            let dual = trace.dual_lower_bound();
            (dual > &factor * q_u(c.opt)).then(|| (c.id.clone(), fmt_q(&dual), c.opt))
        });
        let bad: Vec<_> = res.into_iter().flatten().collect();
        pass &= bad.is_empty();
        detail.push(format!("eps={a}/{b}: {} duals exceed (1+eps/2) OPT {:?}", bad.len(), bad.first()));
    }
    report(3, "dual sums bounded by OPT (exact) and (1+eps/2) OPT (rounded)", "exact", pass, detail.join("; "))
}

pub fn criterion_4(corpus: &[IcInstance], cfg: &SimConfig, tally: &Tally) -> CriterionReport {
    let eps = q_frac(1, 2);
    let items: Vec<(usize, &IcInstance)> = corpus.iter().enumerate().collect();
    let res = par_map(&items, |&(i, inst)| {
        let tb = if i % 2 == 0 { TieBreak::IdAscending } else { TieBreak::IdDescending };
        let (want, _) = moat_grow_exact(inst, tb).expect("central run");
        let d_ok = tally
            .note(moat_grow_distributed(inst, tb, cfg).map_err(SolveError::from))
            .is_some_and(|o| o.forest.edges == want.edges);
        let (_, trace, _) = moat_grow_rounded(inst, &eps, tb).expect("central run");
        let s_ok = tally
            .note(moat_grow_sublinear(inst, &eps, tb, cfg).map_err(SolveError::from))
            .is_some_and(|o| o.forest == trace.forest);
        (d_ok, s_ok)
    });
    let db = res.iter().filter(|r| !r.0).count();
    let sb = res.iter().filter(|r| !r.1).count();
    report(
        4,
        "distributed output equals centralized output; bounded-moat forest equals rounded forest",
        "exact set equality",
        db == 0 && sb == 0 && corpus.len() >= 40,
        format!("{} instances (n <= 40); {db} exact mismatches, {sb} rounded mismatches", corpus.len()),
    )
}

pub fn criterion_5(oracle: &[OracleCase], corpus: &[IcInstance], cfg: &SimConfig, tally: &Tally) -> CriterionReport {
    let mut merge_bad = 0;
    let mut growth_bad = 0;
    let mut moat_bad = 0;
    let mut traces = 0;
    let mut insts: Vec<IcInstance> = oracle.iter().map(|c| central_ic(&c.instance)).collect();
    insts.extend(corpus.iter().cloned());
    // Merge phases are counted on exact traces; rounded runs count checkpoints instead.
    let res = par_map(&insts, |inst| {
        let k = inst.k();
        let (_, te) = moat_grow_exact(inst, TieBreak::IdAscending).expect("central run");
        let mut m = usize::from(te.merge_phases > 2 * k);
        match tally.note(moat_grow_distributed(inst, TieBreak::IdAscending, cfg).map_err(SolveError::from)) {
            Some(o) => m += usize::from(o.merge_phases > 2 * k),
            None => m += 1,
        }
        m
    });
    merge_bad += res.iter().sum::<usize>();
    traces += 2 * insts.len();
    for (a, b) in EPSILONS {
        let eps = q_frac(a, b);
        let res = par_map(&insts, |inst| {
            let wd = all_pairs_shortest_paths(&inst.graph).expect("connected").wd;
            let gb = growth_phase_bound(&eps, wd);
            let (_, _, sched) = moat_grow_rounded(inst, &eps, TieBreak::IdAscending).expect("central run");
            let mut g = usize::from(sched.growth_phases() > gb);
            let mut s = 0;
            if let Some(o) = tally.note(moat_grow_sublinear(inst, &eps, TieBreak::IdAscending, cfg).map_err(SolveError::from)) {
                g += usize::from(o.growth_phases > gb);
                let sigma = ceil_sqrt(o.sigma_sq);
                s += o.checks.iter().filter(|c| c.large > sigma || c.small_diameter > sigma).count();
            } else {
                s += 1;
            }
            (g, s)
        });
        for (g, s) in res {
            growth_bad += g;
            moat_bad += s;
            traces += 2;
        }
    }
    report(
        5,
        "merge phases <= 2k, growth phases within the log bound, <= sigma large moats of diameter <= sigma",
        "exact",
        merge_bad + growth_bad + moat_bad == 0,
        format!("{traces} traces; merge {merge_bad}, growth {growth_bad}, moat-size {moat_bad} violations"),
    )
}

/// A random spanning tree of `g`: Kruskal over a shuffled edge order.
fn random_spanning_tree(g: &WeightedGraph, rng: &mut ChaCha8Rng) -> Vec<EdgeId> {
    let mut order: Vec<EdgeId> = (0..g.m()).collect();
    order.shuffle(rng);
    let mut uf = petgraph::unionfind::UnionFind::<usize>::new(g.n());
    let mut out: Vec<EdgeId> = order.into_iter().filter(|&e| uf.union(g.edge(e).u, g.edge(e).v)).collect();
    out.sort_unstable();
    out
}

pub fn criterion_6(oracle: &[OracleCase], pairs: usize, cfg: &SimConfig, tally: &Tally) -> CriterionReport {
    let items: Vec<(usize, IcInstance, Vec<EdgeId>)> = (0..pairs)
        .map(|i| {
            let inst = central_ic(&oracle[i % oracle.len()].instance);
            let forest = if i % 2 == 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(30_000 + i as u64);
                random_spanning_tree(&inst.graph, &mut rng)
            } else {
                moat_grow_exact(&inst, TieBreak::IdAscending).expect("central run").1.forest
            };
            (i, inst, forest)
        })
        .collect();
    let bad = par_map(&items, |(_, inst, forest)| {
        let want = minimal_subforest(&SteinerInstance::Ic(inst.clone()), forest).expect("feasible forest");
        tally.note(fast_prune(inst, forest, cfg).map_err(SolveError::from)).is_none_or(|(got, _)| got != want)
    })
    .into_iter()
    .filter(|b| *b)
    .count();
    report(
        6,
        "fast pruning equals the minimal subforest",
        "exact",
        bad == 0 && pairs >= 50,
        format!("{pairs} (instance, forest) pairs, {bad} mismatches"),
    )
}

pub fn criterion_7(count: usize, cfg: &SimConfig, tally: &Tally) -> CriterionReport {
    let items: Vec<u64> = (0..count as u64).collect();
    let res = par_map(&items, |&i| {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + i);
        let n = 6 + (i as usize * 54) / count.max(2).saturating_sub(1).max(1);
        let n = n.min(60);
        let g = random_connected(n, n - 1 + rng.gen_range(0..=2 * n), 30, &mut rng);
        let want = mst_weight(&g);
        let inst = SteinerInstance::Ic(IcInstance::new(g, vec![Some(0); n]));
        let got = tally.note(full_deterministic(&inst, &q_frac(1, 2), TieBreak::IdAscending, cfg).map_err(SolveError::from));
        (n, want, got.map(|(f, _)| f.weight))
    });
    let bad: Vec<_> = res.iter().filter(|(_, w, g)| Some(*w) != *g).collect();
    report(
        7,
        "all terminals, one label: deterministic pipeline weight equals the MST weight",
        "exact",
        bad.is_empty() && count >= 10,
        format!(
            "{} instances, n in {}..={}, {} mismatches",
            res.len(),
            res.iter().map(|r| r.0).min().unwrap_or(0),
            res.iter().map(|r| r.0).max().unwrap_or(0),
            bad.len()
        ),
    )
}

#[derive(Clone, Debug)]
pub struct RandomizedCase {
    pub case: OracleCase,
    pub runs: Vec<Option<RandomizedOutcome>>,
}

/// Oracle-sized instances for the randomized pipeline; every third has a
/// long shortest-path diameter so the tree is truncated.
pub fn randomized_corpus(count: usize) -> Vec<OracleCase> {
    let cases: Vec<(String, SteinerInstance)> = (0..count as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(50_000 + i);
            let inst = if i % 3 == 2 {
                let spec = GenSpec {
                    family: Family::WeightedPath { n: rng.gen_range(5..=16) },
                    wmin: 1,
                    wmax: 1,
                    terminals: rng.gen_range(2..=6),
                    components: rng.gen_range(1..=3),
                    requests: false,
                };
                generate(&spec, i).expect("valid spec")
            } else {
                let n = rng.gen_range(4..=20);
                let m = (n - 1 + rng.gen_range(0..=n)).min(n * (n - 1) / 2);
                let g = random_connected(n, m, rng.gen_range(1..=16), &mut rng);
                let t = rng.gen_range(2..=n.min(10));
                let k = rng.gen_range(1..=(t / 2).max(1));
                SteinerInstance::Ic(IcInstance::new(g, random_ic_labels(n, t, k, &mut rng)))
            };
            (format!("randomized-{i}"), inst)
        })
        .collect();
    par_map(&cases, |(id, inst)| OracleCase {
        id: id.clone(),
        instance: inst.clone(),
        opt: optimum_weight(inst).expect("oracle-sized"),
    })
}

pub fn randomized_runs(corpus: &[OracleCase], seeds: u64, cfg: &SimConfig, tally: &Tally) -> Vec<RandomizedCase> {
    let jobs: Vec<(usize, u64)> = (0..corpus.len()).flat_map(|i| (0..seeds).map(move |s| (i, s))).collect();
    let outs = par_map(&jobs, |&(i, s)| {
        let inst = &corpus[i].instance;
        tally.note(full_randomized(inst, s, default_repetitions(inst.graph().n()), cfg).map_err(SolveError::from))
    });
    let mut it = outs.into_iter();
    corpus
        .iter()
        .map(|c| RandomizedCase {
            case: c.clone(),
            runs: it.by_ref().take(seeds as usize).collect(),
        })
        .collect()
}

pub fn criterion_8(runs: &[RandomizedCase]) -> CriterionReport {
    let mut checked = 0;
    let mut bad = Vec::new();
    for rc in runs {
        let g = rc.case.instance.graph();
        let m = all_pairs_shortest_paths(g).expect("connected");
        for out in rc.runs.iter().flatten() {
            for rep in &out.reps {
                let vt = &rep.tree;
                let bound = virtual_tree_optimum(&m, &vt.rank, &vt.beta, vt.levels, &out.instance.labels);
                checked += 1;
                if q_u(rep.weight) > bound {
                    bad.push(format!("{} seed {} W={} tree={}", rc.case.id, rep.seed, rep.weight, fmt_q(&bound)));
                }
            }
        }
    }
    report(
        8,
        "stage-one weight at most the optimal virtual-tree solution",
        "exact, per run",
        bad.is_empty() && checked > 0,
        format!("{checked} stage-one runs, {} violations {:?}", bad.len(), bad.first()),
    )
}

fn log2(n: usize) -> f64 {
    (n.max(2) as f64).log2()
}

pub fn criterion_9(runs: &[RandomizedCase], seeds: u64) -> CriterionReport {
    let mut total = 0usize;
    let mut feasible = 0usize;
    let mut small_s_infeasible = 0usize;
    let mut median_bad = Vec::new();
    let mut mult_bad = 0usize;
    let mut worst_mult: f64 = 0.0;
    let mut worst_median: f64 = 0.0;
    for rc in runs {
        let g = rc.case.instance.graph();
        let n = g.n();
        let m = all_pairs_shortest_paths(g).expect("connected");
        let small_s = m.s * m.s <= n;
        let mut ratios = Vec::new();
        for out in &rc.runs {
            total += 1;
            let Some(out) = out else {
                if small_s {
                    small_s_infeasible += 1;
                }
                ratios.push(f64::INFINITY);
                continue;
            };
            let ok = out.feasible && check_feasible(&rc.case.instance, &out.forest.edges);
            feasible += usize::from(ok);
            if small_s && !ok {
                small_s_infeasible += 1;
            }
            let r = if rc.case.opt == 0 {
                if out.forest.weight == 0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                to_f64(&(q_u(out.forest.weight) / q_u(rc.case.opt)))
            };
            ratios.push(if ok { r } else { f64::INFINITY });
            for rep in &out.reps {
                let c = rep.multiplicity as f64 / log2(n);
                worst_mult = worst_mult.max(c);
                if c > MULTIPLICITY_CONSTANT {
                    mult_bad += 1;
                }
            }
        }
        ratios.sort_by(f64::total_cmp);
        let med = ratios[ratios.len() / 2];
        worst_median = worst_median.max(med / log2(n));
        if med > 4.0 * log2(n) {
            median_bad.push(rc.case.id.clone());
        }
    }
    let frac = feasible as f64 / total.max(1) as f64;
    let pass = runs.len() >= 30 && seeds >= 100 && frac >= 0.99 && small_s_infeasible == 0 && median_bad.is_empty() && mult_bad == 0;
    report(
        9,
        "randomized pipeline: feasibility, median ratio <= 4 log2 n, relay multiplicity <= c log2 n",
        "frequency >= 99%, median, calibrated c",
        pass,
        format!(
            "{} instances x {seeds} seeds; feasible {:.2}% ({small_s_infeasible} infeasible with s <= sqrt n); median ratio / log2 n at most {:.3}, {} instances above 4; multiplicity / log2 n at most {:.3} (c = {MULTIPLICITY_CONSTANT}), {mult_bad} above",
            runs.len(),
            100.0 * frac,
            worst_median,
            median_bad.len(),
            worst_mult
        ),
    )
}

/// Algorithms with a constant ratio and the integer ratio their gadget uses.
fn gadget_algorithms() -> Vec<(Algo, Q, u64)> {
    vec![
        (Algo::CentralExact, q_frac(1, 2), 2),
        (Algo::CentralEps, q_frac(1, 2), 3),
        (Algo::Dist, q_frac(1, 2), 2),
        (Algo::Sublinear, q_frac(1, 2), 3),
    ]
}

pub fn criterion_10(max_n: usize, samples: usize, cfg: &SimConfig, tally: &Tally) -> CriterionReport {
    let mut cases = Vec::new();
    for n in 1..=max_n {
        let mut pairs = all_set_pairs(n);
        if n > 3 {
            let mut rng = ChaCha8Rng::seed_from_u64(60_000 + n as u64);
            pairs.shuffle(&mut rng);
            // Keep both disjoint and intersecting pairs in the sample.
            let (dis, int): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|(a, b)| a.is_disjoint(b));
            pairs = dis.into_iter().take(samples / 2).chain(int.into_iter().take(samples / 2)).collect();
        }
        cases.extend(pairs.into_iter().map(|p| (n, p)));
    }
    let res = par_map(&cases, |(n, (a, b))| {
        let n = *n;
        let disjoint = a.is_disjoint(b);
        let gd = gen_sd_gadget_cr(n, a, b, 1);
        let opt = exact_optimum(&gd.instance).expect("gadget is oracle-sized");
        let light: Vec<EdgeId> = (0..gd.instance.graph().m()).filter(|e| !gd.heavy.contains(e)).collect();
        let mut errs = Vec::new();
        if disjoint {
            if opt.weight > 2 * n as Weight + 2 || gd.heavy.iter().any(|h| opt.edges.contains(h)) {
                errs.push("oracle: disjoint optimum too heavy");
            }
            for (algo, eps, rho) in gadget_algorithms() {
                let gr = gen_sd_gadget_cr(n, a, b, rho);
                match tally.note(solve(&gr.instance, algo, &eps, 1, 0, cfg)) {
                    Some(out) if !gr.heavy.iter().any(|h| out.forest.edges.contains(h)) => {}
                    _ => errs.push(algo.name()),
                }
            }
        } else if check_feasible(&gd.instance, &light) {
            errs.push("oracle: light edges alone are feasible");
        }
        (n, disjoint, errs)
    });
    let dis = res.iter().filter(|r| r.1).count();
    let bad: Vec<_> = res.iter().filter(|r| !r.2.is_empty()).collect();
    report(
        10,
        "set-disjointness gadgets: cheap heavy-free optimum iff disjoint, no heavy edge chosen on disjoint inputs",
        "exact",
        bad.is_empty(),
        format!(
            "{} set pairs with n <= {max_n} ({dis} disjoint); {} failures {:?}",
            res.len(),
            bad.len(),
            bad.first().map(|r| &r.2)
        ),
    )
}

pub fn criterion_11(tally: &Tally, cfg: &SimConfig) -> CriterionReport {
    // Reruns of the pinned mini configuration, sequential and parallel.
    let mini = mini_config();
    let a = run_rows(&crate::harness::suite::ExperimentConfig { threads: 1, ..mini.clone() }).expect("mini config runs");
    let b = run_rows(&mini).expect("mini config runs");
    let identical = rows_to_csv(&a).ok() == rows_to_csv(&b).ok();
    for r in &a {
        tally.runs.fetch_add(1, Ordering::Relaxed);
        if let Some(e) = &r.error {
            if e.contains("budget is") {
                tally.budget_violations.fetch_add(1, Ordering::Relaxed);
            } else {
                tally.other_errors.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
    let rerun = {
        let c = &randomized_corpus(1)[0];
        let x = full_randomized(&c.instance, 7, 2, cfg).ok().map(|o| o.forest);
        let y = full_randomized(&c.instance, 7, 2, cfg).ok().map(|o| o.forest);
        x.is_some() && x == y
    };
    // Round envelopes on the mini rows.
    let mut over = Vec::new();
    let mut worst: f64 = 0.0;
    let insts: Vec<_> = mini
        .instances
        .iter()
        .flat_map(|s| crate::harness::gen::gen_family(&s.spec, s.seeds.clone()).expect("valid spec"))
        .collect();
    for g in &insts {
        let m = all_pairs_shortest_paths(g.instance.graph()).expect("connected");
        for algo in [Algo::Dist, Algo::Sublinear, Algo::Randomized] {
            let eps = q_frac(1, 2);
            let reps = default_repetitions(g.instance.graph().n());
            let Some(out) = tally.note(solve(&g.instance, algo, &eps, reps, 0, cfg)) else {
                continue;
            };
            let scale = envelope_scale(algo, &g.instance, &m, &eps, reps).expect("distributed");
            let c = enveloped_rounds(&out.stats) as f64 / scale;
            worst = worst.max(c / envelope_constant(algo).expect("distributed"));
            if c > 1.5 * envelope_constant(algo).expect("distributed") {
                over.push(format!("{} {}", g.id, algo.name()));
            }
        }
    }
    let violations = tally.budget_violations.load(Ordering::Relaxed);
    let others = tally.other_errors.load(Ordering::Relaxed);
    report(
        11,
        "simulator discipline: no budget violations, identical reruns, rounds within 1.5x the envelope",
        "zero, bit-identical, 1.5x",
        violations == 0 && others == 0 && identical && rerun && over.is_empty(),
        format!(
            "{} runs, {violations} budget violations, {others} other errors; reruns identical: {}; worst rounds/envelope {:.3}, {} over 1.5x {:?}",
            tally.runs.load(Ordering::Relaxed),
            identical && rerun,
            worst,
            over.len(),
            over.first()
        ),
    )
}

/// Evaluates every criterion, printing each line as it completes.
pub fn run_all_with(scale: &Scale, cfg: &SimConfig, mut emit: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    let tally = Tally::default();
    let oracle = oracle_corpus(scale.oracle_instances);
    let equiv = equivalence_corpus(scale.equivalence_instances);
    let mut out = Vec::new();
    let mut push = |r: CriterionReport| {
        emit(&r);
        out.push(r);
    };
    push(criterion_1(&oracle));
    push(criterion_2(&oracle, cfg, &tally));
    push(criterion_3(&oracle));
    push(criterion_4(&equiv, cfg, &tally));
    push(criterion_5(&oracle, &equiv, cfg, &tally));
    push(criterion_6(&oracle, scale.prune_pairs, cfg, &tally));
    push(criterion_7(scale.mst_instances, cfg, &tally));
    let rcorpus = randomized_corpus(scale.randomized_instances);
    let runs = randomized_runs(&rcorpus, scale.randomized_seeds, cfg, &tally);
    push(criterion_8(&runs));
    push(criterion_9(&runs, scale.randomized_seeds));
    push(criterion_10(scale.gadget_max_n, scale.gadget_samples, cfg, &tally));
    push(criterion_11(&tally, cfg));
    out
}

pub fn run_all(scale: &Scale) -> Vec<CriterionReport> {
    run_all_with(scale, &SimConfig::default(), |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpora_are_oracle_sized_and_stable() {
        let a = oracle_corpus(15);
        let b = oracle_corpus(15);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.instance, y.instance);
            assert_eq!(x.opt, y.opt);
            let g = x.instance.graph();
            assert!(g.m() <= 24 || x.instance.t() <= 10);
            assert!(g.is_connected());
        }
        assert!(a.iter().any(|c| matches!(c.instance, SteinerInstance::Cr(_))));
        assert!(equivalence_corpus(5).iter().all(|i| i.graph.n() <= 40 && i.is_minimal()));
    }

    #[test]
    fn report_line_format() {
        let r = report(4, "title", "exact", true, "ok".into());
        assert_eq!(r.to_string(), "criterion  4 PASS [exact] title: ok");
    }

    #[test]
    fn smoke_scale_runs_every_criterion() {
        let reports = run_all(&Scale::smoke());
        assert_eq!(reports.iter().map(|r| r.id).collect::<Vec<_>>(), (1..=11).collect::<Vec<u8>>());
        // Size floors fail at smoke scale; the checks themselves must hold.
        for r in &reports {
            if matches!(r.id, 5 | 8 | 10 | 11) {
                assert!(r.pass, "{r}");
            }
        }
    }
}
