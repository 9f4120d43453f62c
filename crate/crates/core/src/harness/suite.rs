//! Experiment configuration, per-instance result rows and the suite runner.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dist::sublinear::{ceil_sqrt, sigma_squared};
use crate::dist::{full_deterministic_run, moat_grow_distributed, transform_cr_to_ic, transform_to_minimal, DistError};
use crate::embed::{default_repetitions, full_randomized, levels_for, EmbedError};
use crate::exact::{fmt_q, parse_q, q_u, to_f64, Q};
use crate::graph::{all_pairs_shortest_paths, GraphMetrics, Weight};
use crate::harness::gen::{gen_family, GenError, GenSpec};
use crate::instance::{ForestSolution, IcInstance, SteinerInstance};
use crate::moat::candidate::TieBreak;
use crate::moat::central::{growth_phase_bound, moat_grow_exact, moat_grow_rounded};
use crate::moat::MoatError;
use crate::oracle::{check_feasible, optimum_weight};
use crate::sim::bfs::build_bfs_tree;
use crate::sim::{RunStats, SimConfig, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    /// Exact moat growing.
    CentralExact,
    /// Moat growing with rounded radii.
    CentralEps,
    /// Distributed exact moat growing with pruning.
    Dist,
    /// Distributed rounded moat growing with bounded moats and pruning.
    Sublinear,
    /// Virtual-tree pipeline.
    Randomized,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::CentralExact, Algo::CentralEps, Algo::Dist, Algo::Sublinear, Algo::Randomized];

    pub fn name(self) -> &'static str {
        match self {
            Algo::CentralExact => "central-exact",
            Algo::CentralEps => "central-eps",
            Algo::Dist => "dist",
            Algo::Sublinear => "sublinear",
            Algo::Randomized => "randomized",
        }
    }

    pub fn parse(s: &str) -> Option<Algo> {
        Algo::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Worst-case ratio the algorithm guarantees, if constant.
    pub fn ratio_bound(self, eps: &Q) -> Option<Q> {
        match self {
            Algo::CentralExact | Algo::Dist => Some(q_u(2)),
            Algo::CentralEps | Algo::Sublinear => Some(q_u(2) + eps),
            Algo::Randomized => None,
        }
    }

    pub fn uses_eps(self) -> bool {
        matches!(self, Algo::CentralEps | Algo::Sublinear)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgoSpec {
    pub algo: Algo,
    /// Rational `eps` such as `"1/2"`, for the rounded variants.
    #[serde(default)]
    pub eps: Option<String>,
    /// Stage-one repetitions of the randomized pipeline; default `ceil(log2 n)`.
    #[serde(default)]
    pub repetitions: Option<usize>,
    /// Runs per instance with seeds `0..seeds`, for the randomized pipeline.
    #[serde(default = "one")]
    pub seeds: u64,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub spec: GenSpec,
    pub seeds: std::ops::Range<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub instances: Vec<InstanceSet>,
    pub algorithms: Vec<AlgoSpec>,
    pub words_per_msg: usize,
    pub round_cap: usize,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
    #[serde(default)]
    pub out_json: Option<PathBuf>,
    /// Record wall time per row; rows are then no longer bit-reproducible.
    #[serde(default)]
    pub wall_time: bool,
    /// Also evaluate the acceptance criteria.
    #[serde(default)]
    pub acceptance: bool,
    /// 1 runs rows sequentially; anything else uses every core.
    #[serde(default)]
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            words_per_msg: self.words_per_msg,
            round_cap: self.round_cap,
            ..SimConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One algorithm run on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub k: usize,
    pub s: usize,
    pub d: usize,
    pub wd: Weight,
    pub algorithm: String,
    pub eps: String,
    pub seed: u64,
    pub run_seed: u64,
    pub weight: Option<Weight>,
    pub feasible: Option<bool>,
    pub opt: Option<Weight>,
    /// Exact `W / OPT`.
    pub ratio: Option<String>,
    pub ratio_f64: Option<f64>,
    /// Dual lower bound of the centralized trace.
    pub dual: Option<String>,
    /// Whether the row meets the algorithm's ratio guarantee (when known).
    pub guarantee_ok: Option<bool>,
    pub rounds: usize,
    pub charged_rounds: usize,
    pub messages: u64,
    pub max_words: usize,
    pub merge_phases: Option<usize>,
    pub growth_phases: Option<usize>,
    pub wall_ms: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SolveError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Moat(#[from] MoatError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("bad eps {0:?}")]
    Eps(String),
}

impl SolveError {
    pub fn is_budget_violation(&self) -> bool {
        matches!(
            self,
            SolveError::Sim(SimError::BudgetViolation { .. })
                | SolveError::Dist(DistError::Sim(SimError::BudgetViolation { .. }))
                | SolveError::Embed(EmbedError::Sim(SimError::BudgetViolation { .. }))
        )
    }
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub forest: ForestSolution,
    pub stats: RunStats,
    pub merge_phases: Option<usize>,
    pub growth_phases: Option<usize>,
    pub dual: Option<Q>,
}

/// Minimal input-component form computed centrally: every demand group is
/// labelled by its smallest member.
pub fn central_ic(inst: &SteinerInstance) -> IcInstance {
    match inst {
        SteinerInstance::Ic(i) => i.minimalized(),
        SteinerInstance::Cr(c) => {
            let mut labels = vec![None; c.graph.n()];
            for grp in inst.demand_groups() {
                for &v in &grp {
                    labels[v] = Some(grp[0]);
                }
            }
            IcInstance::new(c.graph.clone(), labels)
        }
    }
}

/// Distributed transforms followed by distributed exact moat growing.
fn dist_pipeline(inst: &SteinerInstance, tb: TieBreak, cfg: &SimConfig) -> Result<Solved, SolveError> {
    let g = inst.graph();
    let (tree, mut stats) = build_bfs_tree(g, cfg)?;
    let ic = match inst {
        SteinerInstance::Ic(i) => i.clone(),
        SteinerInstance::Cr(c) => {
            let (ic, s) = transform_cr_to_ic(c, &tree, cfg)?;
            stats.absorb(s);
            ic
        }
    };
    let (ic, s) = transform_to_minimal(&ic, &tree, cfg)?;
    stats.absorb(s);
    let out = moat_grow_distributed(&ic, tb, cfg)?;
    stats.absorb(out.stats);
    Ok(Solved {
        forest: out.forest,
        stats,
        merge_phases: Some(out.merge_phases),
        growth_phases: None,
        dual: None,
    })
}

/// Runs one algorithm.
pub fn solve(inst: &SteinerInstance, algo: Algo, eps: &Q, reps: usize, seed: u64, cfg: &SimConfig) -> Result<Solved, SolveError> {
    match algo {
        Algo::CentralExact => {
            let (forest, trace) = moat_grow_exact(&central_ic(inst), TieBreak::IdAscending)?;
            Ok(Solved {
                forest,
                stats: RunStats::default(),
                merge_phases: Some(trace.merge_phases),
                growth_phases: None,
                dual: Some(trace.dual_lower_bound()),
            })
        }
        Algo::CentralEps => {
            let (forest, trace, sched) = moat_grow_rounded(&central_ic(inst), eps, TieBreak::IdAscending)?;
            Ok(Solved {
                forest,
                stats: RunStats::default(),
                merge_phases: Some(trace.merge_phases),
                growth_phases: Some(sched.growth_phases()),
                dual: Some(trace.dual_lower_bound()),
            })
        }
        Algo::Dist => dist_pipeline(inst, TieBreak::IdAscending, cfg),
        Algo::Sublinear => {
            let out = full_deterministic_run(inst, eps, TieBreak::IdAscending, cfg)?;
            Ok(Solved {
                forest: out.forest,
                stats: out.stats,
                merge_phases: Some(out.merge_phases),
                growth_phases: Some(out.growth_phases),
                dual: None,
            })
        }
        Algo::Randomized => {
            let out = full_randomized(inst, seed, reps, cfg)?;
            Ok(Solved {
                forest: out.forest,
                stats: out.stats,
                merge_phases: None,
                growth_phases: None,
                dual: None,
            })
        }
    }
}

/// Round-count scale of an algorithm on an instance; the envelope is a
/// calibrated multiple of it.
pub fn envelope_scale(algo: Algo, inst: &SteinerInstance, m: &GraphMetrics, eps: &Q, reps: usize) -> Option<f64> {
    let n = inst.graph().n();
    let (t, k, s, d) = (inst.t(), inst.demand_groups().len(), m.s, m.d);
    let lg = (levels_for(n as Weight) + 1) as f64;
    match algo {
        Algo::CentralExact | Algo::CentralEps => None,
        Algo::Dist => Some(((s + d + 1) * (2 * k + 1) + t) as f64),
        Algo::Sublinear => {
            let sigma = ceil_sqrt(sigma_squared(s, t, n));
            let g = growth_phase_bound(eps, m.wd);
            Some(((s + sigma + d + 1) * (2 * k + g)) as f64)
        }
        Algo::Randomized => {
            let levels = levels_for(m.wd) + 1;
            Some((reps * levels) as f64 * ((s.min(ceil_sqrt(n)) + d + k + 1) as f64) * lg)
        }
    }
}

/// Rounds that count against the envelope: stage-two rounds are reported but excluded.
pub fn enveloped_rounds(stats: &RunStats) -> usize {
    stats.rounds - stats.stages.iter().filter(|s| s.name.starts_with("stage2-")).map(|s| s.rounds).sum::<usize>()
}

/// Calibrated envelope constant per algorithm: the largest observed ratio
/// of rounds to [`envelope_scale`] on the calibration corpus, rounded up.
pub fn envelope_constant(algo: Algo) -> Option<f64> {
    match algo {
        Algo::CentralExact | Algo::CentralEps => None,
        Algo::Dist => Some(ENVELOPE_DIST),
        Algo::Sublinear => Some(ENVELOPE_SUBLINEAR),
        Algo::Randomized => Some(ENVELOPE_RANDOMIZED),
    }
}

pub const ENVELOPE_DIST: f64 = 8.0;
pub const ENVELOPE_SUBLINEAR: f64 = 12.0;
pub const ENVELOPE_RANDOMIZED: f64 = 1.0;

/// Evaluates one algorithm run into a row.
#[allow(clippy::too_many_arguments)]
pub fn run_row(id: &str, seed: u64, inst: &SteinerInstance, spec: &AlgoSpec, run_seed: u64, cfg: &SimConfig, wall_time: bool, with_opt: bool) -> ResultRow {
    let g = inst.graph();
    let metrics = all_pairs_shortest_paths(g).expect("generated graphs are connected");
    let eps_text = spec.eps.clone().unwrap_or_else(|| "1/2".to_string());
    let mut row = ResultRow {
        instance: id.to_string(),
        n: g.n(),
        m: g.m(),
        t: inst.t(),
        k: inst.demand_groups().len(),
        s: metrics.s,
        d: metrics.d,
        wd: metrics.wd,
        algorithm: spec.algo.name().to_string(),
        eps: if spec.algo.uses_eps() { eps_text.clone() } else { String::new() },
        seed,
        run_seed,
        weight: None,
        feasible: None,
        opt: None,
        ratio: None,
        ratio_f64: None,
        dual: None,
        guarantee_ok: None,
        rounds: 0,
        charged_rounds: 0,
        messages: 0,
        max_words: 0,
        merge_phases: None,
        growth_phases: None,
        wall_ms: None,
        error: None,
    };
    let Some(eps) = parse_q(&eps_text).filter(|e| *e > Q::default()) else {
        row.error = Some(SolveError::Eps(eps_text).to_string());
        return row;
    };
    let reps = spec.repetitions.unwrap_or_else(|| default_repetitions(g.n()));
    let start = Instant::now();
    let res = solve(inst, spec.algo, &eps, reps, run_seed, cfg);
    if wall_time {
        row.wall_ms = Some(start.elapsed().as_millis() as u64);
    }
    let out = match res {
        Ok(o) => o,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let w = out.forest.weight;
    row.weight = Some(w);
    row.feasible = Some(check_feasible(inst, &out.forest.edges));
    row.dual = out.dual.as_ref().map(fmt_q);
    row.rounds = out.stats.rounds;
    row.charged_rounds = out.stats.charged_rounds;
    row.messages = out.stats.messages;
    row.max_words = out.stats.max_words;
    row.merge_phases = out.merge_phases;
    row.growth_phases = out.growth_phases;
    if with_opt {
        if let Ok(opt) = optimum_weight(inst) {
            row.opt = Some(opt);
            let ratio = if opt == 0 {
                if w == 0 {
                    Some(q_u(1))
                } else {
                    None
                }
            } else {
                Some(q_u(w) / q_u(opt))
            };
            row.ratio = Some(ratio.as_ref().map_or_else(|| "inf".to_string(), fmt_q));
            row.ratio_f64 = Some(ratio.as_ref().map_or(f64::INFINITY, to_f64));
            row.guarantee_ok = spec.algo.ratio_bound(&eps).map(|b| q_u(w) <= b * q_u(opt) && row.feasible == Some(true));
        }
    }
    row
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<ResultRow>,
    pub criteria: Vec<crate::harness::acceptance::CriterionReport>,
    pub passed: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Rows of every (instance, algorithm, run seed) triple, in that order.
pub fn run_rows(config: &ExperimentConfig) -> Result<Vec<ResultRow>, SuiteError> {
    let cfg = config.sim();
    let mut jobs = Vec::new();
    for set in &config.instances {
        for g in gen_family(&set.spec, set.seeds.clone())? {
            for spec in &config.algorithms {
                let runs = if spec.algo == Algo::Randomized { spec.seeds.max(1) } else { 1 };
                for r in 0..runs {
                    jobs.push((g.clone(), spec.clone(), r));
                }
            }
        }
    }
    let rows = if config.threads == 1 {
        jobs.iter().map(|(g, spec, r)| run_row(&g.id, g.seed, &g.instance, spec, *r, &cfg, config.wall_time, true)).collect()
    } else {
        crate::harness::par_map(&jobs, |(g, spec, r)| run_row(&g.id, g.seed, &g.instance, spec, *r, &cfg, config.wall_time, true))
    };
    Ok(rows)
}

pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<(), SuiteError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String, SuiteError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// A row passes when it ran, is feasible and meets its guarantee when one is known.
pub fn row_ok(r: &ResultRow) -> bool {
    r.error.is_none() && r.feasible == Some(true) && r.guarantee_ok != Some(false)
}

fn create_parent(p: &std::path::Path) -> std::io::Result<()> {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d),
        _ => Ok(()),
    }
}

/// Runs the configured rows, writes the requested files and, if asked,
/// evaluates the acceptance criteria.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteReport, SuiteError> {
    let rows = run_rows(config)?;
    if let Some(p) = &config.out_csv {
        create_parent(p)?;
        write_csv(&rows, std::fs::File::create(p)?)?;
    }
    let criteria = if config.acceptance {
        crate::harness::acceptance::run_all(&crate::harness::acceptance::Scale::full())
    } else {
        Vec::new()
    };
    let passed = rows.iter().all(row_ok) && criteria.iter().all(|c| c.pass);
    let report = SuiteReport { rows, criteria, passed };
    if let Some(p) = &config.out_json {
        create_parent(p)?;
        std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// The shipped mini configuration: one small instance set per family and
/// every algorithm.
pub fn mini_config() -> ExperimentConfig {
    use crate::harness::gen::Family;
    let set = |family, wmax, t, k| InstanceSet {
        spec: GenSpec {
            family,
            wmin: 1,
            wmax,
            terminals: t,
            components: k,
            requests: false,
        },
        seeds: 0..2,
    };
    ExperimentConfig {
        name: "mini".into(),
        instances: vec![
            set(Family::Gnm { n: 10, m: 16 }, 9, 6, 2),
            set(Family::Grid { rows: 3, cols: 4 }, 5, 6, 3),
            set(Family::Geometric { n: 12, radius: 300 }, 1, 5, 2),
            set(Family::WeightedPath { n: 10 }, 1, 4, 2),
            set(Family::StarOfCliques { cliques: 3, size: 3, arm: 2 }, 4, 6, 3),
        ],
        algorithms: Algo::ALL
            .into_iter()
            .map(|algo| AlgoSpec {
                algo,
                eps: algo.uses_eps().then(|| "1/2".to_string()),
                repetitions: None,
                seeds: 2,
            })
            .collect(),
        words_per_msg: crate::sim::DEFAULT_WORDS_PER_MSG,
        round_cap: 1_000_000,
        out_csv: None,
        out_json: None,
        wall_time: false,
        acceptance: false,
        threads: 0,
    }
}
