//! `steinerlab` command-line driver: instance generation, single solves,
//! experiment suites and trace dumps.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use steinerlab::dist::{moat_grow_distributed, moat_grow_sublinear};
use steinerlab::embed::{default_repetitions, full_randomized, TreeMode};
use steinerlab::exact::{fmt_q, parse_q};
use steinerlab::harness::gadget::{gen_sd_gadget_cr, gen_sd_gadget_ic};
use steinerlab::harness::gen::{generate, GenSpec};
use steinerlab::harness::suite::{central_ic, row_ok, run_suite, solve, Algo, ExperimentConfig};
use steinerlab::moat::candidate::TieBreak;
use steinerlab::moat::central::{moat_grow_exact, moat_grow_rounded};
use steinerlab::oracle::check_feasible;
use steinerlab::sim::SimConfig;
use steinerlab::{build_virtual_tree, SteinerInstance};

#[derive(Parser, Debug)]
#[command(name = "steinerlab", version, about = "Steiner Forest experiments on a simulated CONGEST network")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate an instance from a family spec or a set-disjointness gadget.
    Gen(GenArgs),
    /// Solve one instance and print its forest and statistics as JSON.
    Solve(SolveArgs),
    /// Run an experiment configuration and write its rows.
    Suite(SuiteArgs),
    /// Dump a full algorithm trace as JSON.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    CentralExact,
    CentralEps,
    Dist,
    Sublinear,
    Randomized,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Algo {
        match a {
            AlgoArg::CentralExact => Algo::CentralExact,
            AlgoArg::CentralEps => Algo::CentralEps,
            AlgoArg::Dist => Algo::Dist,
            AlgoArg::Sublinear => Algo::Sublinear,
            AlgoArg::Randomized => Algo::Randomized,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GadgetArg {
    Cr,
    Ic,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// Words per message on every edge and round.
    #[arg(long = "budget-words")]
    budget_words: Option<usize>,
    /// Hard cap on the rounds of any stage.
    #[arg(long = "round-cap")]
    round_cap: Option<usize>,
}

impl SimArgs {
    fn apply(&self, mut cfg: SimConfig) -> SimConfig {
        if let Some(w) = self.budget_words {
            cfg.words_per_msg = w;
        }
        if let Some(c) = self.round_cap {
            cfg.round_cap = c;
        }
        cfg
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Family spec as a JSON file path or inline JSON.
    #[arg(long, conflicts_with = "gadget")]
    spec: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Set-disjointness gadget instead of a family.
    #[arg(long, value_enum, requires = "n")]
    gadget: Option<GadgetArg>,
    /// Gadget universe size.
    #[arg(long)]
    n: Option<usize>,
    /// Gadget set A as comma-separated indices.
    #[arg(long, default_value = "")]
    a: String,
    /// Gadget set B as comma-separated indices.
    #[arg(long, default_value = "")]
    b: String,
    /// Heavy-edge factor of the CR gadget.
    #[arg(long, default_value_t = 2)]
    rho: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance file.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "dist")]
    algo: AlgoArg,
    #[arg(long, default_value = "1/2")]
    eps: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repetitions of the randomized pipeline; defaults to ceil(log2 n).
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Experiment configuration JSON.
    config: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
    /// CSV output, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report output, overriding the configuration.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also evaluate the acceptance criteria.
    #[arg(long)]
    acceptance: bool,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Instance file.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "central-exact")]
    algo: AlgoArg,
    #[arg(long, default_value = "1/2")]
    eps: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    reps: Option<usize>,
    /// Dump only the virtual tree of `--seed` (randomized only).
    #[arg(long)]
    tree_only: bool,
    /// Keep only per-stage statistics whose name contains this string.
    #[arg(long)]
    stage: Option<String>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_instance(path: &Path) -> Result<SteinerInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SteinerInstance::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_set(text: &str, n: usize) -> Result<BTreeSet<usize>> {
    let mut s = BTreeSet::new();
    for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let i: usize = tok.parse().with_context(|| format!("bad set element {tok:?}"))?;
        if i >= n {
            bail!("set element {i} outside 0..{n}");
        }
        s.insert(i);
    }
    Ok(s)
}

fn parse_eps(text: &str) -> Result<steinerlab::Q> {
    match parse_q(text) {
        Some(e) if e > steinerlab::Q::default() => Ok(e),
        _ => bail!("epsilon must be a positive rational, got {text:?}"),
    }
}

fn cmd_gen(a: &GenArgs) -> Result<String> {
    let inst = match (a.gadget, &a.spec) {
        (Some(kind), _) => {
            let n = a.n.expect("clap requires n");
            let (sa, sb) = (parse_set(&a.a, n)?, parse_set(&a.b, n)?);
            match kind {
                GadgetArg::Cr => gen_sd_gadget_cr(n, &sa, &sb, a.rho).instance,
                GadgetArg::Ic => gen_sd_gadget_ic(n, &sa, &sb).0,
            }
        }
        (None, Some(spec)) => {
            let text = if Path::new(spec).is_file() { std::fs::read_to_string(spec)? } else { spec.clone() };
            let spec: GenSpec = serde_json::from_str(&text).context("parsing the family spec")?;
            generate(&spec, a.seed)?
        }
        (None, None) => bail!("pass --spec or --gadget"),
    };
    Ok(inst.format())
}

fn cmd_solve(a: &SolveArgs) -> Result<String> {
    let inst = read_instance(&a.input)?;
    let eps = parse_eps(&a.eps)?;
    let cfg = a.sim.apply(SimConfig { seed: a.seed, ..SimConfig::default() });
    let reps = a.reps.unwrap_or_else(|| default_repetitions(inst.graph().n()));
    let algo = Algo::from(a.algo);
    let out = solve(&inst, algo, &eps, reps, a.seed, &cfg)?;
    let v = json!({
        "algorithm": algo.name(),
        "eps": algo.uses_eps().then(|| fmt_q(&eps)),
        "seed": a.seed,
        "edges": out.forest.edges,
        "weight": out.forest.weight,
        "feasible": check_feasible(&inst, &out.forest.edges),
        "dual": out.dual.as_ref().map(fmt_q),
        "merge_phases": out.merge_phases,
        "growth_phases": out.growth_phases,
        "stats": out.stats,
    });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn cmd_suite(a: &SuiteArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text).context("parsing the experiment configuration")?;
    if let Some(w) = a.sim.budget_words {
        config.words_per_msg = w;
    }
    if let Some(c) = a.sim.round_cap {
        config.round_cap = c;
    }
    if let Some(p) = &a.out {
        config.out_csv = Some(p.clone());
    }
    if let Some(p) = &a.json {
        config.out_json = Some(p.clone());
    }
    config.acceptance |= a.acceptance;
    let report = run_suite(&config)?;
    let bad = report.rows.iter().filter(|r| !row_ok(r)).count();
    println!("{}: {} rows, {bad} failing", config.name, report.rows.len());
    for r in report.rows.iter().filter(|r| !row_ok(r)).take(10) {
        println!("  {} {} seed {}: {}", r.instance, r.algorithm, r.run_seed, r.error.as_deref().unwrap_or("guarantee or feasibility failed"));
    }
    for c in &report.criteria {
        println!("{c}");
    }
    Ok(report.passed)
}

fn cmd_trace(a: &TraceArgs) -> Result<String> {
    let inst = read_instance(&a.input)?;
    let eps = parse_eps(&a.eps)?;
    let cfg = a.sim.apply(SimConfig { seed: a.seed, ..SimConfig::default() });
    let g = inst.graph();
    if a.tree_only {
        if a.algo != AlgoArg::Randomized {
            bail!("--tree-only needs --algo randomized");
        }
        let (vt, _) = build_virtual_tree(g, a.seed, TreeMode::Full, &cfg)?;
        return Ok(vt.to_json() + "\n");
    }
    // Central and deterministic traces run on the minimal input-component form.
    let ic = central_ic(&inst);
    let tb = TieBreak::IdAscending;
    let mut v = match a.algo {
        AlgoArg::CentralExact => {
            let (forest, trace) = moat_grow_exact(&ic, tb)?;
            json!({ "instance": ic, "forest": forest, "trace": trace, "dual": fmt_q(&trace.dual_lower_bound()) })
        }
        AlgoArg::CentralEps => {
            let (forest, trace, sched) = moat_grow_rounded(&ic, &eps, tb)?;
            json!({ "instance": ic, "forest": forest, "trace": trace, "schedule": sched })
        }
        AlgoArg::Dist => serde_json::to_value(moat_grow_distributed(&ic, tb, &cfg)?)?,
        AlgoArg::Sublinear => serde_json::to_value(moat_grow_sublinear(&ic, &eps, tb, &cfg)?)?,
        AlgoArg::Randomized => {
            let reps = a.reps.unwrap_or_else(|| default_repetitions(g.n()));
            serde_json::to_value(full_randomized(&inst, a.seed, reps, &cfg)?)?
        }
    };
    if let Some(stage) = &a.stage {
        if let Some(stages) = v.pointer_mut("/stats/stages").and_then(|s| s.as_array_mut()) {
            stages.retain(|s| s["name"].as_str().is_some_and(|n| n.contains(stage.as_str())));
        }
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Gen(a) => emit(a.out.as_deref(), &cmd_gen(&a)?).map(|_| true),
        Cmd::Solve(a) => emit(a.out.as_deref(), &cmd_solve(&a)?).map(|_| true),
        Cmd::Suite(a) => cmd_suite(&a),
        Cmd::Trace(a) => emit(a.out.as_deref(), &cmd_trace(&a)?).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("steinerlab-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("steinerlab").chain(args.iter().copied())).unwrap()
    }

    const GRID: &str = r#"{"family":{"family":"grid","rows":3,"cols":3},"wmin":1,"wmax":4,"terminals":4,"components":2,"requests":false}"#;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_algorithm_solves_a_generated_instance() {
        let path = tmp("grid.txt");
        let Cmd::Gen(g) = parse(&["gen", "--spec", GRID, "--seed", "3"]).cmd else { unreachable!() };
        std::fs::write(&path, cmd_gen(&g).unwrap()).unwrap();
        for algo in ["central-exact", "central-eps", "dist", "sublinear", "randomized"] {
            let Cmd::Solve(s) = parse(&["solve", path.to_str().unwrap(), "--algo", algo, "--eps", "1/4"]).cmd else { unreachable!() };
            let v: serde_json::Value = serde_json::from_str(&cmd_solve(&s).unwrap()).unwrap();
            assert_eq!(v["feasible"], true, "{algo}");
            assert_eq!(v["algorithm"], algo);
        }
    }

    #[test]
    fn gadgets_round_trip_through_the_text_format() {
        let Cmd::Gen(g) = parse(&["gen", "--gadget", "cr", "--n", "3", "--a", "0,2", "--b", "1"]).cmd else { unreachable!() };
        let text = cmd_gen(&g).unwrap();
        let inst = SteinerInstance::parse(&text).unwrap();
        assert!(matches!(inst, SteinerInstance::Cr(_)));
        assert_eq!(inst.format(), text);
        let Cmd::Gen(g) = parse(&["gen", "--gadget", "ic", "--n", "3", "--a", "0", "--b", "4"]).cmd else { unreachable!() };
        assert!(cmd_gen(&g).is_err());
    }

    #[test]
    fn one_word_budget_fails_the_solve() {
        let path = tmp("budget.txt");
        let Cmd::Gen(g) = parse(&["gen", "--spec", GRID]).cmd else { unreachable!() };
        std::fs::write(&path, cmd_gen(&g).unwrap()).unwrap();
        let Cmd::Solve(s) = parse(&["solve", path.to_str().unwrap(), "--algo", "dist", "--budget-words", "1"]).cmd else { unreachable!() };
        let err = cmd_solve(&s).unwrap_err().to_string();
        assert!(err.contains("budget is 1"), "{err}");
    }

    #[test]
    fn traces_and_tree_dumps_are_json() {
        let path = tmp("trace.txt");
        let Cmd::Gen(g) = parse(&["gen", "--spec", GRID, "--seed", "1"]).cmd else { unreachable!() };
        std::fs::write(&path, cmd_gen(&g).unwrap()).unwrap();
        let p = path.to_str().unwrap();
        for args in [
            vec!["trace", p],
            vec!["trace", p, "--algo", "central-eps"],
            vec!["trace", p, "--algo", "dist", "--stage", "bfs"],
            vec!["trace", p, "--algo", "sublinear"],
            vec!["trace", p, "--algo", "randomized", "--reps", "2"],
            vec!["trace", p, "--algo", "randomized", "--tree-only"],
        ] {
            let Cmd::Trace(t) = parse(&args).cmd else { unreachable!() };
            let v: serde_json::Value = serde_json::from_str(&cmd_trace(&t).unwrap()).unwrap();
            assert!(v.is_object(), "{args:?}");
            if args.contains(&"--stage") {
                for s in v["stats"]["stages"].as_array().unwrap() {
                    assert!(s["name"].as_str().unwrap().contains("bfs"));
                }
            }
        }
        let Cmd::Trace(t) = parse(&["trace", p, "--tree-only"]).cmd else { unreachable!() };
        assert!(cmd_trace(&t).is_err());
    }

    #[test]
    fn suite_writes_rows_and_reports_success() {
        let mut cfg = steinerlab::harness::suite::mini_config();
        cfg.instances.truncate(2);
        let (conf, csv) = (tmp("mini.json"), tmp("mini.csv"));
        std::fs::write(&conf, serde_json::to_string(&cfg).unwrap()).unwrap();
        let Cmd::Suite(s) = parse(&["suite", conf.to_str().unwrap(), "--out", csv.to_str().unwrap()]).cmd else { unreachable!() };
        assert!(cmd_suite(&s).unwrap());
        let text = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 6);
        assert!(text.starts_with("instance,n,m,t,k,s,d,wd,algorithm"));
    }

    #[test]
    fn bad_epsilon_is_rejected() {
        assert!(parse_eps("0").is_err());
        assert!(parse_eps("-1/2").is_err());
        assert!(parse_eps("x").is_err());
        assert_eq!(fmt_q(&parse_eps("3/6").unwrap()), "1/2");
    }
}
