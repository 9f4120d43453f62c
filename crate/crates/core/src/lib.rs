//! Steiner Forest approximation on a simulated CONGEST network: centralized
//! and distributed moat growing, randomized tree embeddings, exact oracles and
//! an experiment harness.

pub mod exact;
pub mod graph;
pub mod harness;
pub mod instance;
pub mod moat;
pub mod oracle;

pub use exact::Q;
pub use graph::{all_pairs_shortest_paths, ball, mst_weight, BallView, EdgeId, GraphMetrics, NodeId, Weight, WeightedGraph};
pub use instance::{CrInstance, ForestSolution, IcInstance, Label, SteinerInstance};
pub mod sim;
pub mod dist;
pub mod embed;

pub use dist::{fast_prune, full_deterministic, full_deterministic_run, moat_grow_distributed, moat_grow_sublinear, DistError, DistOutcome, PipelineOutcome, SublinearOutcome};
pub use embed::{build_virtual_tree, full_randomized, EmbedError, RandomizedOutcome, TreeMode, VirtualTree};
pub use harness::suite::{run_suite, solve, Algo, ExperimentConfig, ResultRow};
pub use moat::central::{moat_grow_exact, moat_grow_rounded, GrowthSchedule, MoatTrace};
pub use sim::{RunStats, SimConfig, SimError};
