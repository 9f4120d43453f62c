//! Moat growing: candidate merges, the region decomposition shared with the
//! distributed algorithms, and the centralized reference algorithms.

pub mod candidate;
pub mod central;
pub mod decomposition;

pub use candidate::{CandidateMerge, TieBreak};
pub use central::{dual_lower_bound, moat_grow_exact, moat_grow_rounded, GrowthSchedule, MergeStep, MoatError, MoatTrace};
