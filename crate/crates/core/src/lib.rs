//! Entropy-based cost measures for dependency-tree topologies, with synthetic
//! baselines and distribution comparisons.
//!
//! Trees are [`DirectedTree`]s over vertices `0..n`. [`CostPair::of`] gives the
//! production cost `h_deg` and comprehension cost `h_ks` in bits; an
//! [`EntropyExtremaTable`] maps them onto `[0, 1]` for a given size.

pub mod conllu;
pub mod error;
pub mod io;
pub mod measures;
pub mod optimizer;
pub mod pipeline;
pub mod samplers;
pub mod seed;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use measures::{build_extrema_table, normalize, CostPair, EntropyExtremaTable, Extrema, NormalizedCostPair};
pub use optimizer::{OptimizerConfig, Population, Trajectory};
pub use stats::{ComparisonReport, GaussianSummary};
pub use tree::{AdjacencyMatrix, DirectedTree, ExtendedPrueferCode};
