//! Online influence maximization under full-bandit feedback.
//!
//! * [`graph`]: probability-weighted directed graphs, edge-list I/O, generators
//! * [`cascade`]: independent-cascade simulation and the bandit environment
//! * [`algorithms`]: LOFA (lazy online forward selection), ETCG, exploitation
//! * [`oracle`]: exact spread, exhaustive search, offline (lazy) greedy
//! * [`harness`]: horizon sweeps, regret metrics and CSV output

pub mod algorithms;
pub mod cascade;
pub mod error;
pub mod graph;
pub mod harness;
mod numfmt;
pub mod oracle;

pub use algorithms::{
    compute_m, etcg_run, exploit, fixed_run, lofa_run, Algorithm, Commit, Lofa, LofaEntry, MgSemantics, PlayCounts,
    RunRecord,
};
pub use cascade::{seeded_rng, simulate_cascade, CascadeEnvironment, PlayRecord, PlayResult, Simulator};
pub use error::{Error, Result};
pub use graph::{load_edge_list, parse_edge_list, write_edge_list, Edge, Graph, NodeId, ProbabilityMode};
pub use harness::{
    aggregate, cumulative_regret, moving_average, run_experiment, AggregateRow, ExperimentConfig, RunSummary,
};
pub use numfmt::sig9;
pub use oracle::{
    brute_force_best, exact_spread, lazy_greedy, naive_greedy, offline_greedy, Benchmark, BenchmarkKind,
    OracleResult,
};
