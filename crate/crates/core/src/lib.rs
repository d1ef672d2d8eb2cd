//! Best-node identification on graphs from noisy differential edge
//! observations.
//!
//! Node rewards are hidden; the only observation channel is pulling a graph
//! edge, which returns a bounded noisy value whose mean is the difference of
//! the endpoint rewards. Comparing two remote nodes therefore means sampling
//! every edge on a path between them. The crate provides:
//!
//! - [`graph`]: connected graphs, all-pairs shortest paths backed by prunable
//!   per-root breadth-first trees, sampled subgraphs, and min/max-diameter
//!   spanning-tree heuristics;
//! - [`env`](mod@env): the simulated environment — hidden rewards, bounded noise
//!   models, and an exact pull ledger;
//! - [`pac`]: the (ε, δ)-PAC identification algorithms for line graphs,
//!   trees, and general networks (phased node elimination), their sample-size
//!   calculators, and anytime error curves;
//! - [`contextual`]: the feature-vector extension — per-edge ridge estimators
//!   with confidence-width-driven sampling across stages;
//! - [`harness`]: graph generators (including the spider web), experiment
//!   configs, Monte-Carlo orchestration, and reproducible CSV output.

pub mod contextual;
pub mod env;
pub mod error;
pub mod graph;
pub mod harness;
pub mod pac;

pub use contextual::{
    run_contextual_sequence, run_contextual_stage, ContextVector, ContextualEnvironment,
    EdgeEstimator, EstimatorBank, Horizon, StageResult, StageSchedule,
};
pub use env::{derive_seed, BanditEnvironment, NodeRewards, NoiseModel, PullLedger};
pub use error::{Error, Result};
pub use graph::{
    all_pairs_shortest_paths, max_diameter_spanning_tree, min_diameter_spanning_tree, Graph,
    NodeId, Path, ShortestPathSet, Subgraph,
};
pub use harness::{
    generate_graph, generate_spider_web, run_experiment, ExperimentArtifacts, ExperimentConfig,
    GraphKind, SpiderWebSpec,
};
pub use pac::{
    budgeted_error_curve, line_sample_size, nne_phase_sample_size, nne_pull_bound, run_line,
    run_nne, run_tree, tree_sample_size, BudgetPoint, CurveAlgorithm, EdgeStats,
    IdentificationResult, PacParams, PhaseStats,
};
