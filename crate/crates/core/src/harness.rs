//! Experiment driver: graph generators (including the spider web), config
//! parsing, Monte-Carlo orchestration, and CSV emission with a manifest
//! sufficient for bit-exact replay.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contextual::{
    clustered_directions, run_contextual_sequence, ContextVector, ContextualEnvironment,
};
use crate::env::{derive_seed, BanditEnvironment, NodeRewards, NoiseModel};
use crate::error::{Error, Result};
use crate::graph::{io_context, Graph, NodeId};
use crate::pac::{budgeted_error_curve, run_line, run_nne, run_tree, CurveAlgorithm, PacParams};

// Stream tags for seed derivation; fixed so replays are stable.
const STREAM_GRAPH: u64 = 0x67;
const STREAM_REWARDS: u64 = 0x72;
const STREAM_ENV: u64 = 0x65;
const STREAM_DIRECTIONS: u64 = 0x75;

/// Spider-web topology: `rings` concentric cycles of `nodes_per_ring` nodes
/// each, joined by aligned radial spokes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpiderWebSpec {
    pub rings: usize,
    pub nodes_per_ring: usize,
}

impl SpiderWebSpec {
    pub fn new(rings: usize, nodes_per_ring: usize) -> Result<Self> {
        if rings < 1 || nodes_per_ring < 3 {
            return Err(Error::Validation(
                "a spider web needs rings >= 1 and nodes_per_ring >= 3".into(),
            ));
        }
        Ok(SpiderWebSpec {
            rings,
            nodes_per_ring,
        })
    }

    pub fn node_count(&self) -> usize {
        self.rings * self.nodes_per_ring
    }
}

/// Generates the spider web. Node numbering is ring-major, position-minor,
/// 1-based; each node's neighbor order is fixed as ring-successor,
/// ring-predecessor, radial-out, radial-in, which pins down the depth-first
/// spanning-tree heuristic (the 3x5 web yields the diameter-14 spiral).
pub fn generate_spider_web(spec: &SpiderWebSpec) -> Graph {
    let (rings, m) = (spec.rings, spec.nodes_per_ring);
    let node = |ring: usize, pos: usize| -> NodeId { ring * m + pos + 1 };
    let mut lists = Vec::with_capacity(spec.node_count());
    for ring in 0..rings {
        for pos in 0..m {
            let mut neighbors = vec![node(ring, (pos + 1) % m), node(ring, (pos + m - 1) % m)];
            if ring + 1 < rings {
                neighbors.push(node(ring + 1, pos));
            }
            if ring > 0 {
                neighbors.push(node(ring - 1, pos));
            }
            lists.push(neighbors);
        }
    }
    Graph::from_adjacency(lists).expect("spider web construction is consistent")
}

/// Graph generator selection.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    Line {
        nodes: usize,
    },
    /// Uniform random attachment tree; deterministic under `seed`.
    RandomTree {
        nodes: usize,
        seed: u64,
    },
    SpiderWeb(SpiderWebSpec),
    /// G(n, p) resampled until connected (up to a retry cap).
    ErdosRenyiConnected {
        nodes: usize,
        edge_prob: f64,
        seed: u64,
    },
}

pub fn generate_graph(kind: &GraphKind) -> Result<Graph> {
    match *kind {
        GraphKind::Line { nodes } => {
            if nodes == 0 {
                return Err(Error::Validation("line graph needs nodes >= 1".into()));
            }
            let edges: Vec<_> = (1..nodes).map(|i| (i, i + 1)).collect();
            Graph::from_edges(nodes, &edges)
        }
        GraphKind::RandomTree { nodes, seed } => {
            if nodes == 0 {
                return Err(Error::Validation("random tree needs nodes >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges: Vec<_> = (2..=nodes).map(|v| (rng.random_range(1..v), v)).collect();
            Graph::from_edges(nodes, &edges)
        }
        GraphKind::SpiderWeb(spec) => Ok(generate_spider_web(&spec)),
        GraphKind::ErdosRenyiConnected {
            nodes,
            edge_prob,
            seed,
        } => {
            if nodes == 0 {
                return Err(Error::Validation("random graph needs nodes >= 1".into()));
            }
            if !(0.0..=1.0).contains(&edge_prob) {
                return Err(Error::Validation("edge_prob outside [0, 1]".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let mut edges = Vec::new();
                for u in 1..=nodes {
                    for v in (u + 1)..=nodes {
                        if rng.random::<f64>() < edge_prob {
                            edges.push((u, v));
                        }
                    }
                }
                match Graph::from_edges(nodes, &edges) {
                    Ok(g) => return Ok(g),
                    Err(Error::Disconnected) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Validation(format!(
                "no connected G({nodes}, {edge_prob}) sample within 1000 attempts"
            )))
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Full PAC runs, one CSV row per (algorithm, repetition).
    Pac,
    /// Anytime error curves, one CSV row per (algorithm, budget).
    Curve,
    /// Contextual stage sequences, one CSV row per (repetition, stage).
    Contextual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmChoice {
    Line,
    Tree,
    Nne,
    TreeMinDiameter,
    TreeMaxDiameter,
}

impl AlgorithmChoice {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmChoice::Line => "line",
            AlgorithmChoice::Tree => "tree",
            AlgorithmChoice::Nne => "nne",
            AlgorithmChoice::TreeMinDiameter => "tree_min_diameter",
            AlgorithmChoice::TreeMaxDiameter => "tree_max_diameter",
        }
    }

    fn as_curve(&self) -> Option<CurveAlgorithm> {
        match self {
            AlgorithmChoice::Nne => Some(CurveAlgorithm::Nne),
            AlgorithmChoice::TreeMinDiameter => Some(CurveAlgorithm::TreeMinDiameter),
            AlgorithmChoice::TreeMaxDiameter => Some(CurveAlgorithm::TreeMaxDiameter),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    Line {
        nodes: usize,
    },
    RandomTree {
        nodes: usize,
        #[serde(default)]
        graph_seed: Option<u64>,
    },
    SpiderWeb {
        rings: usize,
        nodes_per_ring: usize,
    },
    ErdosRenyi {
        nodes: usize,
        edge_prob: f64,
        #[serde(default)]
        graph_seed: Option<u64>,
    },
    /// Plain-text edge list on disk.
    EdgeList {
        path: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardConfig {
    /// Fresh uniform rewards for every repetition.
    #[default]
    Uniform01,
    /// One uniform draw per experiment (derived from the master seed), shared
    /// by all repetitions: a fixed problem instance.
    Uniform01Fixed,
    /// The same explicit rewards for every repetition.
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextPattern {
    /// The first basis vector at every stage.
    Identical,
    /// Standard basis vectors cycled in order.
    BasisCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextualConfig {
    pub dimension: usize,
    pub stages: usize,
    pub pattern: ContextPattern,
    #[serde(default = "default_spread")]
    pub direction_spread: f64,
}

fn default_spread() -> f64 {
    0.2
}

/// A whole experiment, serializable as a single TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub seed: u64,
    pub repetitions: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub noise: NoiseModel,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmChoice>,
    #[serde(default)]
    pub budgets: Vec<u64>,
    pub graph: GraphConfig,
    #[serde(default)]
    pub rewards: RewardConfig,
    #[serde(default)]
    pub contextual: Option<ContextualConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(path: &FsPath) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_context("reading", path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        PacParams::new(self.epsilon, self.delta).map_err(|e| Error::Config(e.to_string()))?;
        if let GraphConfig::EdgeList { path } = &self.graph {
            if !FsPath::new(path).exists() {
                return Err(Error::Config(format!("edge list {path} does not exist")));
            }
        }
        match self.mode {
            ExperimentMode::Pac => {
                if self.algorithms.is_empty() {
                    return Err(Error::Config(
                        "pac mode needs at least one algorithm".into(),
                    ));
                }
                if self.algorithms.iter().any(|a| {
                    a.as_curve().is_none()
                        && !matches!(
                            a,
                            AlgorithmChoice::Line | AlgorithmChoice::Tree | AlgorithmChoice::Nne
                        )
                }) {
                    return Err(Error::Config("pac algorithms are line, tree, nne".into()));
                }
                if self.algorithms.iter().any(|a| {
                    matches!(
                        a,
                        AlgorithmChoice::TreeMinDiameter | AlgorithmChoice::TreeMaxDiameter
                    )
                }) {
                    return Err(Error::Config(
                        "spanning-tree variants are curve-mode algorithms".into(),
                    ));
                }
                if self.epsilon == 0.0 {
                    return Err(Error::Config("pac mode needs epsilon > 0".into()));
                }
            }
            ExperimentMode::Curve => {
                if self.algorithms.is_empty() || self.budgets.is_empty() {
                    return Err(Error::Config(
                        "curve mode needs algorithms and budgets".into(),
                    ));
                }
                if self.algorithms.iter().any(|a| a.as_curve().is_none()) {
                    return Err(Error::Config(
                        "curve algorithms are nne, tree_min_diameter, tree_max_diameter".into(),
                    ));
                }
            }
            ExperimentMode::Contextual => {
                let Some(ctx) = &self.contextual else {
                    return Err(Error::Config(
                        "contextual mode needs a [contextual] section".into(),
                    ));
                };
                if ctx.dimension < 1 || ctx.stages < 1 {
                    return Err(Error::Config("dimension and stages must be >= 1".into()));
                }
                if self.epsilon == 0.0 {
                    return Err(Error::Config("contextual mode needs epsilon > 0".into()));
                }
            }
        }
        Ok(())
    }

    fn build_graph(&self) -> Result<Graph> {
        match &self.graph {
            GraphConfig::Line { nodes } => generate_graph(&GraphKind::Line { nodes: *nodes }),
            GraphConfig::RandomTree { nodes, graph_seed } => {
                generate_graph(&GraphKind::RandomTree {
                    nodes: *nodes,
                    seed: graph_seed.unwrap_or_else(|| derive_seed(self.seed, STREAM_GRAPH)),
                })
            }
            GraphConfig::SpiderWeb {
                rings,
                nodes_per_ring,
            } => Ok(generate_spider_web(&SpiderWebSpec::new(
                *rings,
                *nodes_per_ring,
            )?)),
            GraphConfig::ErdosRenyi {
                nodes,
                edge_prob,
                graph_seed,
            } => generate_graph(&GraphKind::ErdosRenyiConnected {
                nodes: *nodes,
                edge_prob: *edge_prob,
                seed: graph_seed.unwrap_or_else(|| derive_seed(self.seed, STREAM_GRAPH)),
            }),
            GraphConfig::EdgeList { path } => Graph::from_edge_list_file(FsPath::new(path)),
        }
    }

    fn rewards_for(&self, n: usize, rep_seed: u64) -> Result<NodeRewards> {
        match &self.rewards {
            RewardConfig::Uniform01 => {
                NodeRewards::uniform(n, derive_seed(rep_seed, STREAM_REWARDS))
            }
            RewardConfig::Uniform01Fixed => {
                NodeRewards::uniform(n, derive_seed(self.seed, STREAM_REWARDS))
            }
            RewardConfig::Explicit { values } => NodeRewards::explicit(values.clone()),
        }
    }

    fn rep_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, rep as u64)
    }
}

/// Output files of one experiment run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentArtifacts {
    pub results: PathBuf,
    pub manifest: PathBuf,
}

/// Runs the configured experiment and writes `results.csv` plus
/// `manifest.toml` into `out_dir`. Repetitions run in parallel; rows are
/// collected and written in a deterministic order, so identical configs
/// produce byte-identical files.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &FsPath) -> Result<ExperimentArtifacts> {
    config.validate()?;
    let graph = config.build_graph()?;
    // Probe the reward scheme against this graph so explicit vectors of the
    // wrong length (or with tied maxima) fail before any repetition starts.
    let probe = config
        .rewards_for(graph.node_count(), config.seed)
        .map_err(|e| Error::Config(format!("rewards incompatible with the graph: {e}")))?;
    if probe.node_count() != graph.node_count() {
        return Err(Error::Config(format!(
            "{} rewards for a graph with {} nodes",
            probe.node_count(),
            graph.node_count()
        )));
    }
    let csv = match config.mode {
        ExperimentMode::Pac => pac_csv(config, &graph)?,
        ExperimentMode::Curve => curve_csv(config, &graph)?,
        ExperimentMode::Contextual => contextual_csv(config, &graph)?,
    };

    fs::create_dir_all(out_dir).map_err(|e| io_context("creating", out_dir, e))?;
    let results = out_dir.join("results.csv");
    fs::write(&results, csv).map_err(|e| io_context("writing", &results, e))?;

    let manifest = out_dir.join("manifest.toml");
    fs::write(&manifest, manifest_string(config))
        .map_err(|e| io_context("writing", &manifest, e))?;
    Ok(ExperimentArtifacts { results, manifest })
}

fn manifest_string(config: &ExperimentConfig) -> String {
    // TOML integers are i64; derived seeds span the full u64 range, so the
    // informational seed list is written as strings.
    let rep_seeds: Vec<String> = (0..config.repetitions)
        .map(|rep| format!("{:?}", config.rep_seed(rep).to_string()))
        .collect();
    let mut out = String::new();
    out.push_str("[manifest]\n");
    out.push_str(&format!(
        "library_version = {:?}\n",
        env!("CARGO_PKG_VERSION")
    ));
    out.push_str(&format!("master_seed = {}\n", config.seed));
    out.push_str("results = \"results.csv\"\n");
    out.push_str(&format!(
        "repetition_seeds = [{}]\n\n",
        rep_seeds.join(", ")
    ));
    out.push_str("[config]\n");
    out.push_str(&indent_toml(&config.to_toml_string()));
    out
}

// The config echo nests under [config]; prefix its table headers.
fn indent_toml(toml_text: &str) -> String {
    let mut out = String::new();
    for line in toml_text.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("[[") {
            out.push_str(&format!("[[config.{rest}\n"));
        } else if let Some(rest) = trimmed.strip_prefix('[') {
            out.push_str(&format!("[config.{rest}\n"));
        } else {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Reads back the `[config]` table of a manifest and re-runs it; replays are
/// byte-identical to the original run.
pub fn replay_from_manifest(
    manifest_path: &FsPath,
    out_dir: &FsPath,
) -> Result<ExperimentArtifacts> {
    let text =
        fs::read_to_string(manifest_path).map_err(|e| io_context("reading", manifest_path, e))?;
    let value: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let config_table = value
        .get("config")
        .ok_or_else(|| Error::Config("manifest has no [config] table".into()))?;
    let config_text = toml::to_string(config_table).map_err(|e| Error::Config(e.to_string()))?;
    let config = ExperimentConfig::from_toml_str(&config_text)?;
    run_experiment(&config, out_dir)
}

fn pac_csv(config: &ExperimentConfig, graph: &Graph) -> Result<String> {
    let params = PacParams::new(config.epsilon, config.delta)?;
    let n = graph.node_count();
    let mut out = String::from(
        "algorithm,seed,n,epsilon,delta,noise_model,chosen_node,best_node,total_pulls,phases\n",
    );
    for algorithm in &config.algorithms {
        let rows: Vec<Result<String>> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| -> Result<String> {
                let rep_seed = config.rep_seed(rep);
                let rewards = config.rewards_for(n, rep_seed)?;
                let mut env = BanditEnvironment::new(
                    graph.clone(),
                    rewards,
                    config.noise,
                    derive_seed(rep_seed, STREAM_ENV),
                )?;
                let result = match algorithm {
                    AlgorithmChoice::Line => run_line(&mut env, graph, &params)?,
                    AlgorithmChoice::Tree => run_tree(&mut env, graph, &params)?,
                    AlgorithmChoice::Nne => run_nne(&mut env, graph, &params)?,
                    _ => unreachable!("validated in pac mode"),
                };
                debug_assert_eq!(result.total_pulls, env.total_pulls());
                Ok(format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    algorithm.name(),
                    rep_seed,
                    n,
                    config.epsilon,
                    config.delta,
                    config.noise.name(),
                    result.chosen,
                    env.best_node(),
                    result.total_pulls,
                    result.phase_count(),
                )) // one repetition failure aborts the experiment
            })
            .collect();
        for row in rows {
            out.push_str(&row?);
        }
    }
    Ok(out)
}

fn curve_csv(config: &ExperimentConfig, graph: &Graph) -> Result<String> {
    let n = graph.node_count();
    let mut out = String::from("algorithm,budget,error_rate,repetitions\n");
    for algorithm in &config.algorithms {
        let curve_algorithm = algorithm.as_curve().expect("validated in curve mode");
        let factory = |rep: usize| {
            let rep_seed = config.rep_seed(rep);
            let rewards = config
                .rewards_for(n, rep_seed)
                .expect("reward config validated");
            BanditEnvironment::new(
                graph.clone(),
                rewards,
                config.noise,
                derive_seed(rep_seed, STREAM_ENV),
            )
            .expect("environment construction")
        };
        let points = budgeted_error_curve(
            factory,
            graph,
            curve_algorithm,
            &config.budgets,
            config.repetitions,
        )?;
        for point in points {
            let rate = point.error_rate.map(|r| r.to_string()).unwrap_or_default(); // flagged points stay empty
            out.push_str(&format!(
                "{},{},{},{}\n",
                curve_algorithm.name(),
                point.budget,
                rate,
                point.repetitions
            ));
        }
    }
    Ok(out)
}

fn contextual_csv(config: &ExperimentConfig, graph: &Graph) -> Result<String> {
    let ctx = config.contextual.as_ref().expect("validated");
    let params = PacParams::new(config.epsilon, config.delta)?;
    let n = graph.node_count();
    let contexts: Vec<ContextVector> = (0..ctx.stages)
        .map(|s| match ctx.pattern {
            ContextPattern::Identical => ContextVector::basis(ctx.dimension, 0),
            ContextPattern::BasisCycle => ContextVector::basis(ctx.dimension, s % ctx.dimension),
        })
        .collect();
    let mut out = String::from(
        "algorithm,seed,n,epsilon,delta,noise_model,chosen_node,best_node,total_pulls,phases,stage,cumulative_pulls,dimension\n",
    );
    let rows: Vec<Result<String>> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<String> {
            let rep_seed = config.rep_seed(rep);
            let directions = clustered_directions(
                n,
                ctx.dimension,
                ctx.direction_spread,
                derive_seed(rep_seed, STREAM_DIRECTIONS),
            )?;
            let mut env = ContextualEnvironment::new(
                graph.clone(),
                &directions,
                config.noise,
                derive_seed(rep_seed, STREAM_ENV),
            )?;
            let stages = run_contextual_sequence(&mut env, graph, &contexts, &params)?;
            let mut rows = String::new();
            for (stage, x) in stages.iter().zip(&contexts) {
                rows.push_str(&format!(
                    "contextual_nne,{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    rep_seed,
                    n,
                    config.epsilon,
                    config.delta,
                    config.noise.name(),
                    stage.chosen,
                    env.best_node_for(x),
                    stage.stage_pulls,
                    stage.phases,
                    stage.stage,
                    stage.cumulative_pulls,
                    ctx.dimension,
                ));
            }
            Ok(rows)
        })
        .collect();
    for row in rows {
        out.push_str(&row?);
    }
    Ok(out)
}
