//! The bandit environment: hidden node rewards and the stochastic edge
//! observation channel. The environment is the sole holder of the rewards;
//! algorithms only ever see edge pulls.
//!
//! Each edge owns an independent pseudo-random stream derived from the master
//! seed, so the interleaving order of pulls across edges never changes any
//! individual edge's draw sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, Path};

/// Splitmix64-style mixer used to derive independent stream seeds from a
/// master seed. Stable across platforms and releases.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hidden per-node rewards, all in `[0, 1]` so that every pairwise difference
/// lies in `[-1, 1]`. The maximum must be unique.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRewards {
    values: Vec<f64>, // 0-based storage
    best: NodeId,
    gap: f64,
}

impl NodeRewards {
    /// Wraps an explicit reward vector. Values outside `[0, 1]` or a tied
    /// maximum are rejected.
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("reward vector is empty".into()));
        }
        for (i, &r) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Validation(format!(
                    "reward of node {} is {r}, outside [0, 1]",
                    i + 1
                )));
            }
        }
        let best0 = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if values.iter().filter(|&&r| r == values[best0]).count() > 1 {
            return Err(Error::Validation(
                "tied maximum reward: the best node must be unique".into(),
            ));
        }
        let gap = values
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best0)
            .map(|(_, &r)| values[best0] - r)
            .fold(f64::INFINITY, f64::min);
        let gap = if gap.is_finite() { gap } else { 0.0 };
        Ok(NodeRewards {
            values,
            best: best0 + 1,
            gap,
        })
    }

    /// Draws `n >= 2` rewards independently from the uniform distribution on
    /// `[0, 1]`. Deterministic under `seed`; the probability-zero event of a
    /// tied maximum is redrawn.
    pub fn uniform(n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(
                "uniform rewards need at least 2 nodes".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            if let Ok(r) = Self::explicit(values) {
                return Ok(r);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn reward(&self, v: NodeId) -> f64 {
        self.values[v - 1]
    }

    /// Rewards in node order (index 0 holds node 1).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn best_node(&self) -> NodeId {
        self.best
    }

    /// Difference between the best and second-best rewards (0 for a single
    /// node).
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn is_epsilon_optimal(&self, v: NodeId, epsilon: f64) -> bool {
        self.reward(v) >= self.reward(self.best) - epsilon
    }

    /// `node,reward` CSV, one row per node.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("node,reward\n");
        for (i, r) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{r}\n", i + 1));
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 && line.trim() == "node,reward" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (node, reward) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected node,reward", idx + 1)))?;
            let node: usize = node
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
            if node != values.len() + 1 {
                return Err(Error::Parse(format!(
                    "line {}: nodes must appear in order 1..n",
                    idx + 1
                )));
            }
            let reward: f64 = reward
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
            values.push(reward);
        }
        Self::explicit(values)
    }
}

/// Edge noise model. Every observation of edge `(i, j)` has mean
/// `r_j - r_i` and support inside `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `+1` with probability `(1 + d) / 2`, else `-1`: a preference click.
    PreferenceSign,
    /// Uniform on `[d - w, d + w]` with `w = 1 - |d|`, the widest centered
    /// uniform that stays in bounds.
    UniformBounded,
    /// Zero variance: returns exactly `d`. Diagnostic model for
    /// noiseless-limit checks.
    Exact,
}

impl NoiseModel {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::PreferenceSign => "preference_sign",
            NoiseModel::UniformBounded => "uniform_bounded",
            NoiseModel::Exact => "exact",
        }
    }

    pub(crate) fn sample(&self, d: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseModel::PreferenceSign => {
                let p = (1.0 + d) / 2.0;
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseModel::UniformBounded => {
                let w = 1.0 - d.abs();
                d + (2.0 * rng.random::<f64>() - 1.0) * w
            }
            NoiseModel::Exact => d,
        }
    }
}

impl std::fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-edge pull counters plus a total; counters never decrease.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PullLedger {
    per_edge: Vec<u64>,
    total: u64,
}

impl PullLedger {
    pub(crate) fn new(edge_count: usize) -> Self {
        PullLedger {
            per_edge: vec![0; edge_count],
            total: 0,
        }
    }

    pub(crate) fn record(&mut self, edge_index: usize) {
        self.per_edge[edge_index] += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn edge(&self, edge_index: usize) -> u64 {
        self.per_edge[edge_index]
    }

    /// Re-derives the total from the per-edge counters (ledger invariant).
    pub fn recount(&self) -> u64 {
        self.per_edge.iter().sum()
    }
}

/// The hidden ground truth plus the only observation channel: stochastic
/// edge pulls.
///
/// Construction is the single place rewards enter; algorithms receive only
/// `pull_edge` / `pull_path` and the graph. One instance serves one algorithm
/// run at a time; Monte-Carlo repetitions each build their own, independently
/// seeded instance.
#[derive(Debug, Clone)]
pub struct BanditEnvironment {
    graph: Graph,
    rewards: NodeRewards,
    noise: NoiseModel,
    seed: u64,
    streams: Vec<ChaCha8Rng>,
    ledger: PullLedger,
}

impl BanditEnvironment {
    pub fn new(graph: Graph, rewards: NodeRewards, noise: NoiseModel, seed: u64) -> Result<Self> {
        if rewards.node_count() != graph.node_count() {
            return Err(Error::Validation(format!(
                "{} rewards for a graph with {} nodes",
                rewards.node_count(),
                graph.node_count()
            )));
        }
        let streams = (0..graph.edge_count())
            .map(|e| ChaCha8Rng::seed_from_u64(derive_seed(seed, 1 + e as u64)))
            .collect();
        let ledger = PullLedger::new(graph.edge_count());
        Ok(BanditEnvironment {
            graph,
            rewards,
            noise,
            seed,
            streams,
            ledger,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ledger(&self) -> &PullLedger {
        &self.ledger
    }

    pub fn total_pulls(&self) -> u64 {
        self.ledger.total()
    }

    /// Ground-truth accessors, for scoring and tests only — algorithms must
    /// not read these.
    pub fn rewards(&self) -> &NodeRewards {
        &self.rewards
    }

    pub fn best_node(&self) -> NodeId {
        self.rewards.best_node()
    }

    /// One independent observation of edge `(i, j)`, with mean
    /// `r_j - r_i`. A pull requested as `(j, i)` is the negation of the same
    /// mechanism at the same stream position.
    pub fn pull_edge(&mut self, i: NodeId, j: NodeId) -> Result<f64> {
        let idx = self
            .graph
            .edge_index(i, j)
            .ok_or(Error::IllegalObservation { i, j })?;
        let (lo, hi) = (i.min(j), i.max(j));
        let d = self.rewards.reward(hi) - self.rewards.reward(lo);
        let obs = self.noise.sample(d, &mut self.streams[idx]);
        debug_assert!((-1.0..=1.0).contains(&obs), "observation out of bounds");
        self.ledger.record(idx);
        Ok(if i == lo { obs } else { -obs })
    }

    /// Pulls once every edge along `p` and returns the sum (the composed
    /// edge observation). The trivial path returns exactly 0 with no pulls.
    pub fn pull_path(&mut self, p: &Path) -> Result<f64> {
        let mut sum = 0.0;
        for (a, b) in p.steps() {
            sum += self.pull_edge(a, b)?;
        }
        Ok(sum)
    }
}
