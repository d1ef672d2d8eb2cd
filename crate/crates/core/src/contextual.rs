//! Contextual extension: every node hosts a hidden unit direction, the value
//! of a node under context `x` is the inner product, and each edge maintains
//! a ridge-regression estimator of its endpoint-direction difference.
//!
//! Identification proceeds in stages, one context vector per stage. Estimator
//! state persists across stages, and an edge is only sampled while its
//! confidence width exceeds the phase threshold — edges whose width is
//! already small are not pulled at all, which is what makes the cumulative
//! sample size across similar stages sublinear.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{derive_seed, NoiseModel, PullLedger};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::pac::{ceil_log2, run_elimination, PacParams, PhaseSample};

const UNIT_TOLERANCE: f64 = 1e-9;

/// A unit-norm feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    v: DVector<f64>,
}

impl ContextVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("context vector is empty".into()));
        }
        let v = DVector::from_vec(values);
        if (v.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Validation(format!(
                "context vector norm {} is not 1",
                v.norm()
            )));
        }
        Ok(ContextVector { v })
    }

    /// The `i`-th standard basis vector (0-based) in `dim` dimensions.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        ContextVector { v }
    }

    /// A uniformly random unit vector (Gaussian, normalized).
    pub fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        loop {
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            if norm > 1e-6 {
                return ContextVector { v: v / norm };
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.v.as_slice()
    }

    pub(crate) fn vector(&self) -> &DVector<f64> {
        &self.v
    }
}

/// Hidden unit directions, one per node, with stochastic contextual edge
/// pulls: observing edge `(i, j)` under context `x` has mean
/// `(u_j - u_i) . x`. Adjacent direction differences must have norm at most 1
/// so every mean stays in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct ContextualEnvironment {
    graph: Graph,
    directions: Vec<DVector<f64>>, // 0-based
    noise: NoiseModel,
    streams: Vec<ChaCha8Rng>,
    ledger: PullLedger,
}

impl ContextualEnvironment {
    pub fn new(
        graph: Graph,
        directions: &[Vec<f64>],
        noise: NoiseModel,
        seed: u64,
    ) -> Result<Self> {
        if directions.len() != graph.node_count() {
            return Err(Error::Validation(format!(
                "{} directions for a graph with {} nodes",
                directions.len(),
                graph.node_count()
            )));
        }
        let dim = directions[0].len();
        let mut parsed = Vec::with_capacity(directions.len());
        for (i, u) in directions.iter().enumerate() {
            if u.len() != dim {
                return Err(Error::Validation("direction dimensions disagree".into()));
            }
            let u = DVector::from_vec(u.clone());
            if (u.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::Validation(format!(
                    "direction of node {} has norm {}, expected 1",
                    i + 1,
                    u.norm()
                )));
            }
            parsed.push(u);
        }
        for &(lo, hi) in graph.edges() {
            let diff = (&parsed[hi - 1] - &parsed[lo - 1]).norm();
            if diff > 1.0 + UNIT_TOLERANCE {
                return Err(Error::Validation(format!(
                    "adjacent directions {lo} and {hi} differ by {diff} > 1; \
                     edge means would leave [-1, 1]"
                )));
            }
        }
        let streams = (0..graph.edge_count())
            .map(|e| ChaCha8Rng::seed_from_u64(derive_seed(seed, 1 + e as u64)))
            .collect();
        let ledger = PullLedger::new(graph.edge_count());
        Ok(ContextualEnvironment {
            graph,
            directions: parsed,
            noise,
            streams,
            ledger,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn ledger(&self) -> &PullLedger {
        &self.ledger
    }

    pub fn total_pulls(&self) -> u64 {
        self.ledger.total()
    }

    /// One observation of edge `(i, j)` under context `x`, mean
    /// `(u_j - u_i) . x`; the reversed query negates the same draw.
    pub fn pull(&mut self, i: NodeId, j: NodeId, x: &ContextVector) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::Validation(format!(
                "context dimension {} does not match environment dimension {}",
                x.dim(),
                self.dim()
            )));
        }
        let idx = self
            .graph
            .edge_index(i, j)
            .ok_or(Error::IllegalObservation { i, j })?;
        let (lo, hi) = (i.min(j), i.max(j));
        let d = (&self.directions[hi - 1] - &self.directions[lo - 1])
            .dot(x.vector())
            .clamp(-1.0, 1.0);
        let obs = self.noise.sample(d, &mut self.streams[idx]);
        debug_assert!((-1.0..=1.0).contains(&obs));
        self.ledger.record(idx);
        Ok(if i == lo { obs } else { -obs })
    }

    /// Ground truth for scoring: the node value `u_v . x`.
    pub fn node_value(&self, v: NodeId, x: &ContextVector) -> f64 {
        self.directions[v - 1].dot(x.vector())
    }

    /// Ground truth for scoring: argmax of `u_v . x` (lowest index on ties).
    pub fn best_node_for(&self, x: &ContextVector) -> NodeId {
        let mut best = (1, self.node_value(1, x));
        for v in 2..=self.graph.node_count() {
            let value = self.node_value(v, x);
            if value > best.1 {
                best = (v, value);
            }
        }
        best.0
    }
}

/// Unit directions clustered around a random center so that all pairwise
/// differences stay below 1 (valid for any graph on these nodes).
/// Deterministic under `seed`.
pub fn clustered_directions(n: usize, dim: usize, spread: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=0.5).contains(&spread) {
        return Err(Error::Validation("spread must be in [0, 0.5]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let center = ContextVector::random_unit(dim, &mut rng);
        let candidates: Vec<DVector<f64>> = (0..n)
            .map(|_| {
                let noise =
                    DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)) * spread;
                let u = center.vector() + noise;
                let norm = u.norm();
                u / norm
            })
            .collect();
        let ok = (0..n).all(|i| {
            ((i + 1)..n).all(|j| (&candidates[i] - &candidates[j]).norm() <= 1.0 - UNIT_TOLERANCE)
        });
        if ok {
            return Ok(candidates
                .into_iter()
                .map(|u| u.as_slice().to_vec())
                .collect());
        }
    }
    Err(Error::Validation(
        "could not draw clustered directions within 100 attempts; lower the spread".into(),
    ))
}

/// Per-edge ridge estimator of the endpoint-direction difference: the design
/// accumulator `A = I + sum x x^T`, the response accumulator `b`, and the
/// ridge estimate `A^{-1} b`. The identity prior keeps the smallest
/// eigenvalue at 1, so solves are always well-posed.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEstimator {
    a: DMatrix<f64>,
    b: DVector<f64>,
    pulls: u64,
}

impl EdgeEstimator {
    pub fn new(dim: usize) -> Self {
        EdgeEstimator {
            a: DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
            pulls: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn pulls(&self) -> u64 {
        self.pulls
    }

    /// `A += x x^T`, `b += observation * x`.
    pub fn update(&mut self, x: &ContextVector, observation: f64) {
        debug_assert_eq!(x.dim(), self.dim());
        self.a.ger(1.0, x.vector(), x.vector(), 1.0);
        self.b.axpy(observation, x.vector(), 1.0);
        self.pulls += 1;
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.a
            .clone()
            .cholesky()
            .expect("A = I + sum xx^T is positive definite")
            .solve(rhs)
    }

    /// The ridge estimate `A^{-1} b`.
    pub fn estimate(&self) -> DVector<f64> {
        self.solve(&self.b)
    }

    /// Predicted mean observation under context `x`.
    pub fn predict(&self, x: &ContextVector) -> f64 {
        self.estimate().dot(x.vector())
    }

    /// `x^T A^{-1} x`; strictly decreases when `x x^T` is added.
    pub fn leverage(&self, x: &ContextVector) -> f64 {
        self.solve(x.vector()).dot(x.vector())
    }

    /// High-probability bound on the squared prediction error at `x`:
    /// `x^T A^{-1} x * (d * ln(total) + ln(1 / delta))`, where `total` is the
    /// cumulative pull count across stages (at least 1).
    pub fn confidence_width(&self, x: &ContextVector, delta: f64, total: u64) -> f64 {
        let sigma = total.max(1) as f64;
        self.leverage(x) * (self.dim() as f64 * sigma.ln() + (1.0 / delta).ln())
    }

    /// `ln det A`, via the Cholesky factor.
    pub fn log_det(&self) -> f64 {
        let chol = self
            .a
            .clone()
            .cholesky()
            .expect("A = I + sum xx^T is positive definite");
        2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// One ridge estimator per graph edge, persisted across stages.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorBank {
    dim: usize,
    estimators: Vec<EdgeEstimator>,
}

impl EstimatorBank {
    pub fn new(g: &Graph, dim: usize) -> Self {
        EstimatorBank {
            dim,
            estimators: (0..g.edge_count())
                .map(|_| EdgeEstimator::new(dim))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn estimator(&self, edge_index: usize) -> &EdgeEstimator {
        &self.estimators[edge_index]
    }

    /// Records an observation of `(lo, hi)` in canonical orientation.
    pub fn update_indexed(&mut self, edge_index: usize, x: &ContextVector, observation: f64) {
        self.estimators[edge_index].update(x, observation);
    }

    /// Predicted mean of a pull of `(i, j)` under `x` (signed).
    pub fn predict_signed(&self, g: &Graph, i: NodeId, j: NodeId, x: &ContextVector) -> f64 {
        let idx = g.edge_index(i, j).expect("edge");
        let canonical = self.estimators[idx].predict(x);
        if i < j {
            canonical
        } else {
            -canonical
        }
    }

    /// Flat CSV snapshot: a `dim` line, then one row per edge holding the
    /// canonical endpoints, `A` row-major, `b`, and the pull count. Floats
    /// use the shortest round-trip representation, so restoring is
    /// bit-exact.
    pub fn to_csv_string(&self, g: &Graph) -> String {
        let mut out = format!("dim,{}\n", self.dim);
        for (idx, &(lo, hi)) in g.edges().iter().enumerate() {
            let est = &self.estimators[idx];
            let mut row = format!("{lo},{hi}");
            for r in 0..self.dim {
                for c in 0..self.dim {
                    row.push_str(&format!(",{}", est.a[(r, c)]));
                }
            }
            for r in 0..self.dim {
                row.push_str(&format!(",{}", est.b[r]));
            }
            row.push_str(&format!(",{}\n", est.pulls));
            out.push_str(&row);
        }
        out
    }

    pub fn from_csv_str(g: &Graph, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty estimator snapshot".into()))?;
        let dim: usize = header
            .strip_prefix("dim,")
            .ok_or_else(|| Error::Parse("expected a `dim,<d>` header".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("dim: {e}")))?;
        let mut bank = EstimatorBank::new(g, dim);
        let mut rows = 0;
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let expected = 3 + dim * dim + dim;
            if fields.len() != expected {
                return Err(Error::Parse(format!(
                    "row {}: expected {expected} fields, found {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let lo: NodeId = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("{e}")))?;
            let hi: NodeId = fields[1]
                .parse()
                .map_err(|e| Error::Parse(format!("{e}")))?;
            let idx = g
                .edge_index(lo, hi)
                .ok_or_else(|| Error::Parse(format!("({lo}, {hi}) is not a graph edge")))?;
            let mut values = fields[2..fields.len() - 1]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("{e}"))));
            let mut a = DMatrix::zeros(dim, dim);
            for r in 0..dim {
                for c in 0..dim {
                    a[(r, c)] = values.next().unwrap()?;
                }
            }
            let mut b = DVector::zeros(dim);
            for r in 0..dim {
                b[r] = values.next().unwrap()?;
            }
            let pulls: u64 = fields[fields.len() - 1]
                .parse()
                .map_err(|e| Error::Parse(format!("{e}")))?;
            bank.estimators[idx] = EdgeEstimator { a, b, pulls };
            rows += 1;
        }
        if rows != g.edge_count() {
            return Err(Error::Parse(format!(
                "snapshot has {rows} edge rows, graph has {}",
                g.edge_count()
            )));
        }
        Ok(bank)
    }
}

/// How per-stage confidence is apportioned across the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// `delta / S` per stage.
    Known(usize),
    /// `delta * 6 / (pi^2 s^2)` for stage `s`; sums to at most `delta`.
    Unknown,
}

impl Horizon {
    pub fn stage_delta(&self, delta: f64, stage: usize) -> f64 {
        match self {
            Horizon::Known(s) => delta / *s as f64,
            Horizon::Unknown => delta * 6.0 / (PI * PI * (stage * stage) as f64),
        }
    }
}

/// Stage position within a sequence, plus an optional per-edge per-phase pull
/// cap for bounded-budget experiments (default unbounded: the width stopping
/// rule always terminates on its own).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSchedule {
    pub stage: usize,
    pub horizon: Horizon,
    pub pull_cap: Option<u64>,
}

impl StageSchedule {
    /// A standalone stage: the whole confidence budget, no cap.
    pub fn single() -> Self {
        StageSchedule {
            stage: 1,
            horizon: Horizon::Known(1),
            pull_cap: None,
        }
    }

    pub fn of_sequence(stage: usize, total_stages: usize) -> Self {
        StageSchedule {
            stage,
            horizon: Horizon::Known(total_stages),
            pull_cap: None,
        }
    }
}

/// Outcome of one identification stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageResult {
    pub stage: usize,
    pub chosen: NodeId,
    /// Pulls spent by this stage alone.
    pub stage_pulls: u64,
    /// Total pulls across all stages so far (the environment ledger).
    pub cumulative_pulls: u64,
    /// Elimination phases this stage ran.
    pub phases: usize,
}

/// One elimination stage for context `x`: the phase loop of the network
/// algorithm, where "pull edge `t` times" becomes "pull until the confidence
/// width at `x` is below the phase threshold". Edges whose width already
/// satisfies the threshold at stage start are not pulled at all.
///
/// The width threshold is `(acc / (2 * D_i * ceil(log2 n)))^2` per edge, so
/// composed estimates over stored paths of length at most `D_i` stay within
/// the phase accuracy; the per-edge confidence is the stage confidence split
/// over edges and phases.
pub fn run_contextual_stage(
    env: &mut ContextualEnvironment,
    g: &Graph,
    x: &ContextVector,
    params: &PacParams,
    bank: &mut EstimatorBank,
    schedule: &StageSchedule,
) -> Result<StageResult> {
    if x.dim() != env.dim() || bank.dim() != env.dim() {
        return Err(Error::Validation(
            "context, estimator bank, and environment dimensions must agree".into(),
        ));
    }
    let n = g.node_count();
    if n == 1 {
        return Ok(StageResult {
            stage: schedule.stage,
            chosen: 1,
            stage_pulls: 0,
            cumulative_pulls: env.total_pulls(),
            phases: 0,
        });
    }
    let acc = params.effective_accuracy();
    if acc == 0.0 {
        return Err(Error::ZeroAccuracy);
    }
    let phase_count = f64::from(ceil_log2(n));
    let delta_stage = schedule.horizon.stage_delta(params.delta(), schedule.stage);
    let before = env.total_pulls();

    let outcome = run_elimination(g, |info| {
        let per_edge_accuracy = acc / (2.0 * f64::from(info.diameter) * phase_count);
        let threshold = per_edge_accuracy * per_edge_accuracy;
        let delta_edge = delta_stage / (info.edges.len() as f64 * phase_count);
        let mut pulls = 0u64;
        for &(lo, hi) in &info.edges {
            let idx = g.edge_index(lo, hi).expect("subgraph edge");
            let mut this_edge = 0u64;
            loop {
                if schedule.pull_cap.is_some_and(|cap| this_edge >= cap) {
                    break;
                }
                let width = bank
                    .estimator(idx)
                    .confidence_width(x, delta_edge, env.total_pulls());
                if width <= threshold {
                    break;
                }
                let obs = env.pull(lo, hi, x)?;
                bank.update_indexed(idx, x, obs);
                pulls += 1;
                this_edge += 1;
            }
        }
        let edge_values = info
            .edges
            .iter()
            .map(|&(lo, hi)| {
                let idx = g.edge_index(lo, hi).expect("subgraph edge");
                ((lo, hi), bank.estimator(idx).predict(x))
            })
            .collect();
        Ok(PhaseSample::Sampled {
            pulls,
            per_edge_budget: schedule.pull_cap.unwrap_or(0),
            edge_values,
        })
    })?;

    Ok(StageResult {
        stage: schedule.stage,
        chosen: outcome.winner.expect("width-driven stages always finish"),
        stage_pulls: env.total_pulls() - before,
        cumulative_pulls: env.total_pulls(),
        phases: outcome.phases.len(),
    })
}

/// Runs a sequence of stages over `contexts`, sharing one estimator bank;
/// per-stage confidence is `delta / S`.
pub fn run_contextual_sequence(
    env: &mut ContextualEnvironment,
    g: &Graph,
    contexts: &[ContextVector],
    params: &PacParams,
) -> Result<Vec<StageResult>> {
    let Some(first) = contexts.first() else {
        return Ok(Vec::new());
    };
    let mut bank = EstimatorBank::new(g, first.dim());
    let mut results = Vec::with_capacity(contexts.len());
    for (i, x) in contexts.iter().enumerate() {
        let schedule = StageSchedule::of_sequence(i + 1, contexts.len());
        results.push(run_contextual_stage(
            env, g, x, params, &mut bank, &schedule,
        )?);
    }
    Ok(results)
}
