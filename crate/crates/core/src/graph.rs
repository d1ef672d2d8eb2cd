//! Graph core: undirected connected graphs, all-pairs shortest paths backed
//! by per-root prunable breadth-first trees, sampled subgraphs, and the
//! min/max-diameter spanning-tree heuristics.
//!
//! Nodes are 1-based indices, matching the plain-text edge-list format
//! (`i j` per line, `#` comments).

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path as FsPath;

use crate::error::{Error, Result};

/// 1-based node index.
pub type NodeId = usize;

/// Undirected connected graph over nodes `1..=n`, no self-loops, no
/// duplicate edges.
///
/// Neighbor lists keep the order given to [`Graph::from_adjacency`] (or
/// ascending order for [`Graph::from_edges`]); the depth-first spanning-tree
/// heuristic walks neighbors in that order, so generators can pin it to make
/// tree extraction reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<NodeId>>,        // slot 0 unused
    edges: Vec<(NodeId, NodeId)>, // canonical (lo, hi), sorted
}

impl Graph {
    /// Builds a graph from an edge list; neighbor lists are sorted ascending.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut adj = vec![Vec::new(); n + 1];
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            validate_edge(n, u, v)?;
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }
        Self::from_parts(n, adj, seen)
    }

    /// Builds a graph from explicit per-node neighbor lists (`lists[i]` holds
    /// the neighbors of node `i + 1`), preserving their order.
    pub fn from_adjacency(lists: Vec<Vec<NodeId>>) -> Result<Self> {
        let n = lists.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut adj = vec![Vec::new(); n + 1];
        let mut seen = BTreeSet::new();
        for (slot, list) in lists.into_iter().enumerate() {
            let u = slot + 1;
            for &v in &list {
                validate_edge(n, u, v)?;
                seen.insert((u.min(v), u.max(v)));
            }
            adj[u] = list;
        }
        // Symmetry: u lists v exactly once iff v lists u exactly once.
        for &(lo, hi) in &seen {
            let a = adj[lo].iter().filter(|&&w| w == hi).count();
            let b = adj[hi].iter().filter(|&&w| w == lo).count();
            if a != 1 || b != 1 {
                return Err(Error::InvalidGraph(format!(
                    "adjacency lists are inconsistent for edge ({lo}, {hi})"
                )));
            }
        }
        Self::from_parts(n, adj, seen)
    }

    fn from_parts(
        n: usize,
        adj: Vec<Vec<NodeId>>,
        edge_set: BTreeSet<(NodeId, NodeId)>,
    ) -> Result<Self> {
        let g = Graph {
            n,
            adj,
            edges: edge_set.into_iter().collect(),
        };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// Parses the plain-text edge-list format: one `i j` pair per line,
    /// 1-based node ids, `#` starts a comment. The node count is the largest
    /// id mentioned.
    pub fn from_edge_list_str(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_node = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<NodeId> {
                tok.ok_or_else(|| Error::Parse(format!("line {}: expected `i j`", idx + 1)))?
                    .parse::<NodeId>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))
            };
            let i = parse(tokens.next())?;
            let j = parse(tokens.next())?;
            if tokens.next().is_some() {
                return Err(Error::Parse(format!(
                    "line {}: trailing tokens after `i j`",
                    idx + 1
                )));
            }
            max_node = max_node.max(i).max(j);
            edges.push((i, j));
        }
        if edges.is_empty() {
            return Err(Error::Parse("edge list is empty".into()));
        }
        Self::from_edges(max_node, &edges)
    }

    /// Renders the canonical edge list (`lo hi` per line, sorted).
    pub fn to_edge_list_string(&self) -> String {
        let mut out = String::new();
        for &(lo, hi) in &self.edges {
            out.push_str(&format!("{lo} {hi}\n"));
        }
        out
    }

    pub fn from_edge_list_file(path: &FsPath) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_context("reading", path, e))?;
        Self::from_edge_list_str(&text)
    }

    pub fn write_edge_list_file(&self, path: &FsPath) -> Result<()> {
        fs::write(path, self.to_edge_list_string()).map_err(|e| io_context("writing", path, e))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes in ascending order, `1..=n`.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.n
    }

    /// Canonical `(lo, hi)` edges in ascending order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Neighbors of `v` in stored order.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edge_index(u, v).is_some()
    }

    /// Index of the undirected edge `{u, v}` into [`Graph::edges`], if present.
    pub fn edge_index(&self, u: NodeId, v: NodeId) -> Option<usize> {
        if u == v || u == 0 || v == 0 || u > self.n || v > self.n {
            return None;
        }
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok()
    }

    /// A tree has exactly `n - 1` edges (connectivity is a type invariant).
    pub fn is_tree(&self) -> bool {
        self.edges.len() == self.n - 1
    }

    /// A path graph is a tree whose maximum degree is 2.
    pub fn is_path_graph(&self) -> bool {
        self.is_tree() && (1..=self.n).all(|v| self.degree(v) <= 2)
    }

    fn is_connected(&self) -> bool {
        let dist = self.bfs_distances(1);
        (1..=self.n).all(|v| dist[v] != u32::MAX)
    }

    /// Breadth-first distances from `root`; slot 0 is unused.
    pub fn bfs_distances(&self, root: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n + 1];
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    fn eccentricity(&self, v: NodeId) -> u32 {
        let dist = self.bfs_distances(v);
        (1..=self.n).map(|w| dist[w]).max().unwrap_or(0)
    }

    /// Largest distance between any pair of nodes.
    pub fn diameter(&self) -> u32 {
        (1..=self.n)
            .map(|v| self.eccentricity(v))
            .max()
            .unwrap_or(0)
    }

    /// Minimum eccentricity and the lowest-indexed node attaining it.
    pub fn radius_center(&self) -> (u32, NodeId) {
        let mut best = (u32::MAX, 0);
        for v in 1..=self.n {
            let ecc = self.eccentricity(v);
            if ecc < best.0 {
                best = (ecc, v);
            }
        }
        best
    }
}

pub(crate) fn io_context(action: &str, path: &FsPath, err: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        err.kind(),
        format!("{action} {}: {err}", path.display()),
    ))
}

fn validate_edge(n: usize, u: NodeId, v: NodeId) -> Result<()> {
    if u == 0 || v == 0 || u > n || v > n {
        return Err(Error::InvalidGraph(format!(
            "edge ({u}, {v}) references a node outside 1..={n}"
        )));
    }
    if u == v {
        return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
    }
    Ok(())
}

/// A walk in a graph: consecutive nodes are adjacent. A single node is the
/// trivial path; revisiting nodes is allowed (cycles are valid walks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    nodes: Vec<NodeId>,
}

impl Path {
    /// Validates that every consecutive pair is an edge of `g`.
    pub fn new(g: &Graph, nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidPath("a path has at least one node".into()));
        }
        for &v in &nodes {
            if v == 0 || v > g.node_count() {
                return Err(Error::InvalidPath(format!("node {v} is not in the graph")));
            }
        }
        for w in nodes.windows(2) {
            if !g.has_edge(w[0], w[1]) {
                return Err(Error::InvalidPath(format!(
                    "consecutive nodes {} and {} are not adjacent",
                    w[0], w[1]
                )));
            }
        }
        Ok(Path { nodes })
    }

    /// The length-0 path at `v`.
    pub fn trivial(v: NodeId) -> Self {
        Path { nodes: vec![v] }
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<NodeId>) -> Self {
        Path { nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Number of edges traversed.
    #[allow(clippy::len_without_is_empty)] // a path has at least one node; see is_trivial
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    /// Consecutive node pairs, oriented along the walk.
    pub fn steps(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

/// An arbitrary subgraph: explicit node and edge sets. Produced by
/// [`ShortestPathSet::sampled_subgraph`], whose node set may strictly contain
/// the survivors (relay nodes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    nodes: BTreeSet<NodeId>,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl Subgraph {
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn contains_node(&self, v: NodeId) -> bool {
        self.nodes.contains(&v)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Canonical `(lo, hi)` edges in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.nodes.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(a, b) in &self.edges {
                let w = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == self.nodes.len()
    }
}

/// One breadth-first spanning tree per surviving root, encoding a shortest
/// path between every surviving pair. Distances are computed once on the full
/// graph; pruning only removes trees and leaves, so stored distances never
/// change.
///
/// Tie-breaking: in the tree rooted at `r`, each node's parent is its
/// lowest-indexed neighbor one step closer to `r`, and the canonical path for
/// an unordered pair is read from the tree rooted at the lower-indexed
/// endpoint. This makes every stored path deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPathSet {
    n: usize,
    eliminated: Vec<bool>,
    trees: Vec<Option<SpTree>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SpTree {
    root: NodeId,
    parent: Vec<NodeId>, // parent[root] == 0
    dist: Vec<u32>,
    present: Vec<bool>,
    child_count: Vec<u32>,
}

impl SpTree {
    fn build(g: &Graph, root: NodeId) -> Self {
        let n = g.node_count();
        let dist = g.bfs_distances(root);
        let mut parent = vec![0; n + 1];
        let mut child_count = vec![0u32; n + 1];
        for v in 1..=n {
            if v == root {
                continue;
            }
            let p = g
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&w| dist[w] + 1 == dist[v])
                .min()
                .expect("connected graph: every non-root has a parent candidate");
            parent[v] = p;
            child_count[p] += 1;
        }
        let mut present = vec![true; n + 1];
        present[0] = false;
        SpTree {
            root,
            parent,
            dist,
            present,
            child_count,
        }
    }

    /// Removes `v` if it is a pruned leaf, then cascades upward through
    /// eliminated nodes that became childless.
    fn prune_leaf_chain(&mut self, v: NodeId, eliminated: &[bool]) {
        let mut cur = v;
        while cur != self.root && self.present[cur] && self.child_count[cur] == 0 && eliminated[cur]
        {
            self.present[cur] = false;
            let p = self.parent[cur];
            self.child_count[p] -= 1;
            cur = p;
        }
    }
}

/// Computes a shortest path between every pair of nodes of a connected graph
/// as per-root breadth-first spanning trees.
pub fn all_pairs_shortest_paths(g: &Graph) -> ShortestPathSet {
    let n = g.node_count();
    let mut trees = Vec::with_capacity(n + 1);
    trees.push(None); // slot 0
    for root in 1..=n {
        trees.push(Some(SpTree::build(g, root)));
    }
    ShortestPathSet {
        n,
        eliminated: vec![false; n + 1],
        trees,
    }
}

impl ShortestPathSet {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn is_survivor(&self, v: NodeId) -> bool {
        v >= 1 && v <= self.n && !self.eliminated[v]
    }

    /// Surviving nodes in ascending order.
    pub fn survivors(&self) -> Vec<NodeId> {
        (1..=self.n).filter(|&v| !self.eliminated[v]).collect()
    }

    /// Whether `v` is still present in the tree rooted at `root` (as a
    /// survivor or a relay node).
    pub fn in_tree(&self, root: NodeId, v: NodeId) -> bool {
        self.trees[root]
            .as_ref()
            .map(|t| t.present[v])
            .unwrap_or(false)
    }

    fn tree_for(&self, u: NodeId, v: NodeId) -> Result<&SpTree> {
        for w in [u, v] {
            if !self.is_survivor(w) {
                return Err(Error::InvalidState(format!("node {w} is not a survivor")));
            }
        }
        Ok(self.trees[u.min(v)]
            .as_ref()
            .expect("survivor roots keep their tree"))
    }

    /// Shortest-path length between two surviving nodes (original-graph
    /// distance).
    pub fn distance(&self, u: NodeId, v: NodeId) -> Result<u32> {
        Ok(self.tree_for(u, v)?.dist[u.max(v)])
    }

    /// The canonical stored shortest path from `u` to `v`.
    pub fn path(&self, u: NodeId, v: NodeId) -> Result<Path> {
        let tree = self.tree_for(u, v)?;
        let (lo, hi) = (u.min(v), u.max(v));
        let mut nodes = Vec::with_capacity(tree.dist[hi] as usize + 1);
        let mut cur = hi;
        loop {
            nodes.push(cur);
            if cur == lo {
                break;
            }
            cur = tree.parent[cur];
        }
        if u == lo {
            nodes.reverse();
        }
        Ok(Path::from_nodes_unchecked(nodes))
    }

    /// Maximum stored distance over surviving pairs; 0 for a single survivor.
    pub fn diameter(&self) -> u32 {
        let survivors = self.survivors();
        let mut max = 0;
        for (i, &u) in survivors.iter().enumerate() {
            let tree = self.trees[u].as_ref().expect("survivor root");
            for &v in &survivors[i + 1..] {
                max = max.max(tree.dist[v]);
            }
        }
        max
    }

    /// Eliminates survivor `v`: drops the tree rooted at `v` and prunes `v`
    /// (and any relay chain it frees) as a leaf from all remaining trees.
    /// Nodes that are internal on a stored path between two survivors are
    /// retained as relays. Returns the pruned structure as a new value.
    pub fn prune_node(&self, v: NodeId) -> Result<Self> {
        if !self.is_survivor(v) {
            return Err(Error::InvalidState(format!("node {v} is not a survivor")));
        }
        let survivors = self.survivors();
        if survivors.len() < 2 {
            return Err(Error::InvalidState("cannot prune the last survivor".into()));
        }
        let mut next = self.clone();
        next.eliminated[v] = true;
        next.trees[v] = None;
        for root in 1..=next.n {
            if root == v {
                continue;
            }
            let eliminated = next.eliminated.clone();
            if let Some(tree) = next.trees[root].as_mut() {
                tree.prune_leaf_chain(v, &eliminated);
            }
        }
        Ok(next)
    }

    /// Union of all edges (and their nodes) on stored shortest paths between
    /// pairs of the given survivors.
    pub fn sampled_subgraph(&self, survivors: &[NodeId]) -> Result<Subgraph> {
        if survivors.is_empty() {
            return Err(Error::InvalidState(
                "sampled subgraph needs at least one survivor".into(),
            ));
        }
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for (i, &u) in survivors.iter().enumerate() {
            nodes.insert(u);
            for &v in &survivors[i + 1..] {
                let path = self.path(u, v)?;
                for (a, b) in path.steps() {
                    nodes.insert(a);
                    nodes.insert(b);
                    edges.insert((a.min(b), a.max(b)));
                }
            }
        }
        Ok(Subgraph { nodes, edges })
    }
}

/// Spanning tree heuristic targeting a small diameter: the breadth-first tree
/// rooted at a 1-center (node of minimum eccentricity, lowest index on ties).
/// The result's diameter is at most `2 * radius(g) + 1`.
pub fn min_diameter_spanning_tree(g: &Graph) -> Graph {
    let (_, center) = g.radius_center();
    let tree = SpTree::build(g, center);
    let edges: Vec<_> = (1..=g.node_count())
        .filter(|&v| v != center)
        .map(|v| (tree.parent[v], v))
        .collect();
    Graph::from_edges(g.node_count(), &edges).expect("BFS tree spans the graph")
}

/// Spanning tree heuristic targeting a large diameter: a depth-first tree
/// grown from the endpoint of a double-sweep longest shortest path, following
/// the graph's stored neighbor order. Not optimal in general (the exact
/// problem contains longest path).
pub fn max_diameter_spanning_tree(g: &Graph) -> Graph {
    let n = g.node_count();
    if n == 1 {
        return g.clone();
    }
    let dist = g.bfs_distances(1);
    let far = (1..=n).map(|v| dist[v]).max().unwrap();
    let start = (1..=n).find(|&v| dist[v] == far).unwrap();

    let mut visited = vec![false; n + 1];
    visited[start] = true;
    let mut stack = vec![start];
    let mut edges = Vec::with_capacity(n - 1);
    while let Some(&u) = stack.last() {
        match g.neighbors(u).iter().copied().find(|&w| !visited[w]) {
            Some(w) => {
                visited[w] = true;
                edges.push((u, w));
                stack.push(w);
            }
            None => {
                stack.pop();
            }
        }
    }
    Graph::from_edges(n, &edges).expect("DFS tree spans the graph")
}
