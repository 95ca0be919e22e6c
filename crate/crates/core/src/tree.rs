//! Spanning trees over the block graph and the contiguous partitions obtained
//! by cutting tree edges.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, UnionFind};

/// One weight per graph edge. Comparisons order by weight, then by edge index,
/// so the minimum spanning tree is unique even under floating-point ties.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights(Vec<f64>);

impl EdgeWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("edge weights must be finite".into()));
        }
        Ok(Self(weights))
    }

    /// I.i.d. `Unif(0, 1)` weights.
    pub fn uniform<R: Rng + ?Sized>(graph: &Graph, rng: &mut R) -> Self {
        Self((0..graph.n_edges()).map(|_| rng.random::<f64>()).collect())
    }

    /// `Unif(0, 1/2)` on edges inside a cluster, `Unif(1/2, 1)` on edges
    /// between clusters.
    pub fn stratified<R: Rng + ?Sized>(graph: &Graph, labels: &[usize], rng: &mut R) -> Self {
        Self(
            graph
                .edges()
                .iter()
                .map(|&(a, b)| {
                    let u = 0.5 * rng.random::<f64>();
                    if labels[a] == labels[b] {
                        u
                    } else {
                        0.5 + u
                    }
                })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    weight: f64,
    edge: usize,
    to: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .weight
            .total_cmp(&self.weight)
            .then(other.edge.cmp(&self.edge))
    }
}

/// A spanning tree, stored as the sorted list of graph edge indices it uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningTree {
    n_vertices: usize,
    edges: Vec<usize>,
    endpoints: Vec<(usize, usize)>,
}

impl SpanningTree {
    /// Validates that `edges` form a spanning tree of `graph`.
    pub fn from_edges(graph: &Graph, mut edges: Vec<usize>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        if edges.iter().any(|&e| e >= graph.n_edges()) {
            return Err(Error::Invalid("tree edge index out of range".into()));
        }
        let n = graph.n_vertices();
        if edges.len() + 1 != n.max(1) {
            return Err(Error::Invalid(format!(
                "a spanning tree on {n} vertices needs {} edges, got {}",
                n.saturating_sub(1),
                edges.len()
            )));
        }
        let mut uf = UnionFind::new(n);
        for &e in &edges {
            let (a, b) = graph.edge(e);
            if !uf.union(a, b) {
                return Err(Error::Invalid("tree edges contain a cycle".into()));
            }
        }
        Ok(Self::from_sorted_unchecked(graph, edges))
    }

    fn from_sorted_unchecked(graph: &Graph, edges: Vec<usize>) -> Self {
        let endpoints = edges.iter().map(|&e| graph.edge(e)).collect();
        Self {
            n_vertices: graph.n_vertices(),
            edges,
            endpoints,
        }
    }

    /// Graph edge indices, ascending.
    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Endpoints of the tree edge at position `pos`.
    pub fn endpoints(&self, pos: usize) -> (usize, usize) {
        self.endpoints[pos]
    }

    /// Position of a graph edge within the tree, if present.
    pub fn position(&self, edge: usize) -> Option<usize> {
        self.edges.binary_search(&edge).ok()
    }

    /// Tree adjacency: `(neighbor, tree position)` per vertex.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for (pos, &(a, b)) in self.endpoints.iter().enumerate() {
            adj[a].push((b, pos));
            adj[b].push((a, pos));
        }
        adj
    }
}

/// Prim's algorithm with a binary heap, `O(E log V)`.
pub fn prim_mst(graph: &Graph, weights: &EdgeWeights) -> Result<SpanningTree> {
    let n = graph.n_vertices();
    if weights.0.len() != graph.n_edges() {
        return Err(Error::WeightCount {
            expected: graph.n_edges(),
            got: weights.0.len(),
        });
    }
    if n == 0 {
        return Ok(SpanningTree::from_sorted_unchecked(graph, Vec::new()));
    }
    let mut in_tree = vec![false; n];
    let mut tree_edges = Vec::with_capacity(n - 1);
    let mut heap = BinaryHeap::with_capacity(graph.n_edges());
    let visit = |v: usize, in_tree: &mut [bool], heap: &mut BinaryHeap<HeapEntry>| {
        in_tree[v] = true;
        for &(to, edge) in graph.neighbors(v) {
            if !in_tree[to] {
                heap.push(HeapEntry {
                    weight: weights.0[edge],
                    edge,
                    to,
                });
            }
        }
    };
    visit(0, &mut in_tree, &mut heap);
    while let Some(HeapEntry { edge, to, .. }) = heap.pop() {
        if in_tree[to] {
            continue;
        }
        tree_edges.push(edge);
        visit(to, &mut in_tree, &mut heap);
    }
    if tree_edges.len() + 1 != n {
        return Err(Error::Disconnected {
            sizes: graph.component_sizes(),
        });
    }
    tree_edges.sort_unstable();
    Ok(SpanningTree::from_sorted_unchecked(graph, tree_edges))
}

/// Draws a tree from the random-minimum-spanning-tree prior.
pub fn sample_rst<R: Rng + ?Sized>(graph: &Graph, rng: &mut R) -> Result<SpanningTree> {
    prim_mst(graph, &EdgeWeights::uniform(graph, rng))
}

/// A spanning tree together with a set of cut tree edges. Removing the cut
/// edges leaves `k` connected components, which are the clusters.
///
/// Cluster labels are `0..k`, numbered by the smallest block id they contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePartition {
    tree: SpanningTree,
    adjacency: Vec<Vec<(usize, usize)>>,
    cut: Vec<bool>,
    labels: Vec<usize>,
    k: usize,
}

impl TreePartition {
    /// Partition induced by cutting `cut_set` (graph edge indices) from `tree`.
    pub fn induce(tree: SpanningTree, cut_set: &[usize]) -> Result<Self> {
        let mut cut = vec![false; tree.len()];
        for &e in cut_set {
            let pos = tree.position(e).ok_or(Error::EdgeNotInTree(e))?;
            cut[pos] = true;
        }
        Ok(Self::from_cut_flags(tree, cut))
    }

    /// `cut` holds one flag per tree position.
    pub fn from_cut_flags(tree: SpanningTree, cut: Vec<bool>) -> Self {
        assert_eq!(cut.len(), tree.len());
        let adjacency = tree.adjacency();
        let mut tp = Self {
            labels: vec![usize::MAX; tree.n_vertices()],
            tree,
            adjacency,
            cut,
            k: 0,
        };
        tp.relabel();
        tp
    }

    /// Single cluster over the whole tree.
    pub fn single(tree: SpanningTree) -> Self {
        let cut = vec![false; tree.len()];
        Self::from_cut_flags(tree, cut)
    }

    fn relabel(&mut self) {
        self.labels.fill(usize::MAX);
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.labels.len() {
            if self.labels[start] != usize::MAX {
                continue;
            }
            self.labels[start] = next;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &(w, pos) in &self.adjacency[v] {
                    if !self.cut[pos] && self.labels[w] == usize::MAX {
                        self.labels[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        self.k = next;
    }

    pub fn tree(&self) -> &SpanningTree {
        &self.tree
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Cluster label of every block.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.len()
    }

    pub fn is_cut(&self, pos: usize) -> bool {
        self.cut[pos]
    }

    pub fn cut_flags(&self) -> &[bool] {
        &self.cut
    }

    /// Graph edge indices of the cut edges.
    pub fn cut_set(&self) -> Vec<usize> {
        self.cut_positions().map(|p| self.tree.edges[p]).collect()
    }

    /// Tree positions of cut edges (candidates for merging).
    pub fn cut_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cut.len()).filter(move |&p| self.cut[p])
    }

    /// Tree positions of uncut edges (candidates for splitting).
    pub fn within_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cut.len()).filter(move |&p| !self.cut[p])
    }

    pub fn n_cut(&self) -> usize {
        self.k - 1
    }

    pub fn n_within(&self) -> usize {
        self.tree.len() + 1 - self.k
    }

    /// Tree positions of the `idx`-th uncut edge, counting in position order.
    pub fn nth_within(&self, idx: usize) -> Option<usize> {
        self.within_positions().nth(idx)
    }

    pub fn nth_cut(&self, idx: usize) -> Option<usize> {
        self.cut_positions().nth(idx)
    }

    /// Blocks reachable from `start` without crossing a cut edge or the tree
    /// edge at `blocked`. Returned in ascending order.
    pub fn component_without(&self, start: usize, blocked: usize) -> Vec<usize> {
        let mut seen = vec![false; self.labels.len()];
        let mut out = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < out.len() {
            let v = out[head];
            head += 1;
            for &(w, pos) in &self.adjacency[v] {
                if pos != blocked && !self.cut[pos] && !seen[w] {
                    seen[w] = true;
                    out.push(w);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Toggles the cut flag at tree position `pos` and recomputes labels.
    pub fn toggle(&mut self, pos: usize) {
        self.cut[pos] = !self.cut[pos];
        self.relabel();
    }

    /// Toggles several tree positions, relabelling once.
    pub fn toggle_many(&mut self, positions: &[usize]) {
        for &p in positions {
            self.cut[p] = !self.cut[p];
        }
        self.relabel();
    }

    /// Splits into `(within, between)` graph edge lists: uncut tree edges and
    /// cut tree edges.
    pub fn classify_tree_edges(&self) -> (Vec<usize>, Vec<usize>) {
        let within = self.within_positions().map(|p| self.tree.edges[p]).collect();
        (within, self.cut_set())
    }

    /// Draws a fresh tree that induces the same partition: stratified weights
    /// on every graph edge, then Prim. Labels and `k` are unchanged.
    pub fn resample_tree<R: Rng + ?Sized>(&self, graph: &Graph, rng: &mut R) -> Result<Self> {
        let weights = EdgeWeights::stratified(graph, &self.labels, rng);
        let tree = prim_mst(graph, &weights)?;
        let cut = tree
            .endpoints
            .iter()
            .map(|&(a, b)| self.labels[a] != self.labels[b])
            .collect();
        let next = Self::from_cut_flags(tree, cut);
        debug_assert_eq!(next.labels, self.labels);
        Ok(next)
    }
}

/// Partition induced by cutting `cut_set` (graph edge indices) from `tree`.
pub fn induce_partition(tree: &SpanningTree, cut_set: &[usize]) -> Result<TreePartition> {
    TreePartition::induce(tree.clone(), cut_set)
}

/// Tree resampling step that preserves the current partition.
pub fn resample_tree_given_partition<R: Rng + ?Sized>(
    graph: &Graph,
    state: &TreePartition,
    rng: &mut R,
) -> Result<TreePartition> {
    state.resample_tree(graph, rng)
}
