//! Undirected simple graphs with indexed edges, plus a disjoint-set forest.

/// An undirected graph whose edges carry stable indices.
///
/// Edges are stored with the smaller endpoint first. Adjacency lists hold
/// `(neighbor, edge index)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph from an edge list. Endpoints are normalized so that
    /// `a < b`; self-loops and out-of-range endpoints panic.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); n_vertices];
        let edges: Vec<(usize, usize)> = edges
            .into_iter()
            .enumerate()
            .map(|(idx, (a, b))| {
                assert!(a != b, "self-loop at vertex {a}");
                assert!(a < n_vertices && b < n_vertices, "edge ({a}, {b}) out of range");
                adjacency[a].push((b, idx));
                adjacency[b].push((a, idx));
                (a.min(b), a.max(b))
            })
            .collect();
        Self {
            n_vertices,
            edges,
            adjacency,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> (usize, usize) {
        self.edges[idx]
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// Sizes of the connected components, ordered by smallest member vertex.
    pub fn component_sizes(&self) -> Vec<usize> {
        let labels = self.component_labels();
        let n_comp = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; n_comp];
        for &l in &labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Component label for every vertex, numbered by smallest member vertex.
    pub fn component_labels(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.n_vertices);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        let mut root_label = vec![usize::MAX; self.n_vertices];
        let mut next = 0;
        (0..self.n_vertices)
            .map(|v| {
                let r = uf.find(v);
                if root_label[r] == usize::MAX {
                    root_label[r] = next;
                    next += 1;
                }
                root_label[r]
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.n_vertices <= 1 || self.component_sizes().len() == 1
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}
