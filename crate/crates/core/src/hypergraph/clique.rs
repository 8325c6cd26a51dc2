use std::collections::BTreeSet;

use super::Hypergraph;
use crate::sparse::Csr;

/// Undirected simple graph: pairs `(u, v)` with `u < v`, sorted, no
/// duplicates or self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainGraph {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl PlainGraph {
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Row-normalised neighbour-mean operator.
    pub fn mean_adjacency(&self) -> Csr {
        Csr::mean_of_neighbors(&self.neighbors())
    }
}

/// Replaces every hyperedge with a clique over its members.
pub fn clique_expansion(h: &Hypergraph) -> PlainGraph {
    let mut edges = BTreeSet::new();
    for edge in h.hyperedges() {
        for (a, &u) in edge.members.iter().enumerate() {
            for &v in &edge.members[a + 1..] {
                if u != v {
                    edges.insert((u.min(v), u.max(v)));
                }
            }
        }
    }
    PlainGraph {
        n_nodes: h.n_nodes(),
        edges: edges.into_iter().collect(),
    }
}
