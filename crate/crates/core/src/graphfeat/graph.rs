use crate::corpus::{InvocationMatrix, Repository};

/// Undirected graph as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjGraph {
    adj: Vec<Vec<usize>>,
}

impl AdjGraph {
    /// Builds from an edge list; duplicate edges and self-loops are dropped.
    pub fn from_edges(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n_nodes];
        for (a, b) in edges {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        Self { adj }
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Mashup and service nodes joined by invocation edges. Mashup `m` is node
/// `m`; service `s` is node `n_mashups + s`.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    pub graph: AdjGraph,
    pub n_mashups: usize,
    pub n_services: usize,
}

impl BipartiteGraph {
    pub fn mashup_node(&self, m: usize) -> usize {
        m
    }

    pub fn service_node(&self, s: usize) -> usize {
        self.n_mashups + s
    }

    /// Dump names: `m:<id>` for mashups and `s:<id>` for services.
    pub fn node_names(&self, repo: &Repository) -> Vec<String> {
        repo.mashups()
            .iter()
            .map(|m| format!("m:{}", m.id))
            .chain(repo.services().iter().map(|s| format!("s:{}", s.id)))
            .collect()
    }
}

/// One edge per one-entry of the matrix.
pub fn build_graph(matrix: &InvocationMatrix) -> BipartiteGraph {
    let n_m = matrix.n_mashups();
    let graph = AdjGraph::from_edges(n_m + matrix.n_services(), matrix.entries().map(|(m, s)| (m, n_m + s)));
    BipartiteGraph { graph, n_mashups: n_m, n_services: matrix.n_services() }
}
