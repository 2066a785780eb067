//! Communication graphs between agents and the mixing matrices built on them.

mod mixing;

pub use mixing::{laplacian_weights, spectral_gap, validate_mixing, MixingCheck, MixingMatrix, MixingReport};

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::rng::{derive_seed, rng_from_seed, Stream};

/// Resampling cap for connected Erdős–Rényi draws.
pub const MAX_CONNECTIVITY_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("no connected sample after {attempts} attempts (n = {n}, p = {p}); p is too small for n")]
    ConnectivityFailure { n: usize, p: f64, attempts: usize },
    #[error("invalid graph parameters: {0}")]
    InvalidParameters(String),
    #[error("graph is not connected")]
    Disconnected,
    #[error("edge ({0}, {1}) is invalid: {2}")]
    InvalidEdge(usize, usize, &'static str),
    #[error("power iteration did not converge within {0} steps")]
    NonConvergence(usize),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected simple graph on agents `0..n`. Edges are stored once as `(i, j)`
/// with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Duplicate pairs (in either
    /// orientation) collapse to one edge; self-loops and out-of-range endpoints
    /// are rejected.
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, TopologyError> {
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(TopologyError::InvalidEdge(a, b, "self-loop"));
            }
            if a >= n || b >= n {
                return Err(TopologyError::InvalidEdge(a, b, "endpoint out of range"));
            }
            edges.insert((a.min(b), a.max(b)));
        }
        Ok(Graph { n, edges })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Graph { n, edges }
    }

    pub fn path(n: usize) -> Self {
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        Graph { n, edges }
    }

    pub fn ring(n: usize) -> Self {
        let mut g = Graph::path(n);
        if n > 2 {
            g.edges.insert((0, n - 1));
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Breadth-first reachability from agent 0.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.n
    }

    /// Edge-list text: first line `n`, then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (a, b) in self.edges() {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(TopologyError::Parse {
            line: 1,
            msg: "missing node count".into(),
        })?;
        let n: usize = header.parse().map_err(|_| TopologyError::Parse {
            line,
            msg: format!("expected node count, found {header:?}"),
        })?;
        let mut pairs = Vec::new();
        for (line, l) in lines {
            let parsed: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| TopologyError::Parse {
                    line,
                    msg: format!("expected `i j`, found {l:?}"),
                })?;
            match parsed.as_slice() {
                [a, b] => pairs.push((*a, *b)),
                _ => {
                    return Err(TopologyError::Parse {
                        line,
                        msg: format!("expected two indices, found {l:?}"),
                    })
                }
            }
        }
        Graph::new(n, pairs)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        Graph::parse_edge_list(&fs::read_to_string(path)?)
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<(), TopologyError> {
        fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// Samples a connected G(n, p) graph. Disconnected draws are discarded and
/// redrawn from a derived sub-seed.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph, TopologyError> {
    if n < 2 {
        return Err(TopologyError::InvalidParameters(format!("need n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(TopologyError::InvalidParameters(format!("need 0 < p <= 1, got {p}")));
    }
    for attempt in 0..MAX_CONNECTIVITY_ATTEMPTS {
        let mut rng = rng_from_seed(derive_seed(seed, Stream::Resample, attempt as u64));
        let mut edges = BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.insert((i, j));
                }
            }
        }
        let g = Graph { n, edges };
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(TopologyError::ConnectivityFailure {
        n,
        p,
        attempts: MAX_CONNECTIVITY_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Depth-first reachability written separately from `is_connected`.
    fn dfs_connected(g: &Graph) -> bool {
        let mut seen = vec![false; g.n()];
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            for (a, b) in g.edges() {
                if a == v && !seen[b] {
                    stack.push(b);
                }
                if b == v && !seen[a] {
                    stack.push(a);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    #[test]
    fn two_nodes_full_probability() {
        let g = gen_erdos_renyi(2, 1.0, 99).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn complete_k4_when_p_is_one() {
        let g = gen_erdos_renyi(4, 1.0, 5).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert_eq!(g, Graph::complete(4));
    }

    #[test]
    fn thirty_one_agent_graph_is_connected() {
        for seed in 0..20 {
            let g = gen_erdos_renyi(31, 0.3, seed).unwrap();
            assert!(dfs_connected(&g), "seed {seed}");
            assert!(g.edges().all(|(a, b)| a < b && b < 31));
        }
    }

    #[test]
    fn same_seed_same_graph() {
        assert_eq!(gen_erdos_renyi(20, 0.2, 3).unwrap(), gen_erdos_renyi(20, 0.2, 3).unwrap());
    }

    #[test]
    fn tiny_probability_hits_cap() {
        let err = gen_erdos_renyi(60, 1e-6, 1).unwrap_err();
        assert!(matches!(err, TopologyError::ConnectivityFailure { attempts: 10_000, .. }));
    }

    #[test]
    fn bad_parameters() {
        assert!(gen_erdos_renyi(1, 0.5, 0).is_err());
        assert!(gen_erdos_renyi(5, 0.0, 0).is_err());
        assert!(gen_erdos_renyi(5, 1.5, 0).is_err());
    }

    #[test]
    fn graph_rejects_self_loops_and_dedups() {
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        let g = Graph::new(3, [(0, 1), (1, 0), (2, 1)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.has_edge(1, 0) && g.has_edge(1, 2));
    }

    #[test]
    fn edge_list_roundtrip() {
        let g = gen_erdos_renyi(12, 0.4, 8).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("12\n"));
        assert_eq!(Graph::parse_edge_list(&text).unwrap(), g);
    }

    #[test]
    fn edge_list_errors_carry_line() {
        match Graph::parse_edge_list("3\n0 1\n1 x\n") {
            Err(TopologyError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Graph::parse_edge_list("").is_err());
        assert!(Graph::parse_edge_list("3\n0 1 2\n").is_err());
    }

    #[test]
    fn ring_and_path_connectivity() {
        assert!(Graph::ring(5).is_connected());
        assert_eq!(Graph::ring(5).edge_count(), 5);
        let split = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!split.is_connected());
    }
}
