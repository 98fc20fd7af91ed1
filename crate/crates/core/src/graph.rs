//! Social graph ingestion and the graph-derived matrices that drive the
//! opinion dynamics: per-agent star Laplacians `L_i`, the global Laplacian
//! `L = sum_i L_i`, and the dynamics matrix `Lambda = D^-1 A - I`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ZACHARY_EDGES: &str = include_str!("../data/zachary_karate_club.edges");

/// How vertex labels in an edge-list document are numbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indexing {
    OneBased,
    ZeroBased,
}

/// A simple, undirected, connected graph over agents `0..n`.
///
/// Construction validates simplicity (no self-loops, no duplicate edges),
/// connectivity, and that every agent has at least one neighbor, so all
/// downstream matrix builders can assume those invariants.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl SocialGraph {
    /// Builds a graph from zero-based edge pairs and validates all invariants.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "graph must have at least one agent".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop { agent: a });
            }
            let hi = a.max(b);
            if hi >= n {
                return Err(Error::AgentOutOfRange { index: hi, n });
            }
            let key = (a.min(b), hi);
            if !seen.insert(key) {
                return Err(Error::DuplicateEdge { a: key.0, b: key.1 });
            }
            normalized.push(key);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nbrs in &mut neighbors {
            nbrs.sort_unstable();
        }
        if let Some(agent) = neighbors.iter().position(|nbrs| nbrs.is_empty()) {
            return Err(Error::IsolatedAgent { agent });
        }
        if !connected(n, &normalized) {
            return Err(Error::Disconnected);
        }
        normalized.sort_unstable();
        Ok(SocialGraph {
            n,
            edges: normalized,
            neighbors,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Normalized edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// The neighbor set of agent `i`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.neighbors
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::AgentOutOfRange {
                index: i,
                n: self.n,
            })
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.neighbors(i).map(<[usize]>::len)
    }
}

/// Parses an edge-list document: one edge per line as two whitespace-separated
/// integers, `#`-prefixed comment lines, blank lines ignored. The agent count
/// is the largest label seen (labels are normalized to zero-based internally).
pub fn load_edge_list(text: &str, indexing: Indexing) -> Result<SocialGraph> {
    let mut edges = Vec::new();
    let mut max_label = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| Error::EdgeListParse {
                line: lineno + 1,
                message: "expected two integers".into(),
            })?;
            tok.parse::<usize>().map_err(|_| Error::EdgeListParse {
                line: lineno + 1,
                message: format!("invalid agent label '{tok}'"),
            })
        };
        let a = parse(tokens.next())?;
        let b = parse(tokens.next())?;
        if tokens.next().is_some() {
            return Err(Error::EdgeListParse {
                line: lineno + 1,
                message: "expected exactly two integers per edge".into(),
            });
        }
        let (a, b) = match indexing {
            Indexing::OneBased => {
                if a == 0 || b == 0 {
                    return Err(Error::EdgeListParse {
                        line: lineno + 1,
                        message: "label 0 in a one-based edge list".into(),
                    });
                }
                (a - 1, b - 1)
            }
            Indexing::ZeroBased => (a, b),
        };
        max_label = max_label.max(a).max(b);
        edges.push((a, b));
    }
    if edges.is_empty() {
        return Err(Error::InvalidConfig("edge list contains no edges".into()));
    }
    SocialGraph::from_edges(max_label + 1, &edges)
}

/// The bundled Zachary's Karate Club network: 34 members, 78 friendships.
pub fn zachary_karate_club() -> SocialGraph {
    load_edge_list(ZACHARY_EDGES, Indexing::OneBased).expect("bundled Zachary edge list is valid")
}

/// The Laplacian of the star subgraph of edges incident to agent `i`:
/// diagonal `|N_i|` at `i`, `1` at each neighbor, `-1` on the incident
/// off-diagonal pairs. Its quadratic form is agent `i`'s sum of squared
/// disagreements: `x^T L_i x = sum_{j in N_i} (x_i - x_j)^2`.
pub fn agent_laplacian(g: &SocialGraph, i: usize) -> Result<DMatrix<f64>> {
    let n = g.agent_count();
    let nbrs = g.neighbors(i)?;
    let mut l = DMatrix::zeros(n, n);
    l[(i, i)] = nbrs.len() as f64;
    for &j in nbrs {
        l[(j, j)] = 1.0;
        l[(i, j)] = -1.0;
        l[(j, i)] = -1.0;
    }
    Ok(l)
}

/// The generator of the uncontrolled opinion flow, `Lambda = D^-1 A - I`,
/// where `A` is the 0/1 adjacency and `D = diag(|N_1|, ..., |N_n|)`.
/// Row sums are zero, so consensus vectors lie in its kernel.
pub fn dynamics_matrix(g: &SocialGraph) -> DMatrix<f64> {
    let n = g.agent_count();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let nbrs = g.neighbors(i).expect("valid index");
        let inv_deg = 1.0 / nbrs.len() as f64;
        for &j in nbrs {
            m[(i, j)] = inv_deg;
        }
        m[(i, i)] = -1.0;
    }
    m
}

/// `L = sum_i L_i`: each edge is counted once in each endpoint's star
/// Laplacian, so this equals twice the standard graph Laplacian.
pub fn global_laplacian(g: &SocialGraph) -> DMatrix<f64> {
    let n = g.agent_count();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        l += agent_laplacian(g, i).expect("valid index");
    }
    l
}

/// All graph-derived matrices, assembled once.
#[derive(Debug, Clone)]
pub struct GraphMatrices {
    pub adjacency: DMatrix<f64>,
    pub degree: DMatrix<f64>,
    pub agent_laplacians: Vec<DMatrix<f64>>,
    pub global_laplacian: DMatrix<f64>,
    pub dynamics: DMatrix<f64>,
}

impl GraphMatrices {
    pub fn from_graph(g: &SocialGraph) -> Self {
        let n = g.agent_count();
        let mut adjacency = DMatrix::zeros(n, n);
        let mut degree = DMatrix::zeros(n, n);
        for &(a, b) in g.edges() {
            adjacency[(a, b)] = 1.0;
            adjacency[(b, a)] = 1.0;
        }
        for i in 0..n {
            degree[(i, i)] = g.degree(i).expect("valid index") as f64;
        }
        let agent_laplacians: Vec<_> = (0..n)
            .map(|i| agent_laplacian(g, i).expect("valid index"))
            .collect();
        let mut global = DMatrix::zeros(n, n);
        for l in &agent_laplacians {
            global += l;
        }
        GraphMatrices {
            adjacency,
            degree,
            agent_laplacians,
            global_laplacian: global,
            dynamics: dynamics_matrix(g),
        }
    }
}

/// Opinion spread: `max(x) - min(x)`, the scalar behind all consensus claims.
pub fn spread(x: &DVector<f64>) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in x.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    // Union-find over the edge set.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        parent[ra] = rb;
    }
    let root = find(&mut parent, 0);
    (1..n).all(|i| find(&mut parent, i) == root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p3() -> SocialGraph {
        SocialGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    fn k2() -> SocialGraph {
        SocialGraph::from_edges(2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn minimal_one_based_edge_list() {
        let g = load_edge_list("1 2", Indexing::OneBased).unwrap();
        assert_eq!(g.agent_count(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn zero_based_edge_list() {
        let g = load_edge_list("0 1\n1 2", Indexing::ZeroBased).unwrap();
        assert_eq!(g.agent_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(matches!(
            load_edge_list("0 1", Indexing::OneBased).unwrap_err(),
            Error::EdgeListParse { line: 1, .. }
        ));
    }

    #[test]
    fn path_graph_neighbors() {
        let g = load_edge_list("1 2\n2 3", Indexing::OneBased).unwrap();
        assert_eq!(g.neighbors(1).unwrap(), &[0, 2]);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let g = load_edge_list("# header\n\n1 2\n  # more\n2 3\n", Indexing::OneBased).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn disconnected_rejected() {
        let err = load_edge_list("1 2\n3 4", Indexing::OneBased).unwrap_err();
        assert!(matches!(err, Error::Disconnected));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = load_edge_list("1 2\n2 x", Indexing::OneBased).unwrap_err();
        match err {
            Error::EdgeListParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn self_loop_and_duplicate_rejected() {
        assert!(matches!(
            load_edge_list("1 1", Indexing::OneBased).unwrap_err(),
            Error::SelfLoop { agent: 0 }
        ));
        assert!(matches!(
            load_edge_list("1 2\n2 1", Indexing::OneBased).unwrap_err(),
            Error::DuplicateEdge { a: 0, b: 1 }
        ));
    }

    #[test]
    fn zachary_has_standard_shape() {
        let g = zachary_karate_club();
        assert_eq!(g.agent_count(), 34);
        assert_eq!(g.edge_count(), 78);
        assert!((0..34).all(|i| g.degree(i).unwrap() >= 1));
    }

    #[test]
    fn zachary_hub_degree_matches_raw_incidence_count() {
        // Independent oracle: count incidences of label 34 in the raw text.
        let raw_count = ZACHARY_EDGES
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .flat_map(str::split_whitespace)
            .filter(|tok| *tok == "34")
            .count();
        assert_eq!(raw_count, 17);
        assert_eq!(zachary_karate_club().degree(33).unwrap(), 17);
    }

    #[test]
    fn star_laplacian_center_of_path() {
        let l = agent_laplacian(&p3(), 1).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(l, expected);
    }

    #[test]
    fn star_laplacian_leaf_of_path() {
        let l = agent_laplacian(&p3(), 0).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(l, expected);
    }

    #[test]
    fn star_laplacian_annihilates_ones() {
        let g = zachary_karate_club();
        let ones = DVector::from_element(34, 1.0);
        for i in 0..34 {
            let l = agent_laplacian(&g, i).unwrap();
            assert_abs_diff_eq!((&l * &ones).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn agent_laplacian_rejects_bad_index() {
        assert!(matches!(
            agent_laplacian(&k2(), 5).unwrap_err(),
            Error::AgentOutOfRange { index: 5, n: 2 }
        ));
    }

    #[test]
    fn dynamics_matrix_k2_and_p3() {
        let expected_k2 = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(dynamics_matrix(&k2()), expected_k2);
        let expected_p3 =
            DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.5, -1.0, 0.5, 0.0, 1.0, -1.0]);
        assert_eq!(dynamics_matrix(&p3()), expected_p3);
    }

    #[test]
    fn dynamics_matrix_rows_sum_to_zero() {
        let m = dynamics_matrix(&zachary_karate_club());
        for i in 0..34 {
            assert_abs_diff_eq!(m.row(i).sum(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn global_laplacian_small_graphs() {
        let expected_k2 = DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]);
        assert_eq!(global_laplacian(&k2()), expected_k2);
        let expected_p3 =
            DMatrix::from_row_slice(3, 3, &[2.0, -2.0, 0.0, -2.0, 4.0, -2.0, 0.0, -2.0, 2.0]);
        assert_eq!(global_laplacian(&p3()), expected_p3);
    }

    #[test]
    fn global_laplacian_is_entrywise_sum_of_agent_laplacians() {
        let g = zachary_karate_club();
        let mats = GraphMatrices::from_graph(&g);
        let mut acc = DMatrix::zeros(34, 34);
        for l in &mats.agent_laplacians {
            acc += l;
        }
        assert_eq!(acc, mats.global_laplacian);
        assert_eq!(mats.global_laplacian, global_laplacian(&g));
    }
}
