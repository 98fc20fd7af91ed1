//! Seeded graph fixtures for tests and probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::SocialGraph;

/// A random connected graph on `n >= 2` agents: a random spanning tree plus
/// up to `extra_edges` additional distinct edges. Deterministic in the seed.
pub fn random_connected_graph(n: usize, extra_edges: usize, seed: u64) -> SocialGraph {
    assert!(n >= 2, "need at least two agents");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n - 1 + extra_edges);
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    let mut have: std::collections::HashSet<(usize, usize)> =
        edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut added = 0;
    for _ in 0..10 * extra_edges.max(1) {
        if added >= extra_edges {
            break;
        }
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if have.insert(key) {
            edges.push(key);
            added += 1;
        }
    }
    SocialGraph::from_edges(n, &edges).expect("tree plus extra edges is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_graphs_are_valid_and_reproducible() {
        for seed in 0..20 {
            let g = random_connected_graph(2 + (seed as usize % 11), 4, seed);
            assert!(g.agent_count() >= 2);
            let again = random_connected_graph(2 + (seed as usize % 11), 4, seed);
            assert_eq!(g.edges(), again.edges());
        }
    }
}
