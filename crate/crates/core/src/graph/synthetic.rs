//! Tree and double-ring generators for the synthetic anomaly task.
//!
//! Normal graphs are binary trees (label 0); anomalies are two cycles glued
//! at a single articulation node (label 1). Node features are the adjacency
//! matrix of each graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::graph::{default_node_features, FeaturePolicy, Graph, GraphDataset};

pub const NORMAL_LABEL: i64 = 0;
pub const ANOMALY_LABEL: i64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    /// Deterministic layout: heap-ordered trees, rings split as evenly as possible.
    Canonical,
    #[default]
    Random,
}

fn finish(n: usize, edges: Vec<(usize, usize)>, label: i64) -> Result<Graph> {
    let g = Graph::from_edges(n, edges)?.with_label(Some(label));
    Ok(default_node_features(&g, FeaturePolicy::Adjacency))
}

/// Binary tree on `num_nodes` nodes.
///
/// Canonical wiring gives node `k` the parent `(k - 1) / 2`. Random wiring
/// attaches node `k` to a uniformly chosen earlier node that still has fewer
/// than two children.
pub fn gen_binary_tree<R: Rng + ?Sized>(num_nodes: usize, rng: &mut R, wiring: Wiring) -> Result<Graph> {
    if num_nodes == 0 {
        return Err(GramError::Domain("binary tree needs at least one node".into()));
    }
    let mut edges = Vec::with_capacity(num_nodes - 1);
    match wiring {
        Wiring::Canonical => {
            for k in 1..num_nodes {
                edges.push(((k - 1) / 2, k));
            }
        }
        Wiring::Random => {
            let mut children = vec![0u8; num_nodes];
            let mut open: Vec<usize> = vec![0];
            for k in 1..num_nodes {
                let slot = rng.random_range(0..open.len());
                let parent = open[slot];
                edges.push((parent, k));
                children[parent] += 1;
                if children[parent] == 2 {
                    open.swap_remove(slot);
                }
                open.push(k);
            }
        }
    }
    finish(num_nodes, edges, NORMAL_LABEL)
}

/// Two simple cycles sharing exactly one node.
///
/// The first ring is `0..r1` and closes on node `r1 - 1`, which also starts
/// the second ring `r1-1, r1, …, n-1`. Canonical wiring uses
/// `r1 = (n + 1) / 2`; random wiring draws `r1` uniformly so both rings keep
/// at least three nodes.
pub fn gen_double_ring<R: Rng + ?Sized>(num_nodes: usize, rng: &mut R, wiring: Wiring) -> Result<Graph> {
    if num_nodes < 5 {
        return Err(GramError::Domain(format!(
            "double ring needs at least 5 nodes, got {num_nodes}"
        )));
    }
    let total = num_nodes + 1;
    let first = match wiring {
        Wiring::Canonical => total / 2,
        Wiring::Random => rng.random_range(3..=total - 3),
    };
    let hub = first - 1;
    let mut edges = Vec::with_capacity(num_nodes + 1);
    for k in 0..hub {
        edges.push((k, k + 1));
    }
    edges.push((hub, 0));
    for k in hub..num_nodes - 1 {
        edges.push((k, k + 1));
    }
    edges.push((num_nodes - 1, hub));
    finish(num_nodes, edges, ANOMALY_LABEL)
}

/// `count_per_class` trees followed by `count_per_class` double rings with
/// node counts drawn uniformly from `min_nodes..=max_nodes`.
pub fn make_synthetic_dataset<R: Rng + ?Sized>(
    count_per_class: usize,
    min_nodes: usize,
    max_nodes: usize,
    rng: &mut R,
    wiring: Wiring,
) -> Result<GraphDataset> {
    if count_per_class == 0 {
        return Err(GramError::Domain("count_per_class must be positive".into()));
    }
    if min_nodes < 5 || min_nodes > max_nodes {
        return Err(GramError::Domain(format!(
            "invalid node count interval [{min_nodes}, {max_nodes}] (need 5 <= min <= max)"
        )));
    }
    let mut graphs = Vec::with_capacity(2 * count_per_class);
    for _ in 0..count_per_class {
        let n = rng.random_range(min_nodes..=max_nodes);
        graphs.push(gen_binary_tree(n, rng, wiring)?);
    }
    for _ in 0..count_per_class {
        let n = rng.random_range(min_nodes..=max_nodes);
        graphs.push(gen_double_ring(n, rng, wiring)?);
    }
    GraphDataset::new("synthetic", graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Union-find check: n-1 edges, no cycle closed, one component.
    fn is_tree(g: &Graph) -> bool {
        let mut parent: Vec<usize> = (0..g.num_nodes()).collect();
        fn root(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in g.edges() {
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        g.num_edges() + 1 == g.num_nodes()
    }

    fn max_children(g: &Graph) -> usize {
        // Node 0 is the root and every edge points from an earlier node to a later one.
        let mut c = vec![0; g.num_nodes()];
        for &(a, _) in g.edges() {
            c[a] += 1;
        }
        c.into_iter().max().unwrap_or(0)
    }

    #[test]
    fn canonical_seven_node_tree() {
        let g = gen_binary_tree(7, &mut ChaCha8Rng::seed_from_u64(0), Wiring::Canonical).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)]);
        assert!(g.has_adjacency_features());
        assert_eq!(g.label(), Some(0));
    }

    #[test]
    fn single_node_tree_has_no_edges() {
        let g = gen_binary_tree(1, &mut ChaCha8Rng::seed_from_u64(0), Wiring::Random).unwrap();
        assert_eq!(g.num_edges(), 0);
        assert!(gen_binary_tree(0, &mut ChaCha8Rng::seed_from_u64(0), Wiring::Random).is_err());
    }

    #[test]
    fn random_trees_are_binary_trees() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for n in 1..=64 {
                let g = gen_binary_tree(n, &mut rng, Wiring::Random).unwrap();
                assert!(is_tree(&g) && g.is_connected(), "seed {seed} n {n}");
                assert!(max_children(&g) <= 2);
            }
        }
        let g = gen_binary_tree(7, &mut ChaCha8Rng::seed_from_u64(42), Wiring::Random).unwrap();
        assert_eq!(g.num_edges(), 6);
        assert!(is_tree(&g));
    }

    #[test]
    fn canonical_seven_node_double_ring() {
        let g = gen_double_ring(7, &mut ChaCha8Rng::seed_from_u64(0), Wiring::Canonical).unwrap();
        assert_eq!(g.num_edges(), 8);
        assert_eq!(g.degrees(), vec![2, 2, 2, 4, 2, 2, 2]);
        let mut e = g.edges().to_vec();
        e.sort();
        assert_eq!(e, vec![(0, 1), (0, 3), (1, 2), (2, 3), (3, 4), (3, 6), (4, 5), (5, 6)]);
    }

    #[test]
    fn canonical_six_node_double_ring_is_triangle_plus_square() {
        let g = gen_double_ring(6, &mut ChaCha8Rng::seed_from_u64(0), Wiring::Canonical).unwrap();
        let mut e = g.edges().to_vec();
        e.sort();
        assert_eq!(e, vec![(0, 1), (0, 2), (1, 2), (2, 3), (2, 5), (3, 4), (4, 5)]);
        assert!(gen_double_ring(4, &mut ChaCha8Rng::seed_from_u64(0), Wiring::Canonical).is_err());
    }

    #[test]
    fn random_double_rings_have_one_hub() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 5..40 {
            for _ in 0..5 {
                let g = gen_double_ring(n, &mut rng, Wiring::Random).unwrap();
                let deg = g.degrees();
                assert_eq!(g.num_edges(), n + 1);
                assert_eq!(deg.iter().filter(|&&d| d == 4).count(), 1);
                assert!(deg.iter().all(|&d| d == 2 || d == 4));
                assert!(g.is_connected());
            }
        }
    }

    #[test]
    fn dataset_cardinality_and_determinism() {
        let make = |seed| {
            make_synthetic_dataset(100, 7, 15, &mut ChaCha8Rng::seed_from_u64(seed), Wiring::Random).unwrap()
        };
        let ds = make(9);
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.graphs().iter().filter(|g| g.label() == Some(0)).count(), 100);
        assert!(ds.graphs().iter().all(|g| (7..=15).contains(&g.num_nodes())));
        assert_eq!(ds, make(9));
        assert!(make_synthetic_dataset(1, 4, 9, &mut ChaCha8Rng::seed_from_u64(0), Wiring::Random).is_err());
        assert!(make_synthetic_dataset(1, 9, 8, &mut ChaCha8Rng::seed_from_u64(0), Wiring::Random).is_err());
    }

    #[test]
    fn canonical_pair_is_the_reference_figure() {
        let ds = make_synthetic_dataset(1, 7, 7, &mut ChaCha8Rng::seed_from_u64(1), Wiring::Canonical).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ds.graphs()[0], gen_binary_tree(7, &mut rng, Wiring::Canonical).unwrap());
        assert_eq!(ds.graphs()[1], gen_double_ring(7, &mut rng, Wiring::Canonical).unwrap());
    }
}
