#![allow(dead_code)]

use grasped_core::rng::{stream, Purpose};
use grasped_core::{Graph, Matrix};
use rand::Rng;

/// Erdős–Rényi graph with standard-normal features.
pub fn random_graph(n: usize, d: usize, p: f64, seed: u64) -> Graph {
    let mut rng = stream(seed, Purpose::Synthetic);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    Graph::build_undirected(&edges, n, x, None).unwrap()
}

/// Ring with chords, so every node has degree at least 2.
pub fn connected_graph(n: usize, d: usize, extra: f64, seed: u64) -> Graph {
    let g = random_graph(n, d, extra, seed);
    let ring: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    g.with_added_edges(&ring).unwrap().0
}
