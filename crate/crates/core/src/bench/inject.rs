use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;

use super::target_count;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{stream, Purpose};

pub const DEFAULT_CANDIDATES: usize = 50;
pub const DEFAULT_CLIQUE_SIZE: usize = 15;

/// Graph with injected anomalies.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    /// Carries `labels` as its label vector.
    pub graph: Graph,
    /// `1` for injected nodes.
    pub labels: Vec<u8>,
    /// Injected nodes in selection order.
    pub targets: Vec<usize>,
    /// Edges that did not exist before (structural only).
    pub added_edges: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Replaces the features of `⌈rate·n⌉` random nodes with the farthest (in
/// Euclidean distance) of `q` random candidates' original features. Ties go
/// to the lowest candidate index.
pub fn inject_contextual(g: &Graph, rate: f64, q: usize, seed: u64) -> Result<Injection> {
    if q == 0 {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "candidate count must be positive",
        )));
    }
    let n = g.num_nodes();
    let count = target_count(rate, n)?;
    let mut rng = stream(seed, Purpose::Injection);
    let targets = sample(&mut rng, n, count).into_vec();
    let original = g.features();
    let mut features = original.clone();
    let mut labels = vec![0u8; n];
    for &t in &targets {
        let candidates = sample(&mut rng, n, q.min(n)).into_vec();
        let mut best = candidates[0];
        let mut best_dist = squared_distance(original.row(t), original.row(best));
        for &c in &candidates[1..] {
            let dist = squared_distance(original.row(t), original.row(c));
            if dist > best_dist || (dist == best_dist && c < best) {
                best = c;
                best_dist = dist;
            }
        }
        features.row_mut(t).copy_from_slice(original.row(best));
        labels[t] = 1;
    }
    let graph = g.with_features(features)?.with_labels(Some(labels.clone()))?;
    Ok(Injection {
        graph,
        labels,
        targets,
        added_edges: 0,
    })
}

/// Splits `len` nodes into groups of `m`; a trailing single node joins the
/// previous group.
fn clique_groups(len: usize, m: usize) -> Result<Vec<(usize, usize)>> {
    let mut groups = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + m).min(len);
        groups.push((start, end));
        start = end;
    }
    if let Some(&(s, e)) = groups.last() {
        if e - s == 1 {
            groups.pop();
            match groups.last_mut() {
                Some(prev) => prev.1 = e,
                None => {
                    return Err(Error::InvalidParameter(alloc::string::String::from(
                        "a single selected node cannot form a clique",
                    )))
                }
            }
        }
    }
    Ok(groups)
}

/// Connects `⌈rate·n⌉` random nodes into cliques of `m`.
pub fn inject_structural(g: &Graph, rate: f64, m: usize, seed: u64) -> Result<Injection> {
    let n = g.num_nodes();
    if m < 2 || m > n {
        return Err(Error::InvalidParameter(format!("clique size {m} must lie in 2..={n}")));
    }
    let count = target_count(rate, n)?;
    let mut rng = stream(seed, Purpose::Injection);
    let targets = sample(&mut rng, n, count).into_vec();
    let mut extra = Vec::new();
    for (s, e) in clique_groups(targets.len(), m)? {
        let group = &targets[s..e];
        for (i, &u) in group.iter().enumerate() {
            for &v in &group[i + 1..] {
                extra.push((u, v));
            }
        }
    }
    let (with_edges, added_edges) = g.with_added_edges(&extra)?;
    let mut labels = vec![0u8; n];
    for &t in &targets {
        labels[t] = 1;
    }
    let graph = with_edges.with_labels(Some(labels.clone()))?;
    Ok(Injection {
        graph,
        labels,
        targets,
        added_edges,
    })
}
