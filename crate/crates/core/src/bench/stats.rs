use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Per-node mean absolute feature difference to neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSimilarity {
    /// `None` for isolated nodes.
    pub per_node: Vec<Option<f64>>,
}

impl NeighborhoodSimilarity {
    /// Mean over the nodes of one class that have neighbors; `NaN` if none do.
    pub fn class_mean(&self, labels: &[u8], class: u8) -> f64 {
        let (sum, count) = self
            .per_node
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .filter_map(|(v, _)| *v)
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            f64::NAN
        } else {
            sum / count as f64
        }
    }
}

/// `N_sim(v)`: mean over neighbors `u` of `(1/d) Σ_i |x_v,i − x_u,i|`, on raw
/// features.
pub fn neighborhood_similarity(g: &Graph) -> NeighborhoodSimilarity {
    let x = g.features();
    let d = g.feature_dim().max(1) as f64;
    let per_node = (0..g.num_nodes())
        .map(|v| {
            let nbrs = g.neighbors(v);
            if nbrs.is_empty() {
                return None;
            }
            let total: f64 = nbrs
                .iter()
                .map(|&u| x.row(v).iter().zip(x.row(u)).map(|(a, b)| (a - b).abs()).sum::<f64>() / d)
                .sum();
            Some(total / nbrs.len() as f64)
        })
        .collect();
    NeighborhoodSimilarity { per_node }
}

/// Mean undirected degree over `nodes`.
pub fn average_degree(g: &Graph, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut sum = 0usize;
    for &v in nodes {
        if v >= g.num_nodes() {
            return Err(Error::NodeOutOfRange {
                index: v,
                n: g.num_nodes(),
            });
        }
        sum += g.degree(v);
    }
    Ok(sum as f64 / nodes.len() as f64)
}

/// `(x_a − x_n)/x_n`, or `None` when `x_n` is not positive.
pub fn relative_delta(normal: f64, anomaly: f64) -> Option<f64> {
    (normal > 0.0).then(|| (anomaly - normal) / normal)
}

/// Class-wise neighborhood similarity and degree with signed deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub n_sim_normal: f64,
    pub n_sim_anomaly: f64,
    pub deg_normal: f64,
    pub deg_anomaly: f64,
    pub delta_nsim: Option<f64>,
    pub delta_deg: Option<f64>,
}

impl DatasetStats {
    pub fn compute(g: &Graph) -> Result<Self> {
        let labels = g
            .labels()
            .ok_or_else(|| Error::InvalidParameter(String::from("dataset statistics need anomaly labels")))?;
        let normal: Vec<usize> = (0..g.num_nodes()).filter(|&v| labels[v] == 0).collect();
        let anomaly: Vec<usize> = (0..g.num_nodes()).filter(|&v| labels[v] == 1).collect();
        if normal.is_empty() || anomaly.is_empty() {
            return Err(Error::SingleClass);
        }
        let sim = neighborhood_similarity(g);
        let n_sim_normal = sim.class_mean(labels, 0);
        let n_sim_anomaly = sim.class_mean(labels, 1);
        let deg_normal = average_degree(g, &normal)?;
        let deg_anomaly = average_degree(g, &anomaly)?;
        Ok(Self {
            n_sim_normal,
            n_sim_anomaly,
            deg_normal,
            deg_anomaly,
            delta_nsim: relative_delta(n_sim_normal, n_sim_anomaly),
            delta_deg: relative_delta(deg_normal, deg_anomaly),
        })
    }
}
