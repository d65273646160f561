use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::rng::{substream, Purpose};

/// Stochastic block model with Gaussian community features.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub feature_dim: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Standard deviation of each community mean coordinate.
    pub mean_scale: f64,
    pub noise_std: f64,
    /// Scale every feature row to unit Euclidean norm.
    pub normalize_rows: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 500,
            feature_dim: 16,
            communities: 4,
            p_in: 0.2,
            p_out: 0.01,
            mean_scale: 1.0,
            noise_std: 1.0,
            normalize_rows: false,
            seed: 0,
        }
    }
}

/// Contiguous blocks: node `i` belongs to community `i·c/n`. Returns the
/// unlabeled graph and each node's community.
pub fn make_synthetic(cfg: &SyntheticConfig) -> Result<(Graph, Vec<usize>)> {
    if cfg.communities == 0 || cfg.n < cfg.communities {
        return Err(Error::InvalidParameter(format!(
            "need n >= communities >= 1, got n = {} and {} communities",
            cfg.n, cfg.communities
        )));
    }
    for (name, p) in [("p_in", cfg.p_in), ("p_out", cfg.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
        }
    }
    if !(cfg.mean_scale >= 0.0 && cfg.noise_std >= 0.0) {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "feature scales must be non-negative",
        )));
    }
    let membership: Vec<usize> = (0..cfg.n).map(|i| i * cfg.communities / cfg.n).collect();

    let mut rng = substream(cfg.seed, Purpose::Synthetic, 0, 0);
    let mut edges = Vec::new();
    for u in 0..cfg.n {
        for v in u + 1..cfg.n {
            let p = if membership[u] == membership[v] {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut rng = substream(cfg.seed, Purpose::Synthetic, 1, 0);
    let means = Matrix::from_fn(cfg.communities, cfg.feature_dim, |_, _| {
        cfg.mean_scale * rng.sample::<f64, _>(StandardNormal)
    });
    let mut features = Matrix::from_fn(cfg.n, cfg.feature_dim, |i, j| {
        means[(membership[i], j)] + cfg.noise_std * rng.sample::<f64, _>(StandardNormal)
    });
    if cfg.normalize_rows {
        for i in 0..cfg.n {
            let row = features.row_mut(i);
            let norm = crate::math::sqrt(row.iter().map(|v| v * v).sum());
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    Ok((Graph::build_undirected(&edges, cfg.n, features, None)?, membership))
}

/// Newman modularity of a node partition.
pub fn modularity(g: &Graph, membership: &[usize]) -> f64 {
    let m = g.num_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let c = membership.iter().copied().max().map_or(0, |k| k + 1);
    let mut internal = vec![0.0; c];
    let mut degree = vec![0.0; c];
    for &(u, v) in g.edges() {
        if membership[u] == membership[v] {
            internal[membership[u]] += 1.0;
        }
    }
    for v in 0..g.num_nodes() {
        degree[membership[v]] += g.degree(v) as f64;
    }
    internal
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / m - (d / (2.0 * m)) * (d / (2.0 * m)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let cfg = SyntheticConfig {
            n: 60,
            seed: 3,
            ..SyntheticConfig::default()
        };
        assert_eq!(make_synthetic(&cfg).unwrap(), make_synthetic(&cfg).unwrap());
    }

    #[test]
    fn normalized_rows_have_unit_norm() {
        let cfg = SyntheticConfig {
            n: 40,
            normalize_rows: true,
            ..SyntheticConfig::default()
        };
        let (g, _) = make_synthetic(&cfg).unwrap();
        for i in 0..40 {
            let norm: f64 = g.features().row(i).iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_cliques() {
        let cfg = SyntheticConfig {
            n: 10,
            communities: 2,
            p_in: 1.0,
            p_out: 0.0,
            ..SyntheticConfig::default()
        };
        let (g, member) = make_synthetic(&cfg).unwrap();
        assert_eq!(g.num_edges(), 2 * 10);
        for u in 0..10 {
            for v in 0..10 {
                assert_eq!(g.has_edge(u, v), u != v && member[u] == member[v]);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = SyntheticConfig {
            p_in: 1.5,
            ..SyntheticConfig::default()
        };
        assert!(make_synthetic(&bad).is_err());
        let bad = SyntheticConfig {
            n: 3,
            communities: 4,
            ..SyntheticConfig::default()
        };
        assert!(make_synthetic(&bad).is_err());
    }

    #[test]
    fn planted_partition_beats_random() {
        let (g, member) = make_synthetic(&SyntheticConfig::default()).unwrap();
        let shuffled: Vec<usize> = (0..500).map(|i| (i * 7919 + 13) % 4).collect();
        let planted = modularity(&g, &member);
        assert!(planted > 0.5, "{planted}");
        assert!(planted > modularity(&g, &shuffled) + 0.3);
    }
}
