//! Evaluation metrics, dataset statistics, anomaly injection and synthetic
//! graphs.

mod inject;
mod metrics;
mod stats;
mod synth;

pub use inject::{inject_contextual, inject_structural, Injection, DEFAULT_CANDIDATES, DEFAULT_CLIQUE_SIZE};
pub use metrics::{roc_auc, EvalResult};
pub use stats::{average_degree, neighborhood_similarity, relative_delta, DatasetStats, NeighborhoodSimilarity};
pub use synth::{make_synthetic, modularity, SyntheticConfig};

/// `⌈rate·n⌉`, guarding against products like `0.05·500 = 25.000000000000004`.
pub(crate) fn target_count(rate: f64, n: usize) -> crate::Result<usize> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(crate::Error::InvalidParameter(alloc::format!(
            "anomaly rate {rate} must be a non-negative fraction"
        )));
    }
    let raw = rate * n as f64;
    let count = crate::math::ceil(raw - 1e-9 * raw.max(1.0)) as usize;
    if count > n {
        return Err(crate::Error::InvalidParameter(alloc::format!(
            "rate {rate} selects {count} of {n} nodes"
        )));
    }
    Ok(count)
}
