use alloc::vec::Vec;

use crate::error::{Error, Result};

/// ROC-AUC over one score vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Mann–Whitney ROC-AUC with midranks: the fraction of (anomaly, normal)
/// pairs in which the anomaly scores higher, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<EvalResult> {
    if scores.len() != labels.len() {
        return Err(Error::LabelCountMismatch {
            len: labels.len(),
            expected: scores.len(),
        });
    }
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 1) {
        return Err(Error::InvalidLabel { index, value });
    }
    if let Some(&bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::NonFiniteTarget(bad));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the positive rank sum keeps midranks integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share midrank (i+1+j)/2.
        let mid2 = (i + 1 + j) as u128;
        let pos_in_tie = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        rank_sum2 += mid2 * pos_in_tie;
        i = j;
    }
    let p = n_pos as u128;
    // U = R⁺ − n⁺(n⁺+1)/2, doubled.
    let u2 = rank_sum2 - p * (p + 1);
    let auc = u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(EvalResult { auc, n_pos, n_neg })
}
