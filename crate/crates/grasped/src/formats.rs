//! Scores, loss histories, dataset statistics and injection provenance.

use std::fmt::Write as _;
use std::path::Path;

use grasped_core::bench::DatasetStats;
use grasped_core::train::EpochRecord;
use serde::Serialize;

use crate::error::{CliError, Result};

/// `node_id<TAB>score` with 17 significant digits.
pub fn scores_tsv(scores: &[f64]) -> String {
    let mut s = String::with_capacity(scores.len() * 32);
    for (i, v) in scores.iter().enumerate() {
        writeln!(s, "{i}\t{v:.16e}").unwrap();
    }
    s
}

/// Parses a scores file; every node in `0..n` must appear exactly once.
pub fn parse_scores(text: &str, n: usize, path: &Path) -> Result<Vec<f64>> {
    let err = |line: usize, msg: String| CliError::Data(format!("{}:{line}: {msg}", path.display()));
    let mut scores = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, score) = line
            .split_once('\t')
            .ok_or_else(|| err(i + 1, "expected `node_id<TAB>score`".into()))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| err(i + 1, format!("bad node id {id:?}")))?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| err(i + 1, format!("bad score {score:?}")))?;
        if id >= n {
            return Err(err(i + 1, format!("node {id} out of range for {n} nodes")));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(err(i + 1, format!("node {id} listed twice")));
        }
        scores[id] = score;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(CliError::Data(format!(
            "{}: no score for node {missing}",
            path.display()
        )));
    }
    Ok(scores)
}

pub fn loss_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,total,loss_d,loss_n,loss_x\n");
    for r in history {
        writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.epoch, r.total, r.loss_d, r.loss_n, r.loss_x
        )
        .unwrap();
    }
    s
}

pub const STATS_HEADER: &str = "dataset,nsim_normal,nsim_anomaly,delta_nsim_pct,deg_normal,deg_anomaly,delta_deg_pct";

fn opt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |d| format!("{:.2}", 100.0 * d))
}

pub fn stats_row(name: &str, s: &DatasetStats) -> String {
    format!(
        "{name},{:.6},{:.6},{},{:.6},{:.6},{}",
        s.n_sim_normal,
        s.n_sim_anomaly,
        opt_pct(s.delta_nsim),
        s.deg_normal,
        s.deg_anomaly,
        opt_pct(s.delta_deg)
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionParams {
    Contextual { candidates: usize },
    Structural { clique_size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub source: String,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub rate: f64,
    pub seed: u64,
    pub parameters: InjectionParams,
    pub injected_nodes: usize,
    pub added_edges: usize,
}

impl Provenance {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("provenance serializes");
        s.push('\n');
        s
    }
}

/// `mean ± std` of AUCs as percentages with one decimal.
pub fn auc_summary(aucs: &[f64]) -> String {
    let (mean, std) = mean_std(aucs);
    format!("{:.1} ± {:.1}", 100.0 * mean, 100.0 * std)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_round_trip_exactly() {
        let scores = vec![0.1, 1.0 / 3.0, 12345.678901234567, 0.0, 2.5e-300];
        let text = scores_tsv(&scores);
        assert!(text.starts_with("0\t1.0000000000000001e-1\n"));
        let back = parse_scores(&text, 5, Path::new("s.tsv")).unwrap();
        assert_eq!(back, scores);
    }

    #[test]
    fn scores_must_cover_every_node() {
        let p = Path::new("s.tsv");
        assert!(parse_scores("0\t1\n", 2, p).is_err());
        assert!(parse_scores("0\t1\n0\t2\n", 2, p).is_err());
        assert!(parse_scores("0\t1\n5\t2\n", 2, p).is_err());
        assert_eq!(parse_scores("1\t2\n0\t1\n", 2, p).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn summary_format() {
        assert_eq!(auc_summary(&[0.83]), "83.0 ± 0.0");
        let (m, s) = mean_std(&[0.8, 0.9]);
        assert!((m - 0.85).abs() < 1e-15);
        assert!((s - (0.005f64).sqrt()).abs() < 1e-15);
        assert_eq!(auc_summary(&[0.8, 0.9]), "85.0 ± 7.1");
    }

    #[test]
    fn negative_delta_keeps_sign() {
        let s = DatasetStats {
            n_sim_normal: 0.5,
            n_sim_anomaly: 0.25,
            deg_normal: 4.0,
            deg_anomaly: 6.0,
            delta_nsim: Some(-0.5),
            delta_deg: Some(0.5),
        };
        assert_eq!(
            stats_row("toy", &s),
            "toy,0.500000,0.250000,-50.00,4.000000,6.000000,50.00"
        );
    }
}
