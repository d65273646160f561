//! Cartesian-product hyperparameter search.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use grasped_core::bench::roc_auc;
use grasped_core::{score_nodes, train, Graph, HyperParams};
use rayon::prelude::*;

use crate::config::{set_axis, RunConfig};
use crate::error::{CliError, Result};
use crate::formats::mean_std;

/// One grid cell: a value index per axis and the resulting hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub assignment: Vec<(String, f64)>,
    pub hyper: HyperParams,
}

impl Cell {
    /// `axis=value` pairs separated by spaces.
    pub fn params(&self) -> String {
        let parts: Vec<String> = self.assignment.iter().map(|(a, v)| format!("{a}={v}")).collect();
        parts.join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    /// `(seed, auc)` per run, or the error that stopped the cell.
    pub runs: Result<Vec<(u64, f64)>, String>,
}

impl CellResult {
    pub fn mean_std(&self) -> Option<(f64, f64)> {
        let runs = self.runs.as_ref().ok()?;
        let aucs: Vec<f64> = runs.iter().map(|r| r.1).collect();
        Some(mean_std(&aucs))
    }
}

/// Enumerates the product of `axes` with the last axis varying fastest.
pub fn cells(base: &HyperParams, axes: &[(String, Vec<f64>)]) -> Result<Vec<Cell>> {
    if axes.is_empty() || axes.iter().any(|(_, v)| v.is_empty()) {
        return Err(CliError::Usage("grid search needs at least one non-empty axis".into()));
    }
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let mut picks = vec![0; axes.len()];
        for (a, (_, values)) in axes.iter().enumerate().rev() {
            picks[a] = rem % values.len();
            rem /= values.len();
        }
        let mut hyper = base.clone();
        let mut assignment = Vec::with_capacity(axes.len());
        for ((axis, values), &p) in axes.iter().zip(&picks) {
            set_axis(&mut hyper, axis, values[p]).map_err(CliError::Usage)?;
            assignment.push((axis.clone(), values[p]));
        }
        out.push(Cell {
            index,
            assignment,
            hyper,
        });
    }
    Ok(out)
}

/// AUC of one training run.
pub fn run_once(g: &Graph, labels: &[u8], hyper: &HyperParams) -> Result<f64> {
    let (params, _) = train(g, hyper)?;
    let scores = score_nodes(g, &params, hyper)?;
    Ok(roc_auc(&scores, labels)?.auc)
}

fn run_cell(g: &Graph, labels: &[u8], cell: &Cell, seeds: &[u64], dir: &Path) -> Result<CellResult> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut cfg = RunConfig {
        hyper: cell.hyper.clone(),
        seeds: Some(seeds.to_vec()),
        ..RunConfig::default()
    };
    cfg.hyper.seed = seeds[0];
    write(&dir.join("config.conf"), &cfg.to_text())?;

    let mut runs = Vec::with_capacity(seeds.len());
    let mut failure = None;
    for &seed in seeds {
        let hyper = HyperParams {
            seed,
            ..cell.hyper.clone()
        };
        match run_once(g, labels, &hyper) {
            Ok(auc) => runs.push((seed, auc)),
            Err(e @ (CliError::Numerical(_) | CliError::Data(_))) => {
                failure = Some(format!("seed {seed}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut csv = String::from("seed,auc\n");
    for (seed, auc) in &runs {
        writeln!(csv, "{seed},{auc:.16e}").unwrap();
    }
    write(&dir.join("runs.csv"), &csv)?;
    if let Some(msg) = &failure {
        write(&dir.join("error.txt"), &format!("{msg}\n"))?;
    }
    Ok(CellResult {
        cell: cell.clone(),
        runs: match failure {
            Some(msg) => Err(msg),
            None => Ok(runs),
        },
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn cell_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("cell-{index:04}"))
}

/// Runs every cell; results come back in cell order either way.
pub fn run_grid(
    g: &Graph,
    labels: &[u8],
    cells: &[Cell],
    seeds: &[u64],
    out: &Path,
    parallel: bool,
) -> Result<Vec<CellResult>> {
    let one = |c: &Cell| run_cell(g, labels, c, seeds, &cell_dir(out, c.index));
    if parallel {
        cells.par_iter().map(one).collect()
    } else {
        cells.iter().map(one).collect()
    }
}

/// Highest mean, then lower std, then earlier cell. Failed cells never win.
pub fn best(results: &[CellResult]) -> Option<&CellResult> {
    let mut best: Option<(&CellResult, f64, f64)> = None;
    for r in results {
        let Some((mean, std)) = r.mean_std() else { continue };
        if mean.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, bm, bs)) => mean > bm || (mean == bm && std < bs),
        };
        if better {
            best = Some((r, mean, std));
        }
    }
    best.map(|b| b.0)
}

/// `cell,mean,std,params` rows; failed cells leave mean and std empty.
pub fn grid_csv(results: &[CellResult]) -> String {
    let mut s = String::from("cell,mean,std,params\n");
    for r in results {
        match r.mean_std() {
            Some((m, sd)) => writeln!(s, "{},{m:.16e},{sd:.16e},{}", r.cell.index, r.cell.params()).unwrap(),
            None => writeln!(s, "{},,,{}", r.cell.index, r.cell.params()).unwrap(),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(index: usize, aucs: &[f64]) -> CellResult {
        CellResult {
            cell: Cell {
                index,
                assignment: vec![],
                hyper: HyperParams::default(),
            },
            runs: Ok(aucs.iter().enumerate().map(|(i, &a)| (i as u64, a)).collect()),
        }
    }

    #[test]
    fn enumeration_is_row_major() {
        let axes = vec![
            ("lambda_x".to_string(), vec![1.0, 2.0]),
            ("bins".to_string(), vec![4.0, 8.0, 16.0]),
        ];
        let c = cells(&HyperParams::default(), &axes).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c[1].params(), "lambda_x=1 bins=8");
        assert_eq!(c[3].params(), "lambda_x=2 bins=4");
        assert_eq!(c[5].hyper.bins, 16);
        assert_eq!(c[5].hyper.lambda_x, 2.0);
    }

    #[test]
    fn best_breaks_ties_by_std_then_order() {
        let rs = vec![
            result(0, &[0.7, 0.9]),
            result(1, &[0.8, 0.8]),
            result(2, &[0.8, 0.8]),
            result(3, &[0.6]),
        ];
        assert_eq!(best(&rs).unwrap().cell.index, 1);
        let mut failed = result(4, &[]);
        failed.runs = Err("boom".into());
        assert!(best(&[failed]).is_none());
    }

    #[test]
    fn empty_axis_rejected() {
        assert!(cells(&HyperParams::default(), &[]).is_err());
        assert!(cells(&HyperParams::default(), &[("bins".into(), vec![])]).is_err());
    }
}
