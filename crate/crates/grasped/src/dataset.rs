//! Canonical dataset directories: `meta.json`, `edges.tsv`, `features.tsv`
//! and an optional `labels.tsv`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use grasped_core::{Graph, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub num_nodes: usize,
    pub feature_dim: usize,
    pub has_labels: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn data_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}:{line}: {msg}", path.display()))
}

/// Non-empty lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn load_dataset(dir: &Path) -> Result<Graph> {
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_str(&read(&meta_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", meta_path.display())))?;
    let n = meta.num_nodes;

    let edge_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (no, line) in lines(&read(&edge_path)?) {
        let mut parts = line.split('\t');
        let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(data_err(&edge_path, no, "expected `u<TAB>v`"));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| data_err(&edge_path, no, format!("bad node id {s:?}")))
        };
        let (u, v) = (parse(u)?, parse(v)?);
        if u >= n || v >= n {
            return Err(data_err(&edge_path, no, format!("node id out of range for {n} nodes")));
        }
        edges.push((u, v));
    }

    let feat_path = dir.join("features.tsv");
    let mut data = Vec::with_capacity(n * meta.feature_dim);
    let mut rows = 0;
    for (no, line) in lines(&read(&feat_path)?) {
        let before = data.len();
        for field in line.split('\t') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| data_err(&feat_path, no, format!("bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(data_err(&feat_path, no, "non-finite feature"));
            }
            data.push(v);
        }
        if data.len() - before != meta.feature_dim {
            return Err(data_err(
                &feat_path,
                no,
                format!("{} columns, expected {}", data.len() - before, meta.feature_dim),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(CliError::Data(format!(
            "{}: {rows} rows, expected {n}",
            feat_path.display()
        )));
    }
    let features = Matrix::new(n, meta.feature_dim, data)?;

    let labels = if meta.has_labels {
        let path = dir.join("labels.tsv");
        let mut labels = Vec::with_capacity(n);
        for (no, line) in lines(&read(&path)?) {
            match line.trim() {
                "0" => labels.push(0),
                "1" => labels.push(1),
                other => return Err(data_err(&path, no, format!("label must be 0 or 1, got {other:?}"))),
            }
        }
        if labels.len() != n {
            return Err(CliError::Data(format!(
                "{}: {} labels, expected {n}",
                path.display(),
                labels.len()
            )));
        }
        Some(labels)
    } else {
        None
    };
    Ok(Graph::build_undirected(&edges, n, features, labels)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `g` in canonical form. Features use the shortest representation
/// that parses back to the same value.
pub fn save_dataset(dir: &Path, g: &Graph) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let meta = Meta {
        num_nodes: g.num_nodes(),
        feature_dim: g.feature_dim(),
        has_labels: g.labels().is_some(),
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    json.push('\n');
    write(&dir.join("meta.json"), &json)?;

    let mut s = String::new();
    for &(u, v) in g.edges() {
        writeln!(s, "{u}\t{v}").unwrap();
    }
    write(&dir.join("edges.tsv"), &s)?;

    let mut s = String::new();
    for i in 0..g.num_nodes() {
        let row: Vec<String> = g.features().row(i).iter().map(|v| v.to_string()).collect();
        writeln!(s, "{}", row.join("\t")).unwrap();
    }
    write(&dir.join("features.tsv"), &s)?;

    let label_path = dir.join("labels.tsv");
    match g.labels() {
        Some(labels) => {
            let mut s = String::with_capacity(2 * labels.len());
            for l in labels {
                writeln!(s, "{l}").unwrap();
            }
            write(&label_path, &s)?;
        }
        None if label_path.exists() => fs::remove_file(&label_path).map_err(|e| CliError::io(&label_path, e))?,
        None => {}
    }
    Ok(())
}

/// Labels of a dataset, or a data error naming it.
pub fn require_labels<'g>(g: &'g Graph, dir: &Path) -> Result<&'g [u8]> {
    g.labels().ok_or_else(|| {
        CliError::Data(format!(
            "{} has no labels (meta.json has_labels = false)",
            dir.display()
        ))
    })
}
