//! Undirected attributed graphs and their normalized operators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix, SpectralDecomposition};
use crate::math;

/// Undirected, unweighted graph with a node feature matrix and optional
/// binary anomaly labels (`1` = anomaly).
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted; neighbor lists are
/// sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: Matrix,
    labels: Option<Vec<u8>>,
}

impl Graph {
    /// Symmetrizes `edge_list`, dropping self-loops and merging duplicates.
    pub fn build_undirected(
        edge_list: &[(usize, usize)],
        n: usize,
        features: Matrix,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        if features.rows() != n {
            return Err(Error::RowCountMismatch {
                rows: features.rows(),
                expected: n,
            });
        }
        if let Some(l) = &labels {
            check_labels(l, n)?;
        }
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(u, v) in edge_list {
            for index in [u, v] {
                if index >= n {
                    return Err(Error::NodeOutOfRange { index, n });
                }
            }
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let adjacency = adjacency_lists(n, &edges);
        Ok(Self {
            n,
            edges,
            adjacency,
            features,
            labels,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Unordered edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Neighbors of `u`, ascending.
    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Same topology with a replaced feature matrix.
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        Self::build_undirected(&self.edges, self.n, features, self.labels.clone())
    }

    /// Same topology and features with replaced labels.
    pub fn with_labels(&self, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some(l) = &labels {
            check_labels(l, self.n)?;
        }
        Ok(Self { labels, ..self.clone() })
    }

    /// Adds edges (symmetrized, deduplicated) and returns how many were new.
    pub fn with_added_edges(&self, extra: &[(usize, usize)]) -> Result<(Self, usize)> {
        let mut all = self.edges.clone();
        all.extend_from_slice(extra);
        let g = Self::build_undirected(&all, self.n, self.features.clone(), self.labels.clone())?;
        let added = g.num_edges() - self.num_edges();
        Ok((g, added))
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.n
            )));
        }
        let mut inverse = vec![usize::MAX; self.n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= self.n || inverse[p] != usize::MAX {
                return Err(Error::InvalidParameter(format!("not a permutation at {i}")));
            }
            inverse[p] = i;
        }
        let edges: Vec<_> = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let d = self.feature_dim();
        let features = Matrix::from_fn(self.n, d, |i, j| self.features[(inverse[i], j)]);
        let labels = self
            .labels
            .as_ref()
            .map(|l| (0..self.n).map(|i| l[inverse[i]]).collect());
        Self::build_undirected(&edges, self.n, features, labels)
    }
}

fn check_labels(labels: &[u8], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::LabelCountMismatch {
            len: labels.len(),
            expected: n,
        });
    }
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 1) {
        return Err(Error::InvalidLabel { index, value });
    }
    Ok(())
}

fn adjacency_lists(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Symmetric sparse matrix in compressed-row form. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from `(row, col, value)` triplets listing every stored entry.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, _) in &entries {
            if i >= n || j >= n {
                return Err(Error::NodeOutOfRange { index: i.max(j), n });
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let m = Self {
            n,
            row_ptr,
            col_idx,
            values,
        };
        for (i, j, v) in m.entries() {
            if m.get(j, i) != v {
                return Err(Error::InvalidParameter(format!("asymmetric entry at ({i}, {j})")));
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// `self · h`
    pub fn mul_dense(&self, h: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.n, h.cols());
        self.mul_dense_into(h, &mut out)?;
        Ok(out)
    }

    /// `out = self · h`, reusing `out`'s storage.
    pub fn mul_dense_into(&self, h: &Matrix, out: &mut Matrix) -> Result<()> {
        if h.rows() != self.n || out.shape() != (self.n, h.cols()) {
            return Err(Error::DimensionMismatch(format!(
                "sparse {}x{} times {}x{} into {}x{}",
                self.n,
                self.n,
                h.rows(),
                h.cols(),
                out.rows(),
                out.cols()
            )));
        }
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let o = out.row_mut(i);
            o.fill(0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                for (a, &b) in o.iter_mut().zip(h.row(j)) {
                    *a += v * b;
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }
}

/// `D^{-1/2}` diagonal with zero for isolated nodes.
fn inv_sqrt_degrees(g: &Graph) -> Vec<f64> {
    (0..g.num_nodes())
        .map(|u| match g.degree(u) {
            0 => 0.0,
            d => 1.0 / math::sqrt(d as f64),
        })
        .collect()
}

/// `Ã = D^{-1/2} A D^{-1/2}`. Isolated nodes have an all-zero row.
pub fn normalized_adjacency(g: &Graph) -> SparseSymMatrix {
    let s = inv_sqrt_degrees(g);
    let mut entries = Vec::with_capacity(2 * g.num_edges());
    for &(u, v) in g.edges() {
        let w = s[u] * s[v];
        entries.push((u, v, w));
        entries.push((v, u, w));
    }
    SparseSymMatrix::from_triplets(g.num_nodes(), entries).expect("graph edges are in range")
}

/// `L = I − Ã`. The diagonal is 1 for every node, isolated ones included.
pub fn normalized_laplacian(g: &Graph) -> SparseSymMatrix {
    let s = inv_sqrt_degrees(g);
    let mut entries = Vec::with_capacity(2 * g.num_edges() + g.num_nodes());
    for u in 0..g.num_nodes() {
        entries.push((u, u, 1.0));
    }
    for &(u, v) in g.edges() {
        let w = -(s[u] * s[v]);
        entries.push((u, v, w));
        entries.push((v, u, w));
    }
    SparseSymMatrix::from_triplets(g.num_nodes(), entries).expect("graph edges are in range")
}

/// Dense eigendecomposition of a symmetric sparse operator.
pub fn eigendecompose(l: &SparseSymMatrix) -> Result<SpectralDecomposition> {
    symmetric_eigen(&l.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::build_undirected(edges, n, Matrix::zeros(n, 1), None).unwrap()
    }

    #[test]
    fn symmetrizes_and_drops_self_loops() {
        let g = graph(3, &[(0, 1), (1, 0), (2, 2)]);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.degree(2), 0);
    }

    #[test]
    fn empty_edge_list() {
        let g = graph(2, &[]);
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.degrees(), vec![0, 0]);
    }

    #[test]
    fn rejects_bad_input() {
        let err = Graph::build_undirected(&[(0, 3)], 3, Matrix::zeros(3, 1), None).unwrap_err();
        assert_eq!(err, Error::NodeOutOfRange { index: 3, n: 3 });
        let err = Graph::build_undirected(&[], 3, Matrix::zeros(2, 1), None).unwrap_err();
        assert_eq!(err, Error::RowCountMismatch { rows: 2, expected: 3 });
        let err = Graph::build_undirected(&[], 2, Matrix::zeros(2, 1), Some(vec![0, 2])).unwrap_err();
        assert_eq!(err, Error::InvalidLabel { index: 1, value: 2 });
    }

    #[test]
    fn adjacency_small_cases() {
        let a = normalized_adjacency(&graph(2, &[(0, 1)]));
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);

        let a = normalized_adjacency(&graph(3, &[(0, 1), (1, 2), (0, 2)]));
        for (i, j) in [(0, 1), (1, 2), (0, 2), (2, 0)] {
            assert!((a.get(i, j) - 0.5).abs() < 1e-15);
        }

        let a = normalized_adjacency(&graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]));
        for leaf in 1..5 {
            assert!((a.get(0, leaf) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_small_cases() {
        let l = normalized_laplacian(&graph(2, &[(0, 1)]));
        assert_eq!(l.to_dense().as_slice(), &[1.0, -1.0, -1.0, 1.0]);

        let l = normalized_laplacian(&graph(3, &[(0, 1)]));
        assert_eq!(l.get(2, 2), 1.0);
        assert_eq!(l.row(2).0, &[2]);
    }

    #[test]
    fn triangle_spectrum() {
        let l = normalized_laplacian(&graph(3, &[(0, 1), (1, 2), (0, 2)]));
        let dec = eigendecompose(&l).unwrap();
        let expected = [0.0, 1.5, 1.5];
        for (got, want) in dec.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn single_edge_eigenvectors() {
        let dec = eigendecompose(&normalized_laplacian(&graph(2, &[(0, 1)]))).unwrap();
        assert!(dec.eigenvalues[0].abs() < 1e-15);
        assert!((dec.eigenvalues[1] - 2.0).abs() < 1e-15);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let u = &dec.eigenvectors;
        assert!((u[(0, 0)] - r).abs() < 1e-15 && (u[(1, 0)] - r).abs() < 1e-15);
        assert!((u[(0, 1)] - r).abs() < 1e-15 && (u[(1, 1)] + r).abs() < 1e-15);
    }

    #[test]
    fn sparse_times_dense_matches_dense() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let l = normalized_laplacian(&g);
        let h = Matrix::from_fn(4, 3, |i, j| (i as f64) - 0.5 * j as f64);
        let sparse = l.mul_dense(&h).unwrap();
        let dense = l.to_dense().matmul(&h).unwrap();
        assert!(sparse.max_abs_diff(&dense) < 1e-15);
    }

    #[test]
    fn permutation_relabels() {
        let feats = Matrix::from_fn(3, 1, |i, _| i as f64);
        let g = Graph::build_undirected(&[(0, 1)], 3, feats, Some(vec![1, 0, 0])).unwrap();
        let p = g.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.edges(), &[(0, 2)]);
        assert_eq!(p.features()[(2, 0)], 0.0);
        assert_eq!(p.labels().unwrap(), &[0, 0, 1]);
    }
}
