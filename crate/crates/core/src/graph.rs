//! Graph and matrix representations shared by every other module.
//!
//! Undirected graphs are stored as dense symmetric hollow matrices. The
//! half-vector form keeps only the strict upper triangle in row-major order:
//! `(0,1), (0,2), …, (0,n-1), (1,2), …, (n-2,n-1)`. Every serialized vector in
//! this crate uses that order.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("diagonal entry {i} is nonzero")]
    NonzeroDiagonal { i: usize },
    #[error("entry ({i}, {j}) = {value} is not binary")]
    NotBinary { i: usize, j: usize, value: f64 },
    #[error("entry ({i}, {j}) is not finite")]
    NotFinite { i: usize, j: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("pair ({i}, {j}) is invalid for a graph on {n} nodes")]
    InvalidPair { i: usize, j: usize, n: usize },
    #[error("mask pair ({i}, {j}) listed twice")]
    DuplicatePair { i: usize, j: usize },
    #[error("edge list parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e.to_string())
    }
}

/// Number of strict-upper-triangle pairs of an `n`-node graph.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, inside a half-vector.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All strict-upper pairs in half-vector order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

/// Recovers the node count from a half-vector length, if it is triangular.
pub fn node_count_for_dim(dim: usize) -> Option<usize> {
    let n = ((1.0 + (1.0 + 8.0 * dim as f64).sqrt()) / 2.0).round() as usize;
    (pair_count(n) == dim).then_some(n.max(1))
}

/// Strict upper triangle of a symmetric hollow matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfVector(pub Vec<f64>);

impl HalfVector {
    pub fn zeros(dim: usize) -> Self {
        HalfVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn squared_distance(&self, other: &HalfVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl From<Vec<f64>> for HalfVector {
    fn from(v: Vec<f64>) -> Self {
        HalfVector(v)
    }
}

/// Symmetric hollow 0/1 adjacency matrix of an undirected simple graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        AdjacencyMatrix {
            n,
            entries: vec![false; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        for (i, j) in pairs(n) {
            a.set_edge(i, j, true);
        }
        a
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut a = Self::empty(n);
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(GraphError::InvalidPair { i, j, n });
            }
            a.set_edge(i, j, true);
        }
        Ok(a)
    }

    /// Validates a dense row-major 0/1 matrix.
    pub fn from_dense(n: usize, values: &[f64]) -> Result<Self, GraphError> {
        if values.len() != n * n {
            return Err(GraphError::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        let mut a = Self::empty(n);
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(GraphError::NonzeroDiagonal { i });
            }
            for j in (i + 1)..n {
                let (u, l) = (values[i * n + j], values[j * n + i]);
                if u != l {
                    return Err(GraphError::NotSymmetric { i, j });
                }
                if u != 0.0 && u != 1.0 {
                    return Err(GraphError::NotBinary { i, j, value: u });
                }
                a.set_edge(i, j, u == 1.0);
            }
        }
        Ok(a)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self, GraphError> {
        if m.nrows() != m.ncols() {
            return Err(GraphError::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let dense: Vec<f64> = (0..n * n).map(|p| m[(p / n, p % n)]).collect();
        Self::from_dense(n, &dense)
    }

    pub fn from_half_vector(n: usize, v: &HalfVector) -> Result<Self, GraphError> {
        if v.dim() != pair_count(n) {
            return Err(GraphError::DimensionMismatch {
                expected: pair_count(n),
                got: v.dim(),
            });
        }
        let mut a = Self::empty(n);
        for (p, (i, j)) in pairs(n).enumerate() {
            let x = v.0[p];
            if x != 0.0 && x != 1.0 {
                return Err(GraphError::NotBinary { i, j, value: x });
            }
            a.set_edge(i, j, x == 1.0);
        }
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.has_edge(i, j) {
            1.0
        } else {
            0.0
        }
    }

    /// Sets both `(i, j)` and `(j, i)`. Self-loops are ignored.
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        if i == j {
            return;
        }
        self.entries[i * self.n + j] = present;
        self.entries[j * self.n + i] = present;
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        pairs(self.n).filter(|&(i, j)| self.has_edge(i, j)).collect()
    }

    pub fn edge_count(&self) -> usize {
        pairs(self.n).filter(|&(i, j)| self.has_edge(i, j)).count()
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.n).filter(|&u| self.has_edge(v, u)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn vech(&self) -> HalfVector {
        HalfVector(pairs(self.n).map(|(i, j)| self.get(i, j)).collect())
    }

    pub fn to_relaxed(&self) -> RelaxedAdjacency {
        RelaxedAdjacency {
            n: self.n,
            entries: self.entries.iter().map(|&b| b as u8 as f64).collect(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Relabels nodes: node `v` of `self` becomes node `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> AdjacencyMatrix {
        let mut out = AdjacencyMatrix::empty(self.n);
        for (i, j) in self.edges() {
            out.set_edge(perm[i], perm[j], true);
        }
        out
    }

    /// Writes the edge-list text format: `n <count>` followed by one `i j`
    /// line per edge, 0-based with `i < j`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<(), GraphError> {
        writeln!(w, "n {}", self.n)?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut lines = r.lines().enumerate().filter_map(|(no, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((no + 1, other)),
        });
        let (no, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let header = header?;
        let mut it = header.split_whitespace();
        let n = match (it.next(), it.next(), it.next()) {
            (Some("n"), Some(count), None) => count.parse::<usize>().map_err(|e| GraphError::Parse {
                line: no,
                msg: e.to_string(),
            })?,
            _ => {
                return Err(GraphError::Parse {
                    line: no,
                    msg: format!("expected `n <count>`, found `{header}`"),
                })
            }
        };
        let mut a = AdjacencyMatrix::empty(n);
        for (no, line) in lines {
            let line = line?;
            let parsed: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| GraphError::Parse {
                    line: no,
                    msg: e.to_string(),
                })?;
            match parsed[..] {
                [i, j] if i < j && j < n => a.set_edge(i, j, true),
                [i, j] => return Err(GraphError::InvalidPair { i, j, n }),
                _ => {
                    return Err(GraphError::Parse {
                        line: no,
                        msg: format!("expected `i j`, found `{line}`"),
                    })
                }
            }
        }
        Ok(a)
    }
}

/// Continuous relaxation of an adjacency matrix (noisy state of the sampler).
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedAdjacency {
    n: usize,
    entries: Vec<f64>,
}

impl RelaxedAdjacency {
    pub fn zeros(n: usize) -> Self {
        RelaxedAdjacency {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn from_dense(n: usize, values: &[f64]) -> Result<Self, GraphError> {
        if values.len() != n * n {
            return Err(GraphError::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(GraphError::NonzeroDiagonal { i });
            }
            for j in 0..n {
                if !values[i * n + j].is_finite() {
                    return Err(GraphError::NotFinite { i, j });
                }
                if values[i * n + j] != values[j * n + i] {
                    return Err(GraphError::NotSymmetric { i, j });
                }
            }
        }
        Ok(RelaxedAdjacency {
            n,
            entries: values.to_vec(),
        })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self, GraphError> {
        if m.nrows() != m.ncols() {
            return Err(GraphError::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let dense: Vec<f64> = (0..n * n).map(|p| m[(p / n, p % n)]).collect();
        Self::from_dense(n, &dense)
    }

    pub fn from_half_vector(n: usize, v: &HalfVector) -> Result<Self, GraphError> {
        if v.dim() != pair_count(n) {
            return Err(GraphError::DimensionMismatch {
                expected: pair_count(n),
                got: v.dim(),
            });
        }
        let mut out = Self::zeros(n);
        for (p, (i, j)) in pairs(n).enumerate() {
            let x = v.0[p];
            if !x.is_finite() {
                return Err(GraphError::NotFinite { i, j });
            }
            out.set(i, j, x);
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`; the diagonal stays zero.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            return;
        }
        self.entries[i * self.n + j] = value;
        self.entries[j * self.n + i] = value;
    }

    pub fn vech(&self) -> HalfVector {
        HalfVector(pairs(self.n).map(|(i, j)| self.get(i, j)).collect())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Half-vectorization of a dense matrix, validating symmetry and a zero
/// diagonal.
pub fn vech(m: &DMatrix<f64>) -> Result<HalfVector, GraphError> {
    RelaxedAdjacency::from_matrix(m).map(|a| a.vech())
}

/// Inverse of [`vech`]; produces the dense symmetric hollow matrix.
pub fn unvech(n: usize, v: &HalfVector) -> Result<DMatrix<f64>, GraphError> {
    RelaxedAdjacency::from_half_vector(n, v).map(|a| a.to_matrix())
}

/// Partition of the strict-upper pairs into observed and unknown entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPartition {
    n: usize,
    /// Indexed by half-vector position.
    observed: Vec<bool>,
}

impl MaskPartition {
    pub fn all_observed(n: usize) -> Self {
        MaskPartition {
            n,
            observed: vec![true; pair_count(n)],
        }
    }

    pub fn all_unknown(n: usize) -> Self {
        MaskPartition {
            n,
            observed: vec![false; pair_count(n)],
        }
    }

    /// Everything observed except the listed pairs (either orientation).
    pub fn with_unknown(n: usize, unknown: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut mask = Self::all_observed(n);
        for &(a, b) in unknown {
            let (i, j) = (a.min(b), a.max(b));
            if i == j || j >= n {
                return Err(GraphError::InvalidPair { i: a, j: b, n });
            }
            let p = pair_index(n, i, j);
            if !mask.observed[p] {
                return Err(GraphError::DuplicatePair { i, j });
            }
            mask.observed[p] = false;
        }
        Ok(mask)
    }

    pub fn from_observed_flags(n: usize, observed: Vec<bool>) -> Result<Self, GraphError> {
        if observed.len() != pair_count(n) {
            return Err(GraphError::DimensionMismatch {
                expected: pair_count(n),
                got: observed.len(),
            });
        }
        Ok(MaskPartition { n, observed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        let (i, j) = (i.min(j), i.max(j));
        i != j && self.observed[pair_index(self.n, i, j)]
    }

    pub fn observed_flags(&self) -> &[bool] {
        &self.observed
    }

    pub fn observed_pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.n)
            .zip(&self.observed)
            .filter_map(|(p, &o)| o.then_some(p))
            .collect()
    }

    pub fn unknown_pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.n)
            .zip(&self.observed)
            .filter_map(|(p, &o)| (!o).then_some(p))
            .collect()
    }

    /// Half-vector positions of the unknown pairs, ascending.
    pub fn unknown_indices(&self) -> Vec<usize> {
        (0..self.observed.len())
            .filter(|&p| !self.observed[p])
            .collect()
    }

    pub fn unknown_count(&self) -> usize {
        self.observed.iter().filter(|&&o| !o).count()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.len() - self.unknown_count()
    }
}

/// Overwrites the observed entries of `target` with those of `source`.
pub fn apply_mask(
    target: &RelaxedAdjacency,
    source: &AdjacencyMatrix,
    mask: &MaskPartition,
) -> Result<RelaxedAdjacency, GraphError> {
    for got in [source.n(), mask.n()] {
        if got != target.n() {
            return Err(GraphError::DimensionMismatch {
                expected: target.n(),
                got,
            });
        }
    }
    let mut out = target.clone();
    for (i, j) in mask.observed_pairs() {
        out.set(i, j, source.get(i, j));
    }
    Ok(out)
}

/// Entry-wise `1[x >= 0.5]`.
pub fn project_binary(a: &RelaxedAdjacency) -> AdjacencyMatrix {
    let mut out = AdjacencyMatrix::empty(a.n());
    for (i, j) in pairs(a.n()) {
        out.set_edge(i, j, a.get(i, j) >= 0.5);
    }
    out
}
