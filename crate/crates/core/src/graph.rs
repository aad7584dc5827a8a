//! Similarity matrices, k-nearest-neighbor sparsification and modality mixing.
//!
//! Both [`SimilarityMatrix`] and [`SimilarityGraph`] use the same sparse symmetric
//! layout: one sorted adjacency row per node, every off-diagonal entry stored in
//! both rows. An absent entry means "no similarity" and is never materialized.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

/// Sparse symmetric storage shared by matrices and graphs.
#[derive(Debug, Clone, PartialEq)]
struct SparseSym {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    fn empty(n: usize) -> Self {
        SparseSym {
            rows: vec![Vec::new(); n],
        }
    }

    fn n(&self) -> usize {
        self.rows.len()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    fn nnz_upper(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().filter(|&&(j, _)| j > i).count())
            .sum()
    }

    /// Builds from upper-triangle triplets (i < j). Zero values are dropped.
    fn from_upper(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut s = SparseSym::empty(n);
        for (i, j, v) in triplets {
            if v != 0.0 {
                s.rows[i].push((j, v));
                s.rows[j].push((i, v));
            }
        }
        for r in &mut s.rows {
            r.sort_by_key(|&(c, _)| c);
        }
        s
    }

    fn upper_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, r)| {
            r.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, v)| (i, j, v))
        })
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                d[i][j] = v;
            }
        }
        d
    }
}

/// Pairwise similarity between webpages of one modality, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    inner: SparseSym,
}

impl SimilarityMatrix {
    /// Builds a matrix from a dense row-major square array.
    ///
    /// The input must be finite, nonnegative, symmetric within `1e-9` and have a
    /// zero diagonal. Entries equal to zero are treated as absent. The upper
    /// triangle is what gets stored, so tiny asymmetries are resolved in its favor.
    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let n = dense.len();
        for (i, row) in dense.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row[i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {i}")));
            }
        }
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (dense[i][j], dense[j][i]);
                check_entry(i, j, a)?;
                check_entry(j, i, b)?;
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!("asymmetric entry ({i}, {j})")));
                }
                triplets.push((i, j, a));
            }
        }
        Ok(SimilarityMatrix {
            inner: SparseSym::from_upper(n, triplets),
        })
    }

    /// Builds a matrix from upper-triangle triplets `(i, j, value)` with `i < j`.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut checked = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("index ({i}, {j}) out of range for n = {n}")));
            }
            if i >= j {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) is not in the strict upper triangle"
                )));
            }
            check_entry(i, j, v)?;
            if !seen.insert((i, j)) {
                return Err(Error::invalid(format!("duplicate entry ({i}, {j})")));
            }
            checked.push((i, j, v));
        }
        Ok(SimilarityMatrix {
            inner: SparseSym::from_upper(n, checked),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    /// Present (nonzero) neighbors of `i`, sorted by index.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.inner.rows[i]
    }

    /// Number of stored off-diagonal pairs.
    pub fn nnz(&self) -> usize {
        self.inner.nnz_upper()
    }

    pub fn upper_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.inner.upper_triplets()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.inner.to_dense()
    }

    /// Mean squared value over present off-diagonal entries; the default kernel width.
    pub fn mean_squared_entry(&self) -> Option<f64> {
        let (sum, count) = self
            .upper_triplets()
            .fold((0.0, 0usize), |(s, c), (_, _, v)| (s + v * v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// Reads the sparse triplet text format: a header `n nnz` followed by `nnz`
    /// lines `i j value` (0-based, upper triangle only, values in `[0, 1]`).
    pub fn read_triplets<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l))
            .filter(|(_, l)| match l {
                Ok(s) => !s.trim().is_empty() && !s.trim_start().starts_with('#'),
                Err(_) => true,
            });
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header `n nnz`"))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(hline, "header must be `n nnz`"));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(hline, "bad node count"))?;
        let nnz: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(hline, "bad entry count"))?;

        let mut triplets = Vec::with_capacity(nnz);
        for (no, line) in lines {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::parse(no, "expected `i j value`"));
            }
            let i: usize = f[0].parse().map_err(|_| Error::parse(no, "bad row index"))?;
            let j: usize = f[1].parse().map_err(|_| Error::parse(no, "bad column index"))?;
            let v: f64 = f[2].parse().map_err(|_| Error::parse(no, "bad value"))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::parse(no, format!("value {v} outside [0, 1]")));
            }
            triplets.push((i, j, v));
        }
        if triplets.len() != nnz {
            return Err(Error::parse(
                hline,
                format!("header declares {nnz} entries, found {}", triplets.len()),
            ));
        }
        Self::from_triplets(n, triplets)
    }

    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        write_triplets(&self.inner, &mut w)
    }
}

fn check_entry(i: usize, j: usize, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
    }
    if v < 0.0 {
        return Err(Error::invalid(format!("negative entry at ({i}, {j})")));
    }
    Ok(())
}

fn write_triplets<W: Write>(s: &SparseSym, w: &mut W) -> Result<()> {
    writeln!(w, "{} {}", s.n(), s.nnz_upper())?;
    for (i, j, v) in s.upper_triplets() {
        writeln!(w, "{i} {j} {v}")?;
    }
    Ok(())
}

/// Which modality a graph was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Visual,
    Textual,
    Mixed,
}

/// Sparse symmetric weighted graph over webpages, no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    inner: SparseSym,
    kind: GraphKind,
}

impl SimilarityGraph {
    /// Builds a graph from upper-triangle edges with weights in `[0, 1]`.
    pub fn from_edges(
        n: usize,
        kind: GraphKind,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let m = SimilarityMatrix::from_triplets(n, edges)?;
        for (i, j, v) in m.upper_triplets() {
            if v > 1.0 {
                return Err(Error::invalid(format!("edge ({i}, {j}) weight {v} exceeds 1")));
            }
        }
        Ok(SimilarityGraph { inner: m.inner, kind })
    }

    /// Reinterprets a similarity matrix as a graph without sparsification.
    pub fn from_matrix(m: &SimilarityMatrix, kind: GraphKind) -> Self {
        SimilarityGraph {
            inner: m.inner.clone(),
            kind,
        }
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.inner.rows[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.inner.rows[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.inner.nnz_upper()
    }

    /// Edges as `(i, j, weight)` with `i < j`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.inner.upper_triplets()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.inner.to_dense()
    }

    /// Reads a graph from the triplet text format (same layout as [`SimilarityMatrix`]).
    pub fn read_triplets<R: BufRead>(reader: R, kind: GraphKind) -> Result<Self> {
        let m = SimilarityMatrix::read_triplets(reader)?;
        Ok(SimilarityGraph { inner: m.inner, kind })
    }

    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        write_triplets(&self.inner, &mut w)
    }
}

/// Converts similarities into Gaussian affinities `exp(-W_ij^2 / sigma2)`.
///
/// Only present entries are transformed; absent pairs stay absent.
pub fn gaussian_affinity(w: &SimilarityMatrix, sigma2: f64) -> Result<SimilarityMatrix> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
    }
    let mut out = w.inner.clone();
    for row in &mut out.rows {
        for entry in row.iter_mut() {
            let v = entry.1;
            if !v.is_finite() {
                return Err(Error::invalid("non-finite similarity"));
            }
            entry.1 = (-(v * v) / sigma2).exp();
        }
    }
    Ok(SimilarityMatrix { inner: out })
}

/// Keeps each node's `k` strongest neighbors and symmetrizes by union.
///
/// Ties on the k-th affinity go to the lower node index. Retained weights are the
/// original affinity values.
pub fn knn_sparsify(affinity: &SimilarityMatrix, k: usize, kind: GraphKind) -> Result<SimilarityGraph> {
    let n = affinity.n();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must satisfy 1 <= k < n (k = {k}, n = {n})")));
    }
    let mut keep = vec![Vec::new(); n];
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = affinity.row(i).to_vec();
        row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(j, v) in row.iter().take(k) {
            keep[i].push((j, v));
            keep[j].push((i, v));
        }
    }
    for row in &mut keep {
        row.sort_by_key(|&(c, _)| c);
        row.dedup_by_key(|e| e.0);
    }
    Ok(SimilarityGraph {
        inner: SparseSym { rows: keep },
        kind,
    })
}

/// Union of two graphs with weights `(a + b) / 2`, a missing edge counting as 0.
pub fn mix_graphs(g_vis: &SimilarityGraph, g_txt: &SimilarityGraph) -> Result<SimilarityGraph> {
    if g_vis.n() != g_txt.n() {
        return Err(Error::invalid(format!(
            "node count mismatch: {} vs {}",
            g_vis.n(),
            g_txt.n()
        )));
    }
    let rows = g_vis
        .inner
        .rows
        .iter()
        .zip(&g_txt.inner.rows)
        .map(|(a, b)| merge_rows(a, b))
        .collect();
    Ok(SimilarityGraph {
        inner: SparseSym { rows },
        kind: GraphKind::Mixed,
    })
}

fn merge_rows(a: &[(usize, f64)], b: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ca = a.get(i).map_or(usize::MAX, |e| e.0);
        let cb = b.get(j).map_or(usize::MAX, |e| e.0);
        if ca == cb {
            out.push((ca, (a[i].1 + b[j].1) / 2.0));
            i += 1;
            j += 1;
        } else if ca < cb {
            out.push((ca, (a[i].1 + 0.0) / 2.0));
            i += 1;
        } else {
            out.push((cb, (0.0 + b[j].1) / 2.0));
            j += 1;
        }
    }
    out
}
