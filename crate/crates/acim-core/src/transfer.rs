//! The Frobenius–Perron operator, pointwise and as an exact Ulam matrix.
//!
//! (P_τ f)(x) = Σ_i f(τ_i^{-1} x)/|τ′(τ_i^{-1} x)| over the branches whose
//! image contains x. The Ulam discretization projects P_τ onto
//! piecewise-constant functions over n uniform cells: M_{ij} =
//! n · m(A_j ∩ τ^{-1} A_i), assembled exactly from inverse-branch images of
//! the cell endpoints, which makes the matrix column-stochastic by
//! construction up to roundoff.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::maps::PiecewiseMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    FrobeniusPerron,
    Noise,
    Perturbed,
}

impl MatrixKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatrixKind::FrobeniusPerron => "frobenius_perron",
            MatrixKind::Noise => "noise",
            MatrixKind::Perturbed => "perturbed",
        }
    }
}

/// Column-stochastic operator on grid densities. Dense, compressed sparse
/// column, or circulant storage, picked at assembly time: sparse once at
/// least 90% of the entries vanish, circulant for convolution kernels
/// (entry (i, j) depends only on (i − j) mod n).
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    n: usize,
    kind: MatrixKind,
    data: MatrixData,
}

#[derive(Debug, Clone)]
pub(crate) enum MatrixData {
    Dense(Vec<f64>),
    Csc { col_ptr: Vec<usize>, rows: Vec<usize>, vals: Vec<f64> },
    Circulant(Vec<f64>),
}

const SPARSE_FILL_THRESHOLD: f64 = 0.10;

impl TransferMatrix {
    #[cfg(test)]
    pub(crate) fn from_dense(kind: MatrixKind, n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        Self { n, kind, data: MatrixData::Dense(entries) }
    }

    /// Builds from per-column (row, value) lists, choosing sparse or dense
    /// storage by fill ratio.
    pub(crate) fn from_columns(kind: MatrixKind, n: usize, cols: Vec<Vec<(usize, f64)>>) -> Self {
        let nnz: usize = cols.iter().map(|c| c.len()).sum();
        if (nnz as f64) < SPARSE_FILL_THRESHOLD * (n as f64) * (n as f64) {
            let mut col_ptr = Vec::with_capacity(n + 1);
            let mut rows = Vec::with_capacity(nnz);
            let mut vals = Vec::with_capacity(nnz);
            col_ptr.push(0);
            for col in &cols {
                for &(i, v) in col {
                    rows.push(i);
                    vals.push(v);
                }
                col_ptr.push(rows.len());
            }
            Self { n, kind, data: MatrixData::Csc { col_ptr, rows, vals } }
        } else {
            let mut entries = vec![0.0; n * n];
            for (j, col) in cols.iter().enumerate() {
                for &(i, v) in col {
                    entries[i * n + j] = v;
                }
            }
            Self { n, kind, data: MatrixData::Dense(entries) }
        }
    }

    pub(crate) fn from_circulant(kind: MatrixKind, first_column: Vec<f64>) -> Self {
        Self { n: first_column.len(), kind, data: MatrixData::Circulant(first_column) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.data, MatrixData::Csc { .. })
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.data {
            MatrixData::Dense(e) => e[i * self.n + j],
            MatrixData::Csc { col_ptr, rows, vals } => {
                let lo = col_ptr[j];
                let hi = col_ptr[j + 1];
                match rows[lo..hi].binary_search(&i) {
                    Ok(k) => vals[lo + k],
                    Err(_) => 0.0,
                }
            }
            MatrixData::Circulant(c) => c[(self.n + i - j) % self.n],
        }
    }

    /// Calls `sink(row, value)` for every structurally nonzero entry of
    /// column j, in increasing row order for dense/sparse storage.
    pub fn for_each_in_column(&self, j: usize, mut sink: impl FnMut(usize, f64)) {
        match &self.data {
            MatrixData::Dense(e) => {
                for i in 0..self.n {
                    let v = e[i * self.n + j];
                    if v != 0.0 {
                        sink(i, v);
                    }
                }
            }
            MatrixData::Csc { col_ptr, rows, vals } => {
                for k in col_ptr[j]..col_ptr[j + 1] {
                    sink(rows[k], vals[k]);
                }
            }
            MatrixData::Circulant(c) => {
                for (o, &v) in c.iter().enumerate() {
                    if v != 0.0 {
                        sink((j + o) % self.n, v);
                    }
                }
            }
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        match &self.data {
            MatrixData::Circulant(c) => {
                let s: f64 = c.iter().sum();
                vec![s; self.n]
            }
            _ => {
                let mut sums = vec![0.0; self.n];
                for j in 0..self.n {
                    self.for_each_in_column(j, |_, v| sums[j] += v);
                }
                sums
            }
        }
    }

    pub fn max_column_sum_deviation(&self) -> f64 {
        self.column_sums()
            .iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// y = M f without renormalization; preserves (1/n) Σ values up to
    /// floating error because the columns sum to one.
    pub fn apply(&self, f: &GridDensity) -> Result<GridDensity> {
        if f.n() != self.n {
            return Err(Error::Dimension(format!(
                "matrix is {0}x{0}, density has {1} cells",
                self.n,
                f.n()
            )));
        }
        GridDensity::new(self.apply_slice(f.values()))
    }

    /// `apply` on raw coefficients, without the density bookkeeping; used
    /// by the iterative eigensolver on signed vectors.
    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        match &self.data {
            MatrixData::Dense(e) => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = &e[i * n..(i + 1) * n];
                    *yi = row.iter().zip(x).map(|(m, v)| m * v).sum();
                }
            }
            MatrixData::Csc { col_ptr, rows, vals } => {
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        for k in col_ptr[j]..col_ptr[j + 1] {
                            y[rows[k]] += vals[k] * xj;
                        }
                    }
                }
            }
            MatrixData::Circulant(c) => {
                for (o, &co) in c.iter().enumerate() {
                    if co != 0.0 {
                        for i in o..n {
                            y[i] += co * x[i - o];
                        }
                        for i in 0..o {
                            y[i] += co * x[n + i - o];
                        }
                    }
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match &self.data {
            MatrixData::Dense(e) => e.clone(),
            _ => {
                let n = self.n;
                let mut e = vec![0.0; n * n];
                for j in 0..n {
                    self.for_each_in_column(j, |i, v| e[i * n + j] = v);
                }
                e
            }
        }
    }

    /// Dense row-major CSV dump: a `n,kind` preamble, then one line per row
    /// with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,kind")?;
        writeln!(out, "{},{}", self.n, self.kind.as_str())?;
        let dense = self.to_dense();
        for i in 0..self.n {
            let row: Vec<String> = dense[i * self.n..(i + 1) * self.n]
                .iter()
                .map(|v| format!("{v:.16e}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Divides every column by its sum. Assembly routines call this after
    /// verifying the sums are already 1 up to their stated tolerance, so
    /// the Markov invariant holds bit-exactly afterwards.
    pub(crate) fn renormalize_columns(&mut self) {
        match &mut self.data {
            MatrixData::Dense(e) => {
                let n = self.n;
                for j in 0..n {
                    let s: f64 = (0..n).map(|i| e[i * n + j]).sum();
                    if s > 0.0 {
                        for i in 0..n {
                            e[i * n + j] /= s;
                        }
                    }
                }
            }
            MatrixData::Csc { col_ptr, vals, .. } => {
                for j in 0..self.n {
                    let s: f64 = vals[col_ptr[j]..col_ptr[j + 1]].iter().sum();
                    if s > 0.0 {
                        for v in &mut vals[col_ptr[j]..col_ptr[j + 1]] {
                            *v /= s;
                        }
                    }
                }
            }
            MatrixData::Circulant(c) => {
                let s: f64 = c.iter().sum();
                if s > 0.0 {
                    for v in c.iter_mut() {
                        *v /= s;
                    }
                }
            }
        }
    }
}

/// (P_τ f)(x) for an arbitrary integrable f given as a callable.
pub fn fp_apply_pointwise(map: &PiecewiseMap, f: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Parameter(format!("x = {x} outside the domain [0, 1]")));
    }
    let mut sum = 0.0;
    for (bi, br) in map.branches.iter().enumerate() {
        if !br.contains_in_image(x) {
            continue;
        }
        if let Some(pre) = map.inverse_branch(bi, x)? {
            sum += f(pre) / br.deriv(pre).abs();
        }
    }
    Ok(sum)
}

/// Exact Ulam matrix of P_τ on n uniform cells.
///
/// For every branch, the inverse images of the clipped cell endpoints are
/// computed once; consecutive pairs bound the preimage of each cell inside
/// the branch, and that interval's overlap with each source cell gives the
/// entries. Decreasing branches swap the pair to keep lengths positive.
pub fn ulam_matrix(map: &PiecewiseMap, n: usize) -> Result<TransferMatrix> {
    if n == 0 {
        return Err(Error::Parameter("ulam matrix needs n >= 1".into()));
    }
    let w = 1.0 / n as f64;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

    for (bi, br) in map.branches.iter().enumerate() {
        let (lo, hi) = br.image;
        if hi - lo <= 0.0 {
            continue;
        }
        // Inverse images of the cell endpoints clipped into the branch image.
        let edges: Vec<f64> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let y = (i as f64 * w).clamp(lo, hi);
                map.inverse_branch(bi, y).map(|x| {
                    x.expect("clipped endpoint lies in the branch image by construction")
                })
            })
            .collect::<Result<_>>()?;
        for i in 0..n {
            let (mut u0, mut u1) = (edges[i], edges[i + 1]);
            if !br.increasing {
                std::mem::swap(&mut u0, &mut u1);
            }
            let len = u1 - u0;
            if len < -1e-12 {
                return Err(Error::Internal(format!(
                    "negative preimage length {len:.3e} in branch {bi}, cell {i}"
                )));
            }
            if len <= 0.0 {
                continue;
            }
            let j0 = ((u0 * n as f64).floor() as usize).min(n - 1);
            let j1 = ((u1 * n as f64).ceil() as usize).min(n);
            for j in j0..j1.max(j0 + 1) {
                let ov = (u1.min((j + 1) as f64 * w) - u0.max(j as f64 * w)).max(0.0);
                if ov > 0.0 {
                    cols[j].push((i, ov * n as f64));
                }
            }
        }
    }

    // Merge duplicate rows per column (branch images may overlap).
    for col in &mut cols {
        col.sort_unstable_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for &(i, v) in col.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        *col = merged;
    }

    for (j, col) in cols.iter().enumerate() {
        let s: f64 = col.iter().map(|&(_, v)| v).sum();
        if (s - 1.0).abs() >= 1e-9 {
            return Err(Error::Internal(format!(
                "column {j} sums to {s} before renormalization (deviation {:.3e})",
                (s - 1.0).abs()
            )));
        }
    }

    let mut m = TransferMatrix::from_columns(MatrixKind::FrobeniusPerron, n, cols);
    m.renormalize_columns();
    Ok(m)
}

/// Free-function form of `TransferMatrix::apply`.
pub fn apply_matrix(m: &TransferMatrix, f: &GridDensity) -> Result<GridDensity> {
    m.apply(f)
}

/// Matrix product L·R with storage chosen by fill; the caller sets the kind.
pub(crate) fn multiply(l: &TransferMatrix, r: &TransferMatrix, kind: MatrixKind) -> Result<TransferMatrix> {
    if l.n() != r.n() {
        return Err(Error::Dimension(format!("product of {}x{} and {}x{}", l.n(), l.n(), r.n(), r.n())));
    }
    let n = l.n();
    let cols: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut buf = vec![0.0; n];
            r.for_each_in_column(j, |k, rv| {
                l.for_each_in_column(k, |i, lv| buf[i] += lv * rv);
            });
            buf.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect()
        })
        .collect();
    Ok(TransferMatrix::from_columns(kind, n, cols))
}
