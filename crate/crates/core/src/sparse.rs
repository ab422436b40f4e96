//! Sparse matrix kept in both compressed-row and compressed-column layouts.
//!
//! Coordinate descent needs column access for gradients and residual
//! updates, while the separability analysis scans rows. Both views are
//! built once from the same triplet list and never mutated afterwards.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    row_vals: Vec<f64>,
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Explicit zeros are dropped. Duplicate positions, out-of-range indices
    /// and non-finite values are rejected.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Matrix(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Matrix(format!("non-finite value at ({r}, {c})")));
            }
            if v != 0.0 {
                entries.push((r, c, v));
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(Error::Matrix(format!(
                "duplicate entry at ({}, {})",
                w[0].0, w[0].1
            )));
        }

        let nnz = entries.len();
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_ptr = vec![0usize; cols + 1];
        for &(r, c, _) in &entries {
            row_ptr[r + 1] += 1;
            col_ptr[c + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        for i in 0..cols {
            col_ptr[i + 1] += col_ptr[i];
        }

        let mut row_cols = Vec::with_capacity(nnz);
        let mut row_vals = Vec::with_capacity(nnz);
        for &(_, c, v) in &entries {
            row_cols.push(c);
            row_vals.push(v);
        }

        // Entries are row-major sorted, so filling columns in this order keeps
        // every column's row list increasing.
        let mut col_rows = vec![0usize; nnz];
        let mut col_vals = vec![0.0; nnz];
        let mut next = col_ptr.clone();
        for &(r, c, v) in &entries {
            let slot = next[c];
            col_rows[slot] = r;
            col_vals[slot] = v;
            next[c] += 1;
        }

        Ok(Self {
            rows,
            cols,
            row_ptr,
            row_cols,
            row_vals,
            col_ptr,
            col_rows,
            col_vals,
        })
    }

    /// Dense row-major input; convenient for small tests.
    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, |r| r.len());
        if dense.iter().any(|r| r.len() != cols) {
            return Err(Error::Matrix("ragged dense input".into()));
        }
        Self::from_triplets(
            rows,
            cols,
            dense
                .iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| (r, c, v))),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.row_vals.len()
    }

    /// Column indices and values of row `r`, indices increasing.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.row_cols[span.clone()], &self.row_vals[span])
    }

    /// Row indices and values of column `c`, indices increasing.
    #[inline]
    pub fn col(&self, c: usize) -> (&[usize], &[f64]) {
        let span = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.col_rows[span.clone()], &self.col_vals[span])
    }

    pub fn col_nnz(&self, c: usize) -> usize {
        self.col_ptr[c + 1] - self.col_ptr[c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        idx.binary_search(&c).map_or(0.0, |p| vals[p])
    }

    pub fn col_sq_norm(&self, c: usize) -> f64 {
        self.col(c).1.iter().map(|v| v * v).sum()
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec: length mismatch");
        (0..self.rows)
            .map(|r| {
                let (idx, vals) = self.row(r);
                idx.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `Aᵀ y`
    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tmul_vec: length mismatch");
        (0..self.cols)
            .map(|c| {
                let (idx, vals) = self.col(c);
                idx.iter().zip(vals).map(|(&r, &v)| v * y[r]).sum()
            })
            .collect()
    }

    /// Row-major triplet iterator.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (idx, vals) = self.row(r);
            idx.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Returns a copy with every column `c` multiplied by `scale[c]`.
    pub fn scale_columns(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.cols {
            return Err(Error::Dimension(format!(
                "{} column scales for {} columns",
                scale.len(),
                self.cols
            )));
        }
        Self::from_triplets(
            self.rows,
            self.cols,
            self.triplets().map(|(r, c, v)| (r, c, v * scale[c])),
        )
    }

    /// Transpose as a new matrix.
    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            row_ptr: self.col_ptr.clone(),
            row_cols: self.col_rows.clone(),
            row_vals: self.col_vals.clone(),
            col_ptr: self.row_ptr.clone(),
            col_rows: self.row_cols.clone(),
            col_vals: self.row_vals.clone(),
        }
    }
}
