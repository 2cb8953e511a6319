//! Minimal compressed-sparse-column storage used by the QP builder and solver.

use crate::error::{Error, Result};

/// Compressed sparse column matrix with sorted row indices and no duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on conversion.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Adds a row count without entries (used when appending row blocks).
    pub fn grow_rows(&mut self, extra: usize) -> usize {
        let first = self.nrows;
        self.nrows += extra;
        first
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn build(mut self) -> CscMatrix {
        self.entries.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowind = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                rowind.push(r);
                values.push(v);
                colptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..self.ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix { nrows: self.nrows, ncols: self.ncols, colptr, rowind, values }
    }
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, colptr: vec![0; ncols + 1], rowind: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowind: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut b = TripletBuilder::new(nrows, ncols);
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::Dimension(format!("entry ({r},{c}) outside {nrows}x{ncols}")));
            }
            b.push(r, c, v);
        }
        Ok(b.build())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.colptr[c]..self.colptr[c + 1]).map(move |p| (self.rowind[p], c, self.values[p]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.colptr[col]..self.colptr[col + 1];
        match self.rowind[range.clone()].binary_search(&row) {
            Ok(i) => self.values[range.start + i],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowind[p]] += self.values[p] * xc;
            }
        }
        y
    }

    /// `y = A^T x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.ncols)
            .map(|c| (self.colptr[c]..self.colptr[c + 1]).map(|p| self.values[p] * x[self.rowind[p]]).sum())
            .collect()
    }

    /// `y = A x` for a symmetric matrix stored as its upper triangle.
    pub fn sym_upper_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowind[p];
                let v = self.values[p];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for (r, c, v) in self.iter() {
            b.push(c, r, v);
        }
        b.build()
    }

    /// Entries on or above the diagonal.
    pub fn upper_triangle(&self) -> CscMatrix {
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            if r <= c {
                b.push(r, c, v);
            }
        }
        b.build()
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &CscMatrix) -> Result<CscMatrix> {
        if self.ncols != other.ncols {
            return Err(Error::Dimension(format!("vstack {} vs {} columns", self.ncols, other.ncols)));
        }
        let mut b = TripletBuilder::new(self.nrows + other.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            b.push(r, c, v);
        }
        for (r, c, v) in other.iter() {
            b.push(r + self.nrows, c, v);
        }
        Ok(b.build())
    }

    /// Scales rows by `left` and columns by `right`: `diag(left) A diag(right)`.
    pub fn scale(&mut self, left: &[f64], right: &[f64]) {
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                self.values[p] *= left[self.rowind[p]] * right[c];
            }
        }
    }

    /// Infinity norm of every column.
    pub fn col_inf_norms(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|c| self.values[self.colptr[c]..self.colptr[c + 1]].iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }

    /// Infinity norm of every row.
    pub fn row_inf_norms(&self) -> Vec<f64> {
        let mut n = vec![0.0f64; self.nrows];
        for (r, _, v) in self.iter() {
            n[r] = n[r].max(v.abs());
        }
        n
    }

    /// Row count of non-zeros.
    pub fn row_nnz(&self) -> Vec<usize> {
        let mut n = vec![0usize; self.nrows];
        for &r in &self.rowind {
            n[r] += 1;
        }
        n
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            d[(r, c)] += v;
        }
        d
    }
}
