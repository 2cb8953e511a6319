//! Sparse `L D L'` factorization of quasi-definite matrices (no pivoting).
//!
//! Up-looking algorithm driven by the elimination tree. The input is the
//! upper triangle in CSC form; a fill-reducing permutation is applied first.

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

use super::ordering::{minimum_degree, permute_symmetric};

const NONE: usize = usize::MAX;

/// Symbolic analysis: ordering, elimination tree and column counts of `L`.
#[derive(Clone, Debug)]
struct Symbolic {
    perm: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct LdlFactor {
    n: usize,
    sym: Symbolic,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

fn analyze(upper: &CscMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = upper.ncols;
    let mut etree = vec![NONE; n];
    let mut flag = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for p in upper.colptr[k]..upper.colptr[k + 1] {
            let mut i = upper.rowind[p];
            if i > k {
                return Err(Error::Factorization("matrix is not upper triangular".into()));
            }
            while flag[i] != k {
                if etree[i] == NONE {
                    etree[i] = k;
                }
                lnz[i] += 1;
                flag[i] = k;
                i = etree[i];
            }
        }
    }
    let mut lp = vec![0usize; n + 1];
    for k in 0..n {
        lp[k + 1] = lp[k] + lnz[k];
    }
    Ok((etree, lp))
}

impl LdlFactor {
    /// Orders, analyzes and factors the symmetric matrix given by its upper triangle.
    pub fn new(upper: &CscMatrix) -> Result<Self> {
        let perm = minimum_degree(upper);
        Self::with_permutation(upper, perm)
    }

    pub fn with_permutation(upper: &CscMatrix, perm: Vec<usize>) -> Result<Self> {
        if upper.nrows != upper.ncols || perm.len() != upper.ncols {
            return Err(Error::Dimension("LDL needs a square matrix and matching permutation".into()));
        }
        let permuted = permute_symmetric(upper, &perm);
        let (etree, lp) = analyze(&permuted)?;
        let nnz = lp[upper.ncols];
        let mut f = Self {
            n: upper.ncols,
            sym: Symbolic { perm, etree, lp },
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; upper.ncols],
        };
        f.numeric(&permuted)?;
        Ok(f)
    }

    /// Refactors a matrix with the same sparsity pattern (e.g. after a penalty update).
    pub fn refactor(&mut self, upper: &CscMatrix) -> Result<()> {
        let permuted = permute_symmetric(upper, &self.sym.perm);
        let (etree, lp) = analyze(&permuted)?;
        if etree != self.sym.etree || lp != self.sym.lp {
            *self = Self::with_permutation(upper, self.sym.perm.clone())?;
            return Ok(());
        }
        self.numeric(&permuted)
    }

    fn numeric(&mut self, a: &CscMatrix) -> Result<()> {
        let n = self.n;
        let etree = &self.sym.etree;
        let lp = &self.sym.lp;
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in a.colptr[k]..a.colptr[k + 1] {
                let mut i = a.rowind[p];
                y[i] += a.values[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = etree[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = lp[i];
                let end = start + lnz[i];
                for p in start..end {
                    y[self.li[p]] -= self.lx[p] * yi;
                }
                let l_ki = yi / self.d[i];
                dk -= l_ki * yi;
                self.li[end] = k;
                self.lx[end] = l_ki;
                lnz[i] += 1;
            }
            if dk == 0.0 || !dk.is_finite() {
                return Err(Error::Factorization(format!("zero or non-finite pivot at column {k}")));
            }
            self.d[k] = dk;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lx.len()
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let perm = &self.sym.perm;
        let lp = &self.sym.lp;
        let mut x: Vec<f64> = perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in lp[j]..lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in lp[j]..lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        for (new, &old) in perm.iter().enumerate() {
            b[old] = x[new];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
