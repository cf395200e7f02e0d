//! Compressed sparse row storage.

use crate::error::{invalid, Result};

/// Square or rectangular matrix in compressed row form; column indices are
/// sorted and unique within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates in the
    /// order they appear.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|&&(i, j, _)| i >= nrows || j >= ncols) {
            return invalid(format!("entry ({i}, {j}) outside a {nrows}x{ncols} matrix"));
        }
        let mut count = vec![0usize; nrows + 1];
        for &(i, _, _) in triplets {
            count[i + 1] += 1;
        }
        for i in 0..nrows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut perm: Vec<usize> = Vec::new();
        for i in 0..nrows {
            let (lo, hi) = (count[i], count[i + 1]);
            perm.clear();
            perm.extend(lo..hi);
            // stable sort keeps the summation order of duplicates fixed
            perm.sort_by_key(|&k| cols[k]);
            for &k in &perm {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == cols[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return invalid(format!("vector of length {} for a matrix with {} columns", x.len(), self.ncols));
        }
        Ok((0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
            })
            .collect())
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = (0..self.nrows)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(move |(&j, &v)| (j, i, v))
            })
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &triplets).expect("indices in range")
    }

    /// `max |a_ij − a_ji| / max |a_ij|`; zero for a symmetric matrix.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || self.nrows != self.ncols {
            return if self.nrows == self.ncols { 0.0 } else { f64::INFINITY };
        }
        let t = self.transpose();
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            let (cols, vals) = t.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst / scale
    }

    /// Whether the sparsity pattern equals that of the transpose.
    pub fn is_structurally_symmetric(&self) -> bool {
        let t = self.transpose();
        self.row_ptr == t.row_ptr && self.col_idx == t.col_idx
    }
}
