//! Compressed sparse column storage for the real system matrices and their
//! complex linear combinations (shifted matrices, quadratic pencils).

use num_complex::Complex64;

use super::{CMat, RMat, ZERO};

/// Real CSC matrix. Row indices are sorted within each column and duplicate
/// triplets are summed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            rows[next[j]] = i;
            vals[next[j]] = v;
            next[j] += 1;
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..ncols {
            scratch.clear();
            scratch.extend((counts[j]..counts[j + 1]).map(|p| (rows[p], vals[p])));
            scratch.sort_by_key(|&(i, _)| i);
            for &(i, v) in &scratch {
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn from_dense(m: &RMat) -> Self {
        let mut t = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
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

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[r.clone()].binary_search(&i) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            out.extend(self.column(j).map(|(i, v)| (i, j, v)));
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn to_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && *self == self.transpose()
    }

    /// Largest number of stored entries in any row.
    pub fn max_row_nnz(&self) -> usize {
        let mut counts = vec![0usize; self.nrows];
        for &i in &self.row_idx {
            counts[i] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|k| self.get(k, k)).collect()
    }

    /// `self * x` for a complex dense block.
    pub fn mul_dense(&self, x: &CMat) -> CMat {
        assert_eq!(self.ncols, x.nrows(), "sparse product dimension mismatch");
        let mut y = CMat::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut yc = y.column_mut(c);
            for j in 0..self.ncols {
                let xj = xc[j];
                if xj == ZERO {
                    continue;
                }
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    yc[self.row_idx[p]] += xj * self.values[p];
                }
            }
        }
        y
    }

    /// `self^T * x` for a complex dense block.
    pub fn tr_mul_dense(&self, x: &CMat) -> CMat {
        assert_eq!(self.nrows, x.nrows(), "sparse transpose product dimension mismatch");
        let mut y = CMat::zeros(self.ncols, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            for j in 0..self.ncols {
                let mut acc = ZERO;
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    acc += xc[self.row_idx[p]] * self.values[p];
                }
                y[(j, c)] = acc;
            }
        }
        y
    }

    pub fn mul_real(&self, x: &RMat) -> RMat {
        assert_eq!(self.ncols, x.nrows(), "sparse product dimension mismatch");
        let mut y = RMat::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.ncols {
                let xj = x[(j, c)];
                if xj == 0.0 {
                    continue;
                }
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    y[(self.row_idx[p], c)] += xj * self.values[p];
                }
            }
        }
        y
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Square complex CSC matrix, built as `diag_coeff * I + sum_k coeff_k * M_k`.
/// The sparsity pattern is the union of the terms' patterns plus the diagonal,
/// independent of the coefficients, so one fill-reducing ordering serves every
/// shift.
#[derive(Debug, Clone)]
pub struct ComplexCsc {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl ComplexCsc {
    pub fn combination(n: usize, diag_coeff: Complex64, terms: &[(Complex64, &CscMatrix)]) -> Self {
        for (_, m) in terms {
            assert!(m.nrows() == n && m.ncols() == n, "combination needs {n}x{n} terms");
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![ZERO; n];
        let mut marked = vec![usize::MAX; n];
        let mut rows: Vec<usize> = Vec::new();
        col_ptr.push(0);
        for j in 0..n {
            rows.clear();
            marked[j] = j;
            rows.push(j);
            acc[j] = diag_coeff;
            for (coeff, m) in terms {
                for (i, v) in m.column(j) {
                    if marked[i] != j {
                        marked[i] = j;
                        rows.push(i);
                        acc[i] = ZERO;
                    }
                    acc[i] += *coeff * v;
                }
            }
            rows.sort_unstable();
            for &i in &rows {
                row_idx.push(i);
                values.push(acc[i]);
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                m[(self.row_idx[p], j)] += self.values[p];
            }
        }
        m
    }

    pub fn mul_dense(&self, x: &CMat) -> CMat {
        let mut y = CMat::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.n {
                let xj = x[(j, c)];
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    y[(self.row_idx[p], c)] += self.values[p] * xj;
                }
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_complex;

    fn sample() -> CscMatrix {
        CscMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (2, 0, -1.0), (1, 1, 3.0), (0, 2, 4.0), (2, 2, 5.0), (2, 0, 0.5)],
        )
    }

    #[test]
    fn duplicates_are_summed_and_rows_sorted() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(2, 0), -0.5);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.row_idx(), &[0, 2, 1, 0, 2]);
    }

    #[test]
    fn products_match_dense() {
        let a = sample();
        let d = to_complex(&a.to_dense());
        let x = CMat::from_fn(3, 2, |i, j| Complex64::new(i as f64 + 1.0, j as f64 - 0.5));
        assert!((a.mul_dense(&x) - &d * &x).norm() < 1e-14);
        assert!((a.tr_mul_dense(&x) - d.transpose() * &x).norm() < 1e-14);
    }

    #[test]
    fn combination_adds_diagonal_and_terms() {
        let a = sample();
        let s = Complex64::new(1.0, 2.0);
        let m = ComplexCsc::combination(3, s, &[(Complex64::new(-1.0, 0.0), &a)]);
        let expect = CMat::identity(3, 3) * s - to_complex(&a.to_dense());
        assert!((m.to_dense() - expect).norm() < 1e-15);
        assert_eq!(m.nnz(), 5);

        let off = CscMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]);
        let m = ComplexCsc::combination(2, s, &[(Complex64::new(-1.0, 0.0), &off)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.to_dense()[(1, 1)], s);
    }
}
