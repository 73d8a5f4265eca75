//! Left-looking sparse LU (Gilbert–Peierls) with threshold partial pivoting.
//!
//! Factors `P A Q = L U` where `Q` is a fill-reducing column order supplied by
//! the caller and `P` is chosen during elimination, preferring the diagonal
//! entry of the permuted matrix when it is within `diag_preference` of the
//! column maximum. `L` is unit lower triangular with its diagonal stored first
//! in each column; `U` keeps its diagonal last.

use num_complex::Complex64;

use super::sparse::ComplexCsc;
use super::{CMat, PIVOT_TOLERANCE, ZERO};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<Complex64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<Complex64>,
    /// original row -> pivot step
    pinv: Vec<usize>,
    /// pivot step -> original column
    q: Vec<usize>,
}

struct Workspace {
    x: Vec<Complex64>,
    xi: Vec<usize>,
    stack: Vec<usize>,
    pstack: Vec<usize>,
    mark: Vec<usize>,
}

impl SparseLu {
    /// Returns `None` on a structurally or numerically singular matrix; a pivot
    /// smaller than [`PIVOT_TOLERANCE`] times the largest pivot counts as
    /// singular.
    pub fn factor(a: &ComplexCsc, q: &[usize], diag_preference: f64) -> Option<Self> {
        let n = a.dim();
        assert_eq!(q.len(), n, "column order length");
        let cap = 4 * a.nnz() + n;
        let mut lu = SparseLu {
            n,
            l_ptr: Vec::with_capacity(n + 1),
            l_idx: Vec::with_capacity(cap),
            l_val: Vec::with_capacity(cap),
            u_ptr: Vec::with_capacity(n + 1),
            u_idx: Vec::with_capacity(cap),
            u_val: Vec::with_capacity(cap),
            pinv: vec![NONE; n],
            q: q.to_vec(),
        };
        let mut ws = Workspace {
            x: vec![ZERO; n],
            xi: vec![0; n],
            stack: vec![0; n],
            pstack: vec![0; n],
            mark: vec![NONE; n],
        };
        let mut max_pivot = 0.0_f64;
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            lu.l_ptr.push(lu.l_idx.len());
            lu.u_ptr.push(lu.u_idx.len());
            let col = q[k];
            let top = lu.spsolve(a, col, k, &mut ws);

            let mut ipiv = NONE;
            let mut best = -1.0_f64;
            for p in top..n {
                let i = ws.xi[p];
                if lu.pinv[i] == NONE {
                    let t = ws.x[i].norm();
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    lu.u_idx.push(lu.pinv[i]);
                    lu.u_val.push(ws.x[i]);
                }
            }
            if ipiv == NONE || best <= 0.0 || !best.is_finite() {
                return None;
            }
            if lu.pinv[col] == NONE && ws.x[col].norm() >= best * diag_preference {
                ipiv = col;
            }
            let pivot = ws.x[ipiv];
            max_pivot = max_pivot.max(pivot.norm());
            min_pivot = min_pivot.min(pivot.norm());
            lu.u_idx.push(k);
            lu.u_val.push(pivot);
            lu.pinv[ipiv] = k;
            lu.l_idx.push(ipiv);
            lu.l_val.push(Complex64::new(1.0, 0.0));
            for p in top..n {
                let i = ws.xi[p];
                if lu.pinv[i] == NONE {
                    lu.l_idx.push(i);
                    lu.l_val.push(ws.x[i] / pivot);
                }
                ws.x[i] = ZERO;
            }
        }
        lu.l_ptr.push(lu.l_idx.len());
        lu.u_ptr.push(lu.u_idx.len());
        for i in lu.l_idx.iter_mut() {
            *i = lu.pinv[*i];
        }
        if n > 0 && min_pivot < PIVOT_TOLERANCE * max_pivot {
            return None;
        }
        Some(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U` together.
    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    /// x = L \ A(:, col), nonzero pattern returned in ws.xi[top..n].
    fn spsolve(&self, a: &ComplexCsc, col: usize, stamp: usize, ws: &mut Workspace) -> usize {
        let (ap, ai, ax) = (a.col_ptr(), a.row_idx(), a.values());
        let mut top = self.n;
        for p in ap[col]..ap[col + 1] {
            let i = ai[p];
            if ws.mark[i] != stamp {
                top = self.reach_dfs(i, top, stamp, ws);
            }
        }
        for p in top..self.n {
            ws.x[ws.xi[p]] = ZERO;
        }
        for p in ap[col]..ap[col + 1] {
            ws.x[ai[p]] = ax[p];
        }
        for px in top..self.n {
            let j = ws.xi[px];
            let jcol = self.pinv[j];
            if jcol == NONE {
                continue;
            }
            let xj = ws.x[j];
            if xj == ZERO {
                continue;
            }
            for p in self.l_ptr[jcol] + 1..self.l_ptr[jcol + 1] {
                ws.x[self.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        top
    }

    /// Depth-first search through the graph of the partially built `L`,
    /// pushing nodes onto xi[..top] in reverse topological order.
    fn reach_dfs(&self, root: usize, mut top: usize, stamp: usize, ws: &mut Workspace) -> usize {
        let mut head = 0usize;
        ws.stack[0] = root;
        loop {
            let j = ws.stack[head];
            let jcol = self.pinv[j];
            if ws.mark[j] != stamp {
                ws.mark[j] = stamp;
                ws.pstack[head] = if jcol == NONE { 0 } else { self.l_ptr[jcol] };
            }
            let end = if jcol == NONE { 0 } else { self.col_end(jcol) };
            let mut descended = false;
            let mut p = ws.pstack[head];
            while p < end {
                let i = self.l_idx[p];
                p += 1;
                if ws.mark[i] == stamp {
                    continue;
                }
                ws.pstack[head] = p;
                head += 1;
                ws.stack[head] = i;
                descended = true;
                break;
            }
            if !descended {
                top -= 1;
                ws.xi[top] = j;
                if head == 0 {
                    break;
                }
                head -= 1;
            }
        }
        top
    }

    fn col_end(&self, jcol: usize) -> usize {
        // the column being built has no end pointer yet; earlier ones do
        if jcol + 1 < self.l_ptr.len() {
            self.l_ptr[jcol + 1]
        } else {
            self.l_idx.len()
        }
    }

    fn solve_vec(&self, b: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let mut y = vec![ZERO; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            if yj == ZERO {
                continue;
            }
            for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                y[self.l_idx[p]] -= self.l_val[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let last = self.u_ptr[j + 1] - 1;
            y[j] /= self.u_val[last];
            let yj = y[j];
            if yj == ZERO {
                continue;
            }
            for p in self.u_ptr[j]..last {
                y[self.u_idx[p]] -= self.u_val[p] * yj;
            }
        }
        for k in 0..n {
            out[self.q[k]] = y[k];
        }
    }

    fn solve_transposed_vec(&self, b: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let mut z: Vec<Complex64> = (0..n).map(|k| b[self.q[k]]).collect();
        for j in 0..n {
            let last = self.u_ptr[j + 1] - 1;
            let mut acc = z[j];
            for p in self.u_ptr[j]..last {
                acc -= self.u_val[p] * z[self.u_idx[p]];
            }
            z[j] = acc / self.u_val[last];
        }
        for j in (0..n).rev() {
            let mut acc = z[j];
            for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                acc -= self.l_val[p] * z[self.l_idx[p]];
            }
            z[j] = acc;
        }
        for i in 0..n {
            out[i] = z[self.pinv[i]];
        }
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        self.solve_columns(b, false)
    }

    /// Solves `A^T x = b` with the plain transpose.
    pub fn solve_transposed(&self, b: &CMat) -> CMat {
        self.solve_columns(b, true)
    }

    fn solve_columns(&self, b: &CMat, transposed: bool) -> CMat {
        assert_eq!(b.nrows(), self.n, "right-hand side row count");
        let mut x = CMat::zeros(self.n, b.ncols());
        for c in 0..b.ncols() {
            let col: Vec<Complex64> = b.column(c).iter().copied().collect();
            let mut out = vec![ZERO; self.n];
            if transposed {
                self.solve_transposed_vec(&col, &mut out);
            } else {
                self.solve_vec(&col, &mut out);
            }
            x.column_mut(c).copy_from_slice(&out);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ordering::{nested_dissection, Graph};
    use crate::linalg::sparse::CscMatrix;
    use crate::linalg::DenseLu;

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / (1u64 << 53) as f64
    }

    fn random_sparse(n: usize, per_col: usize, seed: u64) -> CscMatrix {
        let mut s = seed;
        let mut t = Vec::new();
        for j in 0..n {
            t.push((j, j, 0.5 + lcg(&mut s)));
            for _ in 0..per_col {
                let i = (lcg(&mut s) * n as f64) as usize % n;
                t.push((i, j, lcg(&mut s) - 0.5));
            }
        }
        CscMatrix::from_triplets(n, n, &t)
    }

    fn order_for(a: &ComplexCsc) -> Vec<usize> {
        nested_dissection(&Graph::from_csc_pattern(a.dim(), a.col_ptr(), a.row_idx()))
    }

    #[test]
    fn matches_dense_solves_on_random_nonsymmetric() {
        let n = 150;
        let a = random_sparse(n, 4, 7);
        let sigma = Complex64::new(0.3, 0.8);
        let m = ComplexCsc::combination(n, sigma, &[(Complex64::new(-1.0, 0.0), &a)]);
        let q = order_for(&m);
        let lu = SparseLu::factor(&m, &q, 0.1).unwrap();
        let b = CMat::from_fn(n, 3, |i, j| Complex64::new((i * 7 + j) as f64 % 5.0 - 2.0, j as f64));
        let dense = DenseLu::factor(m.to_dense()).unwrap();
        let x = lu.solve(&b);
        let xd = dense.solve(&b);
        assert!((&x - &xd).norm() <= 1e-11 * xd.norm());
        assert!((m.mul_dense(&x) - &b).norm() <= 1e-12 * b.norm());
        let y = lu.solve_transposed(&b);
        assert!((m.to_dense().transpose() * &y - &b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn natural_order_also_works_with_row_pivoting() {
        // zero diagonal forces off-diagonal pivots
        let t = [(1, 0, 2.0), (0, 1, 3.0), (2, 2, 1.0), (0, 2, 1.0)];
        let a = CscMatrix::from_triplets(3, 3, &t);
        let m = ComplexCsc::combination(3, ZERO, &[(Complex64::new(1.0, 0.0), &a)]);
        let lu = SparseLu::factor(&m, &[0, 1, 2], 0.1).unwrap();
        let b = CMat::from_column_slice(3, 1, &[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0)]);
        let x = lu.solve(&b);
        assert!((m.mul_dense(&x) - &b).norm() < 1e-14);
        let y = lu.solve_transposed(&b);
        assert!((m.to_dense().transpose() * y - &b).norm() < 1e-14);
    }

    #[test]
    fn singular_matrices_are_rejected() {
        let a = CscMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        // I - A = 0
        let m = ComplexCsc::combination(3, Complex64::new(1.0, 0.0), &[(Complex64::new(-1.0, 0.0), &a)]);
        assert!(SparseLu::factor(&m, &[0, 1, 2], 0.1).is_none());
        let t = [(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0 + 1e-16), (2, 2, 1.0)];
        let a = CscMatrix::from_triplets(3, 3, &t);
        let m = ComplexCsc::combination(3, ZERO, &[(Complex64::new(1.0, 0.0), &a)]);
        assert!(SparseLu::factor(&m, &[0, 1, 2], 0.1).is_none());
    }
}
