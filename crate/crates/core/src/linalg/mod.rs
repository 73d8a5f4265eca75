//! Dense complex helpers shared by every module, plus the sparse storage and
//! factorization used for full-order shifted solves.

pub mod ordering;
pub mod sparse;
pub mod splu;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative pivot threshold below which a factorization is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Thin Householder QR: `a = q * r` with `q` of size n×k and `r` k×k.
pub fn thin_qr(a: &CMat) -> (CMat, CMat) {
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Singular value decomposition sorted in decreasing order: `a = u * diag(s) * v_h`.
pub fn svd_sorted(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_h = svd.v_t.expect("right singular vectors requested");
    (u, svd.singular_values.iter().copied().collect(), v_h)
}

/// Rotates every column so that its first entry of non-negligible modulus is
/// real and positive. Makes singular-vector outputs reproducible.
pub fn normalize_column_phases(m: &mut CMat) {
    for mut col in m.column_iter_mut() {
        let scale = col.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        if scale == 0.0 {
            continue;
        }
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-10 * scale).copied() {
            let phase = lead.conj() / lead.norm();
            col.iter_mut().for_each(|z| *z *= phase);
        }
    }
}

/// Eigenvalues of a general complex matrix through the complex Schur form.
pub fn eigenvalues(a: &CMat) -> Vec<Complex64> {
    let n = a.nrows();
    match n {
        0 => return Vec::new(),
        1 => return vec![a[(0, 0)]],
        _ => {}
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10))
        .unwrap_or_else(|| Schur::new(a.clone()));
    let (_, t) = schur.unpack();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        let sub = if k + 1 < n { t[(k + 1, k)].norm() } else { 0.0 };
        let scale = t[(k, k)].norm() + if k + 1 < n { t[(k + 1, k + 1)].norm() } else { 0.0 };
        if k + 1 < n && sub > f64::EPSILON * scale.max(f64::MIN_POSITIVE) {
            let (l1, l2) = eig2x2(t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
            out.push(l1);
            out.push(l2);
            k += 2;
        } else {
            out.push(t[(k, k)]);
            k += 1;
        }
    }
    out
}

fn eig2x2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    (half_tr + root, half_tr - root)
}

/// Dense LU with partial pivoting, `P A = L U`. Supports plain (non-conjugate)
/// transposed solves from the same factors.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: CMat,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Returns `None` when a pivot falls below [`PIVOT_TOLERANCE`] relative to
    /// the largest pivot.
    pub fn factor(mut a: CMat) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut piv, mut best) = (k, a[(k, k)].norm());
            for i in k + 1..n {
                let v = a[(i, k)].norm();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if piv != k {
                a.swap_rows(piv, k);
                perm.swap(piv, k);
            }
            let inv = ONE / a[(k, k)];
            for i in k + 1..n {
                a[(i, k)] *= inv;
            }
            for j in k + 1..n {
                let akj = a[(k, j)];
                if akj == ZERO {
                    continue;
                }
                for i in k + 1..n {
                    let lik = a[(i, k)];
                    a[(i, j)] -= lik * akj;
                }
            }
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for k in 0..n {
            let v = a[(k, k)].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if n > 0 && lo < PIVOT_TOLERANCE * hi {
            return None;
        }
        Some(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Ratio of the largest to the smallest pivot; a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        let diag: Vec<f64> = (0..self.dim()).map(|k| self.lu[(k, k)].norm()).collect();
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let mut x = CMat::from_fn(n, b.ncols(), |i, j| b[(self.perm[i], j)]);
        for mut col in x.column_iter_mut() {
            for k in 0..n {
                let xk = col[k];
                if xk == ZERO {
                    continue;
                }
                for i in k + 1..n {
                    col[i] -= self.lu[(i, k)] * xk;
                }
            }
            for k in (0..n).rev() {
                col[k] /= self.lu[(k, k)];
                let xk = col[k];
                for i in 0..k {
                    col[i] -= self.lu[(i, k)] * xk;
                }
            }
        }
        x
    }

    /// Solves `A^T x = b` (transpose, not conjugate transpose).
    pub fn solve_transposed(&self, b: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let mut z = b.clone();
        for mut col in z.column_iter_mut() {
            // U^T y = b
            for k in 0..n {
                let mut acc = col[k];
                for i in 0..k {
                    acc -= self.lu[(i, k)] * col[i];
                }
                col[k] = acc / self.lu[(k, k)];
            }
            // L^T z = y
            for k in (0..n).rev() {
                let mut acc = col[k];
                for i in k + 1..n {
                    acc -= self.lu[(i, k)] * col[i];
                }
                col[k] = acc;
            }
        }
        let mut x = CMat::zeros(n, b.ncols());
        for k in 0..n {
            for j in 0..b.ncols() {
                x[(self.perm[k], j)] = z[(k, j)];
            }
        }
        x
    }
}

/// `omega * I - a` for a square dense matrix.
pub fn shifted_identity_minus(a: &CMat, omega: Complex64) -> CMat {
    let mut m = -a.clone();
    for k in 0..m.nrows() {
        m[(k, k)] += omega;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_matrix(n: usize, seed: u64) -> CMat {
        let mut state = seed;
        CMat::from_fn(n, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((state >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((state >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            c(a, b)
        })
    }

    #[test]
    fn dense_lu_solves_and_transposed_solves() {
        let a = test_matrix(12, 3);
        let b = test_matrix(12, 4).columns(0, 3).into_owned();
        let lu = DenseLu::factor(a.clone()).unwrap();
        let x = lu.solve(&b);
        assert!((&a * &x - &b).norm() < 1e-12 * b.norm());
        let y = lu.solve_transposed(&b);
        assert!((a.transpose() * &y - &b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn dense_lu_flags_singular() {
        let mut a = test_matrix(5, 9);
        let row = a.row(0).into_owned();
        a.set_row(3, &(row * c(2.0, -1.0)));
        assert!(DenseLu::factor(a).is_none());
        assert!(DenseLu::factor(CMat::zeros(3, 3)).is_none());
    }

    #[test]
    fn eigenvalues_of_triangular_and_rotated() {
        let mut t = CMat::zeros(4, 4);
        let vals = [c(-1.0, 0.0), c(-2.0, 1.0), c(-2.0, -1.0), c(-0.5, 3.0)];
        for (k, v) in vals.iter().enumerate() {
            t[(k, k)] = *v;
            if k + 1 < 4 {
                t[(k, k + 1)] = c(0.3, 0.1);
            }
        }
        let x = test_matrix(4, 11) + CMat::identity(4, 4) * c(2.0, 0.0);
        let xi = DenseLu::factor(x.clone()).unwrap().solve(&CMat::identity(4, 4));
        let a = &x * t * xi;
        let mut got = eigenvalues(&a);
        for v in vals {
            let (idx, d) = got
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - v).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!(d < 1e-10, "eigenvalue {v} missed by {d}");
            got.remove(idx);
        }
    }

    #[test]
    fn eigenvalues_of_real_rotation_are_conjugate_pair() {
        let a = CMat::from_row_slice(2, 2, &[c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)]);
        let mut ev = eigenvalues(&a);
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - c(-1.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - c(-1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn phase_normalization_makes_leading_entry_positive() {
        let mut m = CMat::from_column_slice(3, 1, &[c(0.0, 0.0), c(0.0, -2.0), c(1.0, 1.0)]);
        normalize_column_phases(&mut m);
        assert!((m[(1, 0)] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((m.norm() - (4.0f64 + 2.0).sqrt()).abs() < 1e-14);
    }
}
