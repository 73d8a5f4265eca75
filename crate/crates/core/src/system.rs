//! State-space realizations and exact transfer-function evaluation.

use num_complex::Complex64;

use crate::error::{MorError, Result};
use crate::linalg::sparse::CscMatrix;
use crate::linalg::{shifted_identity_minus, to_complex, CMat, DenseLu, RMat};
use crate::solver::{factorize_with, PatternOrdering, ShiftedFactorization};

/// Anything with a p×p transfer matrix that can be sampled pointwise.
pub trait TransferFunction: Sync {
    fn ports(&self) -> usize;
    fn transfer(&self, omega: Complex64) -> Result<CMat>;
}

/// Operator access needed by the Lanczos recurrence: products with `A`,
/// `A^T`, and solves with `omega*I - A` and its plain transpose.
pub trait StateSpace: Sync {
    type Factor: Send + Sync;

    fn order(&self) -> usize;
    fn ports(&self) -> usize;
    /// `B`, n×p.
    fn input(&self) -> &CMat;
    /// `C^T`, n×p.
    fn output_transposed(&self) -> &CMat;
    fn apply(&self, x: &CMat) -> CMat;
    fn apply_transposed(&self, x: &CMat) -> CMat;
    fn factorize(&self, omega: Complex64) -> Result<Self::Factor>;
    fn solve(&self, f: &Self::Factor, rhs: &CMat) -> CMat;
    fn solve_transposed(&self, f: &Self::Factor, rhs: &CMat) -> CMat;
}

/// Sparse realization `x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone)]
pub struct FirstOrderSystem {
    a: CscMatrix,
    b: RMat,
    c: RMat,
    b_cplx: CMat,
    ct_cplx: CMat,
    ordering: PatternOrdering,
}

impl FirstOrderSystem {
    pub fn new(a: CscMatrix, b: RMat, c: RMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(MorError::DimensionMismatch(format!("A is {}x{}, not square", n, a.ncols())));
        }
        let p = b.ncols();
        if b.nrows() != n {
            return Err(MorError::DimensionMismatch(format!("B has {} rows, A has {n}", b.nrows())));
        }
        if c.nrows() != p || c.ncols() != n {
            return Err(MorError::DimensionMismatch(format!(
                "C is {}x{}, expected {p}x{n}",
                c.nrows(),
                c.ncols()
            )));
        }
        if p == 0 || n < p {
            return Err(MorError::DimensionMismatch(format!("need 1 <= p <= n, got p={p}, n={n}")));
        }
        let b_cplx = to_complex(&b);
        let ct_cplx = to_complex(&c.transpose());
        Ok(Self {
            a,
            b,
            c,
            b_cplx,
            ct_cplx,
            ordering: PatternOrdering::new(),
        })
    }

    pub fn a(&self) -> &CscMatrix {
        &self.a
    }

    pub fn b(&self) -> &RMat {
        &self.b
    }

    pub fn c(&self) -> &RMat {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn factorize_shift(&self, sigma: Complex64) -> Result<ShiftedFactorization> {
        factorize_with(&self.a, sigma, &self.ordering)
    }
}

impl StateSpace for FirstOrderSystem {
    type Factor = ShiftedFactorization;

    fn order(&self) -> usize {
        self.n()
    }

    fn ports(&self) -> usize {
        self.p()
    }

    fn input(&self) -> &CMat {
        &self.b_cplx
    }

    fn output_transposed(&self) -> &CMat {
        &self.ct_cplx
    }

    fn apply(&self, x: &CMat) -> CMat {
        self.a.mul_dense(x)
    }

    fn apply_transposed(&self, x: &CMat) -> CMat {
        self.a.tr_mul_dense(x)
    }

    fn factorize(&self, omega: Complex64) -> Result<ShiftedFactorization> {
        self.factorize_shift(omega)
    }

    fn solve(&self, f: &ShiftedFactorization, rhs: &CMat) -> CMat {
        f.solve_unchecked(rhs)
    }

    fn solve_transposed(&self, f: &ShiftedFactorization, rhs: &CMat) -> CMat {
        f.solve_transposed_unchecked(rhs)
    }
}

impl TransferFunction for FirstOrderSystem {
    fn ports(&self) -> usize {
        self.p()
    }

    fn transfer(&self, omega: Complex64) -> Result<CMat> {
        eval_transfer(self, omega)
    }
}

/// `H(omega) = C (omega I - A)^{-1} B` for any realization.
pub fn eval_transfer<S: StateSpace>(sys: &S, omega: Complex64) -> Result<CMat> {
    let f = sys.factorize(omega)?;
    let x = sys.solve(&f, sys.input());
    Ok(sys.output_transposed().transpose() * x)
}

/// `C (sigma I - A)^{-(i+1)} B`, by i+1 solves with one factorization.
/// Equals `(-1)^i / i!` times the i-th derivative of `H` at `sigma`.
pub fn moment<S: StateSpace>(sys: &S, sigma: Complex64, i: usize) -> Result<CMat> {
    let f = sys.factorize(sigma)?;
    let mut x = sys.solve(&f, sys.input());
    for _ in 0..i {
        x = sys.solve(&f, &x);
    }
    Ok(sys.output_transposed().transpose() * x)
}

/// `C A^i B`.
pub fn markov_parameter(sys: &FirstOrderSystem, i: usize) -> RMat {
    let mut x = sys.b().clone();
    for _ in 0..i {
        x = sys.a().mul_real(&x);
    }
    sys.c() * x
}

/// Dense reduced triple. Complex because shifts and directions are complex.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub am: CMat,
    pub bm: CMat,
    pub cm: CMat,
    /// completed iterations
    pub m: usize,
    /// block width
    pub s: usize,
}

impl ReducedModel {
    pub fn new(am: CMat, bm: CMat, cm: CMat, m: usize, s: usize) -> Result<Self> {
        let k = am.nrows();
        if am.ncols() != k || bm.nrows() != k || cm.ncols() != k || cm.nrows() != bm.ncols() {
            return Err(MorError::DimensionMismatch(format!(
                "reduced triple {}x{}, {}x{}, {}x{}",
                am.nrows(),
                am.ncols(),
                bm.nrows(),
                bm.ncols(),
                cm.nrows(),
                cm.ncols()
            )));
        }
        Ok(Self { am, bm, cm, m, s })
    }

    pub fn order(&self) -> usize {
        self.am.nrows()
    }

    pub fn p(&self) -> usize {
        self.bm.ncols()
    }

    /// `i`-th moment of the reduced transfer function.
    pub fn moment(&self, sigma: Complex64, i: usize) -> Result<CMat> {
        let lu = DenseLu::factor(shifted_identity_minus(&self.am, sigma)).ok_or(MorError::SingularShift { shift: sigma })?;
        let mut x = lu.solve(&self.bm);
        for _ in 0..i {
            x = lu.solve(&x);
        }
        Ok(&self.cm * x)
    }
}

/// `H_m(omega) = C_m (omega I - A_m)^{-1} B_m`.
pub fn eval_reduced_transfer(rm: &ReducedModel, omega: Complex64) -> Result<CMat> {
    rm.moment(omega, 0)
}

impl TransferFunction for ReducedModel {
    fn ports(&self) -> usize {
        self.p()
    }

    fn transfer(&self, omega: Complex64) -> Result<CMat> {
        eval_reduced_transfer(self, omega)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_transfer() {
        let sys = FirstOrderSystem::new(
            CscMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]),
            RMat::from_element(1, 1, 1.0),
            RMat::from_element(1, 1, 1.0),
        )
        .unwrap();
        let h = eval_transfer(&sys, c(0.0, 1.0)).unwrap();
        assert!((h[(0, 0)] - ONE / c(1.0, 1.0)).norm() < 1e-15);
        assert!((h[(0, 0)].norm() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_case_moments() {
        let a = CscMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (1, 1, -1.0)]);
        let b = RMat::from_column_slice(2, 1, &[1.0, 0.0]);
        let sys = FirstOrderSystem::new(a, b.clone(), b.transpose()).unwrap();
        assert!((eval_transfer(&sys, c(0.0, 0.0)).unwrap()[(0, 0)] - ONE).norm() < 1e-15);
        assert!((moment(&sys, ONE, 0).unwrap()[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((moment(&sys, ONE, 1).unwrap()[(0, 0)] - c(0.25, 0.0)).norm() < 1e-15);
        assert_eq!(markov_parameter(&sys, 0), RMat::from_element(1, 1, 1.0));
    }

    #[test]
    fn markov_with_identity_a() {
        let b = RMat::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, -1.0, 3.0]);
        let sys = FirstOrderSystem::new(CscMatrix::identity(3), b.clone(), b.transpose()).unwrap();
        assert_eq!(markov_parameter(&sys, 4), b.transpose() * &b);
    }

    #[test]
    fn scalar_reduced_transfer() {
        let one = CMat::from_element(1, 1, ONE);
        let rm = ReducedModel::new(CMat::from_element(1, 1, c(-2.0, 0.0)), one.clone(), one, 1, 1).unwrap();
        assert!((eval_reduced_transfer(&rm, c(0.0, 0.0)).unwrap()[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let a = CscMatrix::identity(3);
        assert!(FirstOrderSystem::new(a.clone(), RMat::zeros(2, 1), RMat::zeros(1, 3)).is_err());
        assert!(FirstOrderSystem::new(a.clone(), RMat::zeros(3, 1), RMat::zeros(2, 3)).is_err());
        assert!(FirstOrderSystem::new(a, RMat::zeros(3, 0), RMat::zeros(0, 3)).is_err());
        let singular = FirstOrderSystem::new(CscMatrix::identity(2), RMat::zeros(2, 1), RMat::zeros(1, 2)).unwrap();
        assert!(matches!(eval_transfer(&singular, ONE), Err(MorError::SingularShift { .. })));
    }
}
