//! Second-order systems `M q'' + D q' + K q = B u`, `y = C q`: mass
//! normalization, the implicit first-order linearization, and the
//! structure-preserving block-diagonal projection.

use num_complex::Complex64;

use crate::adaptive::{run_abtl, AbtlOptions, AbtlOutput};
use crate::error::{MorError, Result};
use crate::linalg::sparse::CscMatrix;
use crate::linalg::{svd_sorted, to_complex, CMat, RMat, ONE, ZERO};
use crate::solver::{factor_combination, PatternOrdering, ShiftedFactorization};
use crate::system::{FirstOrderSystem, ReducedModel, StateSpace, TransferFunction};

/// Coupling blocks with a larger condition number count as structure loss.
pub const STRUCTURE_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct SecondOrderSystem {
    m: Option<CscMatrix>,
    d: CscMatrix,
    k: CscMatrix,
    b: RMat,
    c: RMat,
    ordering: PatternOrdering,
}

fn check_square(name: &str, m: &CscMatrix, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(MorError::DimensionMismatch(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl SecondOrderSystem {
    /// `m = None` means the identity mass matrix.
    pub fn new(m: Option<CscMatrix>, d: CscMatrix, k: CscMatrix, b: RMat, c: RMat) -> Result<Self> {
        let n = k.nrows();
        check_square("K", &k, n)?;
        check_square("D", &d, n)?;
        if let Some(m) = &m {
            check_square("M", m, n)?;
        }
        let p = b.ncols();
        if b.nrows() != n || c.nrows() != p || c.ncols() != n || p == 0 || p > n {
            return Err(MorError::DimensionMismatch(format!(
                "B is {}x{}, C is {}x{}, n = {n}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self {
            m,
            d,
            k,
            b,
            c,
            ordering: PatternOrdering::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn mass(&self) -> Option<&CscMatrix> {
        self.m.as_ref()
    }

    pub fn damping(&self) -> &CscMatrix {
        &self.d
    }

    pub fn stiffness(&self) -> &CscMatrix {
        &self.k
    }

    pub fn b(&self) -> &RMat {
        &self.b
    }

    pub fn c(&self) -> &RMat {
        &self.c
    }

    /// Factors `omega^2 M + omega D + K`.
    pub fn factor_pencil(&self, omega: Complex64) -> Result<ShiftedFactorization> {
        let n = self.n();
        let w2 = omega * omega;
        let f = match &self.m {
            None => factor_combination(n, w2, &[(omega, &self.d), (ONE, &self.k)], &self.ordering, omega),
            Some(m) => factor_combination(n, ZERO, &[(w2, m), (omega, &self.d), (ONE, &self.k)], &self.ordering, omega),
        };
        f.ok_or(MorError::SingularPencil { omega })
    }

    /// Identity-mass form with `M^{-1}` applied through a factorization.
    pub fn normalize_mass(&self) -> Result<LinearizedSystem> {
        LinearizedSystem::new(self.clone())
    }

    pub fn linearize(&self) -> Result<LinearizedSystem> {
        self.normalize_mass()
    }

    /// First-order realization with the companion matrix stored explicitly.
    /// Needs a diagonal (or absent) mass matrix so the result stays sparse.
    pub fn explicit_linearization(&self) -> Result<FirstOrderSystem> {
        let n = self.n();
        let inv_mass: Vec<f64> = match &self.m {
            None => vec![1.0; n],
            Some(m) => {
                if m.triplets().iter().any(|&(i, j, _)| i != j) {
                    return Err(MorError::Unsupported("explicit linearization needs a diagonal mass matrix".into()));
                }
                let d = m.diagonal();
                if d.contains(&0.0) {
                    return Err(MorError::SingularMass);
                }
                d.iter().map(|v| 1.0 / v).collect()
            }
        };
        let mut t = Vec::with_capacity(n + self.k.nnz() + self.d.nnz());
        for i in 0..n {
            t.push((i, n + i, 1.0));
        }
        for (i, j, v) in self.k.triplets() {
            t.push((n + i, j, -v * inv_mass[i]));
        }
        for (i, j, v) in self.d.triplets() {
            t.push((n + i, n + j, -v * inv_mass[i]));
        }
        let a = CscMatrix::from_triplets(2 * n, 2 * n, &t);
        let p = self.p();
        let mut b = RMat::zeros(2 * n, p);
        for i in 0..n {
            for j in 0..p {
                b[(n + i, j)] = self.b[(i, j)] * inv_mass[i];
            }
        }
        let mut c = RMat::zeros(p, 2 * n);
        c.columns_mut(0, n).copy_from(&self.c);
        FirstOrderSystem::new(a, b, c)
    }
}

/// `F(omega) = C (omega^2 M + omega D + K)^{-1} B`.
pub fn eval_second_order_transfer(sos: &SecondOrderSystem, omega: Complex64) -> Result<CMat> {
    let f = sos.factor_pencil(omega)?;
    Ok(to_complex(&sos.c) * f.solve_unchecked(&to_complex(&sos.b)))
}

impl TransferFunction for SecondOrderSystem {
    fn ports(&self) -> usize {
        self.p()
    }

    fn transfer(&self, omega: Complex64) -> Result<CMat> {
        eval_second_order_transfer(self, omega)
    }
}

/// The 2n-dimensional first-order form with
/// `A = [[0, I], [-M^{-1} K, -M^{-1} D]]`, `B = [0; M^{-1} B]`, `C = [C, 0]`,
/// never stored explicitly.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    sos: SecondOrderSystem,
    mass: Option<ShiftedFactorization>,
    b_lin: CMat,
    ct_lin: CMat,
}

/// Pencil factorization serving shifted solves of the linearization.
#[derive(Debug, Clone)]
pub struct PencilFactor {
    omega: Complex64,
    lu: ShiftedFactorization,
}

impl LinearizedSystem {
    fn new(sos: SecondOrderSystem) -> Result<Self> {
        let n = sos.n();
        let p = sos.p();
        let mass = match &sos.m {
            None => None,
            Some(m) => Some(
                factor_combination(n, ZERO, &[(ONE, m)], &PatternOrdering::new(), ZERO).ok_or(MorError::SingularMass)?,
            ),
        };
        let mut b_lin = CMat::zeros(2 * n, p);
        let bm = match &mass {
            None => to_complex(&sos.b),
            Some(f) => f.solve_unchecked(&to_complex(&sos.b)),
        };
        b_lin.rows_mut(n, n).copy_from(&bm);
        let mut ct_lin = CMat::zeros(2 * n, p);
        ct_lin.rows_mut(0, n).copy_from(&to_complex(&sos.c.transpose()));
        Ok(Self { sos, mass, b_lin, ct_lin })
    }

    pub fn second_order(&self) -> &SecondOrderSystem {
        &self.sos
    }

    pub fn n(&self) -> usize {
        self.sos.n()
    }

    pub fn mass_solve(&self, x: &CMat) -> CMat {
        match &self.mass {
            None => x.clone(),
            Some(f) => f.solve_unchecked(x),
        }
    }

    pub fn mass_solve_transposed(&self, x: &CMat) -> CMat {
        match &self.mass {
            None => x.clone(),
            Some(f) => f.solve_transposed_unchecked(x),
        }
    }

    fn mass_mul(&self, x: &CMat) -> CMat {
        match &self.sos.m {
            None => x.clone(),
            Some(m) => m.mul_dense(x),
        }
    }

    fn mass_tr_mul(&self, x: &CMat) -> CMat {
        match &self.sos.m {
            None => x.clone(),
            Some(m) => m.tr_mul_dense(x),
        }
    }

    /// `M^{-1} D x`.
    pub fn normalized_damping(&self, x: &CMat) -> CMat {
        self.mass_solve(&self.sos.d.mul_dense(x))
    }

    /// `M^{-1} K x`.
    pub fn normalized_stiffness(&self, x: &CMat) -> CMat {
        self.mass_solve(&self.sos.k.mul_dense(x))
    }

    /// `M^{-1} B`.
    pub fn normalized_input(&self) -> CMat {
        self.b_lin.rows(self.n(), self.n()).into_owned()
    }

    /// Dense `[[0, I], [-M^{-1} K, -M^{-1} D]]`; for tests on small systems.
    pub fn dense_matrix(&self) -> CMat {
        let n = self.n();
        let eye = CMat::identity(n, n);
        let mut a = CMat::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).copy_from(&eye);
        a.view_mut((n, 0), (n, n)).copy_from(&-self.normalized_stiffness(&eye));
        a.view_mut((n, n), (n, n)).copy_from(&-self.normalized_damping(&eye));
        a
    }
}

impl StateSpace for LinearizedSystem {
    type Factor = PencilFactor;

    fn order(&self) -> usize {
        2 * self.n()
    }

    fn ports(&self) -> usize {
        self.sos.p()
    }

    fn input(&self) -> &CMat {
        &self.b_lin
    }

    fn output_transposed(&self) -> &CMat {
        &self.ct_lin
    }

    fn apply(&self, x: &CMat) -> CMat {
        let n = self.n();
        let x1 = x.rows(0, n).into_owned();
        let x2 = x.rows(n, n).into_owned();
        let low = -self.mass_solve(&(self.sos.k.mul_dense(&x1) + self.sos.d.mul_dense(&x2)));
        let mut y = CMat::zeros(2 * n, x.ncols());
        y.rows_mut(0, n).copy_from(&x2);
        y.rows_mut(n, n).copy_from(&low);
        y
    }

    fn apply_transposed(&self, x: &CMat) -> CMat {
        let n = self.n();
        let x1 = x.rows(0, n);
        let z = self.mass_solve_transposed(&x.rows(n, n).into_owned());
        let mut y = CMat::zeros(2 * n, x.ncols());
        y.rows_mut(0, n).copy_from(&-self.sos.k.tr_mul_dense(&z));
        y.rows_mut(n, n).copy_from(&(x1 - self.sos.d.tr_mul_dense(&z)));
        y
    }

    fn factorize(&self, omega: Complex64) -> Result<PencilFactor> {
        if !(omega.re.is_finite() && omega.im.is_finite()) {
            return Err(MorError::InfiniteShift);
        }
        Ok(PencilFactor {
            omega,
            lu: self.sos.factor_pencil(omega)?,
        })
    }

    fn solve(&self, f: &PencilFactor, rhs: &CMat) -> CMat {
        let n = self.n();
        let w = f.omega;
        let r1 = rhs.rows(0, n).into_owned();
        let r2 = rhs.rows(n, n).into_owned();
        let t = self.mass_mul(&(&r2 + &r1 * w)) + self.sos.d.mul_dense(&r1);
        let x1 = f.lu.solve_unchecked(&t);
        let x2 = &x1 * w - r1;
        let mut x = CMat::zeros(2 * n, rhs.ncols());
        x.rows_mut(0, n).copy_from(&x1);
        x.rows_mut(n, n).copy_from(&x2);
        x
    }

    fn solve_transposed(&self, f: &PencilFactor, rhs: &CMat) -> CMat {
        let n = self.n();
        let w = f.omega;
        let s1 = rhs.rows(0, n).into_owned();
        let s2 = rhs.rows(n, n).into_owned();
        let z = f.lu.solve_transposed_unchecked(&(s1 + &s2 * w));
        let y2 = self.mass_tr_mul(&z);
        let y1 = &y2 * w + self.sos.d.tr_mul_dense(&z) - s2;
        let mut y = CMat::zeros(2 * n, rhs.ncols());
        y.rows_mut(0, n).copy_from(&y1);
        y.rows_mut(n, n).copy_from(&y2);
        y
    }
}

impl TransferFunction for LinearizedSystem {
    fn ports(&self) -> usize {
        self.sos.p()
    }

    fn transfer(&self, omega: Complex64) -> Result<CMat> {
        crate::system::eval_transfer(self, omega)
    }
}

/// Reduced model `C_m (omega^2 I + omega D_m + K_m)^{-1} B_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderReducedModel {
    pub dm: CMat,
    pub km: CMat,
    pub bm: CMat,
    pub cm: CMat,
    pub m: usize,
    pub s: usize,
}

impl SecondOrderReducedModel {
    pub fn order(&self) -> usize {
        self.dm.nrows()
    }

    pub fn p(&self) -> usize {
        self.bm.ncols()
    }
}

impl TransferFunction for SecondOrderReducedModel {
    fn ports(&self) -> usize {
        self.p()
    }

    fn transfer(&self, omega: Complex64) -> Result<CMat> {
        let k = self.order();
        let mut pencil = &self.dm * omega + &self.km;
        for i in 0..k {
            pencil[(i, i)] += omega * omega;
        }
        let lu = crate::linalg::DenseLu::factor(pencil).ok_or(MorError::SingularPencil { omega })?;
        Ok(&self.cm * lu.solve(&self.bm))
    }
}

#[derive(Debug, Clone)]
pub struct SecondOrderReduction {
    pub model: SecondOrderReducedModel,
    /// `diag(W1, W2)^T A diag(V1, V2)` and the projected input/output
    pub projected: ReducedModel,
    /// condition number of the coupling block `W1^T V2`
    pub coupling_condition: f64,
    pub abtl: AbtlOutput,
}

/// Rescales a half-basis pair so that `w^T v = I`.
fn biorthonormal_halves(v: &CMat, w: &CMat) -> Result<(CMat, CMat)> {
    let (p, d, q_h) = svd_sorted(&(w.transpose() * v));
    let hi = d.first().copied().unwrap_or(0.0);
    let lo = d.last().copied().unwrap_or(0.0);
    if hi == 0.0 || lo < hi / STRUCTURE_CONDITION_LIMIT {
        return Err(MorError::StructureLoss {
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        });
    }
    let scale = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        d.len(),
        d.iter().map(|&x| Complex64::new(1.0 / x.sqrt(), 0.0)),
    ));
    Ok((v * q_h.adjoint() * &scale, w * p.map(|z| z.conj()) * scale))
}

/// Block-diagonal projection of the linearization with bases `v`, `w`
/// (2n×k each). Returns the second-order reduced model, the projected
/// first-order triple and the coupling condition number.
pub fn structure_preserving_projection(
    lin: &LinearizedSystem,
    v: &CMat,
    w: &CMat,
    m: usize,
    s: usize,
) -> Result<(SecondOrderReducedModel, ReducedModel, f64)> {
    let n = lin.n();
    if v.nrows() != 2 * n || w.nrows() != 2 * n || v.ncols() != w.ncols() {
        return Err(MorError::DimensionMismatch("bases must be 2n x k".into()));
    }
    let k = v.ncols();
    if k > n {
        return Err(MorError::StructureLoss { condition: f64::INFINITY });
    }
    let (v1, w1) = biorthonormal_halves(&v.rows(0, n).into_owned(), &w.rows(0, n).into_owned())?;
    let (v2, w2) = biorthonormal_halves(&v.rows(n, n).into_owned(), &w.rows(n, n).into_owned())?;
    let e = w1.transpose() * &v2;
    let sv = e.clone().singular_values();
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > STRUCTURE_CONDITION_LIMIT {
        return Err(MorError::StructureLoss { condition });
    }
    let d_hat = w2.transpose() * lin.normalized_damping(&v2);
    let k_hat = w2.transpose() * lin.normalized_stiffness(&v1);
    let b_hat = w2.transpose() * lin.normalized_input();
    let c_hat = to_complex(lin.sos.c()) * &v1;
    let p = lin.sos.p();

    let mut a_proj = CMat::zeros(2 * k, 2 * k);
    a_proj.view_mut((0, k), (k, k)).copy_from(&e);
    a_proj.view_mut((k, 0), (k, k)).copy_from(&-&k_hat);
    a_proj.view_mut((k, k), (k, k)).copy_from(&-&d_hat);
    let mut b_proj = CMat::zeros(2 * k, p);
    b_proj.rows_mut(k, k).copy_from(&b_hat);
    let mut c_proj = CMat::zeros(p, 2 * k);
    c_proj.columns_mut(0, k).copy_from(&c_hat);
    let projected = ReducedModel::new(a_proj, b_proj, c_proj, m, s)?;

    let model = SecondOrderReducedModel {
        dm: d_hat,
        km: k_hat * &e,
        bm: b_hat,
        cm: c_hat * e,
        m,
        s,
    };
    Ok((model, projected, condition))
}

/// Runs the adaptive reduction on the linearization and recovers a reduced
/// model of second-order form.
pub fn reduce_second_order(sos: &SecondOrderSystem, opts: &AbtlOptions) -> Result<SecondOrderReduction> {
    let lin = sos.linearize()?;
    let abtl = run_abtl(&lin, opts)?;
    let (model, projected, coupling_condition) =
        structure_preserving_projection(&lin, abtl.state.v(), abtl.state.w(), abtl.state.iterations(), opts.s)?;
    Ok(SecondOrderReduction {
        model,
        projected,
        coupling_condition,
        abtl,
    })
}
