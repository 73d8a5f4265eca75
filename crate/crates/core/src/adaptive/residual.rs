//! Residual norms of the right and left tangential interpolation problems.
//!
//! With `(I - V W^T) B = Q_B L_B` (skinny QR) the right residual at `omega` is
//! `Q_B L_B [I - R G^{-1} U_B(omega)]`, `U_B = (omega I - A_m)^{-1} B_m`, so
//! its 2-norm is that of the p×p matrix `L_B [...]`. The reduced solves go
//! through a complex Schur form `A_m = Z T Z^H` computed once per iteration,
//! which makes each candidate cost O((ms)^2 p).

use nalgebra::Schur;
use num_complex::Complex64;

use crate::btl::ReductionState;
use crate::error::{MorError, Result};
use crate::linalg::{normalize_column_phases, shifted_identity_minus, spectral_norm, svd_sorted, thin_qr, CMat, DenseLu};
use crate::system::StateSpace;

/// How the reduced resolvent is applied.
#[derive(Debug, Clone)]
enum Resolvent {
    Schur {
        t: CMat,
        /// `R G^{-1} Z`
        xb: CMat,
        /// `Z^H B_m`
        yb: CMat,
        /// `L Q^{-1} conj(Z)`
        xc: CMat,
        /// `Z^T C_m^T`
        yc: CMat,
        scale: f64,
    },
    Dense {
        am: CMat,
        rg: CMat,
        bm: CMat,
        lq: CMat,
        cmt: CMat,
    },
}

#[derive(Debug, Clone)]
pub struct ResidualEvaluator {
    p: usize,
    l_right: CMat,
    l_left: CMat,
    ritz: Vec<Complex64>,
    resolvent: Resolvent,
}

/// `X` with `X * m = rhs`, i.e. `rhs * m^{-1}`.
fn right_divide(rhs: &CMat, m: &CMat) -> Result<CMat> {
    let lu = DenseLu::factor(m.clone()).ok_or(MorError::Breakdown {
        iteration: 0,
        min_singular: 0.0,
        relative: 0.0,
    })?;
    Ok(lu.solve_transposed(&rhs.transpose()).transpose())
}

fn skinny_r(m: &CMat) -> CMat {
    thin_qr(m).1
}

impl ResidualEvaluator {
    pub fn new<S: StateSpace>(state: &ReductionState, sys: &S) -> Result<Self> {
        let rm = state.reduced();
        let asm = state.assemble()?;
        let p = sys.ports();
        let b = sys.input();
        let ct = sys.output_transposed();
        let l_right = skinny_r(&(b - state.v() * &rm.bm));
        let l_left = skinny_r(&(ct - state.w() * rm.cm.transpose()));
        let rg = right_divide(&state.stacked_dirs_right(), &asm.g)?;
        let lq = right_divide(&state.stacked_dirs_left(), &asm.q)?;
        let resolvent = schur_resolvent(&rm.am, &rg, &rm.bm, &lq, &rm.cm.transpose());
        let ritz = match &resolvent {
            Some(Resolvent::Schur { t, .. }) => t.diagonal().iter().copied().collect(),
            _ => crate::linalg::eigenvalues(&rm.am),
        };
        let resolvent = resolvent.unwrap_or(Resolvent::Dense {
            am: rm.am.clone(),
            rg,
            bm: rm.bm.clone(),
            lq,
            cmt: rm.cm.transpose(),
        });
        Ok(Self {
            p,
            l_right,
            l_left,
            ritz,
            resolvent,
        })
    }

    /// Eigenvalues of the projected matrix.
    pub fn ritz_values(&self) -> &[Complex64] {
        &self.ritz
    }

    /// Skinny-QR factors `L_B`, `L_C`.
    pub fn qr_factors(&self) -> (&CMat, &CMat) {
        (&self.l_right, &self.l_left)
    }

    /// p×p matrices `L_B [I - R G^{-1} U_B]` and `L_C [I - L Q^{-1} U_C]`,
    /// or `None` when `omega I - A_m` is numerically singular.
    pub fn reduced_residuals(&self, omega: Complex64) -> Option<(CMat, CMat)> {
        let eye = CMat::identity(self.p, self.p);
        match &self.resolvent {
            Resolvent::Schur { t, xb, yb, xc, yc, scale } => {
                let k = t.nrows();
                if (0..k).any(|i| (omega - t[(i, i)]).norm() <= 1e-14 * scale.max(omega.norm())) {
                    return None;
                }
                let ub = upper_solve(t, omega, yb);
                let uc = lower_solve_transposed(t, omega, yc);
                let mb = &eye - xb * ub;
                let mc = &eye - xc * uc;
                Some((&self.l_right * mb, &self.l_left * mc))
            }
            Resolvent::Dense { am, rg, bm, lq, cmt } => {
                let lu = DenseLu::factor(shifted_identity_minus(am, omega))?;
                let mb = &eye - rg * lu.solve(bm);
                let mc = &eye - lq * lu.solve_transposed(cmt);
                Some((&self.l_right * mb, &self.l_left * mc))
            }
        }
    }

    /// `(||R_B(omega)||_2, ||R_C(omega)||_2)`.
    pub fn norms(&self, omega: Complex64) -> Option<(f64, f64)> {
        let (r, l) = self.reduced_residuals(omega)?;
        Some((spectral_norm(&r), spectral_norm(&l)))
    }

    pub fn residual_norm_right(&self, omega: Complex64) -> Result<f64> {
        self.norms(omega).map(|n| n.0).ok_or(MorError::SingularShift { shift: omega })
    }

    pub fn residual_norm_left(&self, omega: Complex64) -> Result<f64> {
        self.norms(omega).map(|n| n.1).ok_or(MorError::SingularShift { shift: omega })
    }
}

fn schur_resolvent(am: &CMat, rg: &CMat, bm: &CMat, lq: &CMat, cmt: &CMat) -> Option<Resolvent> {
    let k = am.nrows();
    let schur = Schur::try_new(am.clone(), f64::EPSILON, 100 * k.max(10))?;
    let (z, t) = schur.unpack();
    let scale = t.iter().fold(0.0_f64, |acc, x| acc.max(x.norm()));
    for i in 1..k {
        for j in 0..i {
            if t[(i, j)].norm() > 1e-14 * scale {
                return None;
            }
        }
    }
    let recon = &z * &t * z.adjoint() - am;
    if recon.norm() > 1e-10 * am.norm().max(f64::MIN_POSITIVE) {
        return None;
    }
    let zc = z.map(|x| x.conj());
    Some(Resolvent::Schur {
        xb: rg * &z,
        yb: z.adjoint() * bm,
        xc: lq * &zc,
        yc: z.transpose() * cmt,
        t: t.upper_triangle(),
        scale,
    })
}

/// `(omega I - T)^{-1} rhs` for upper triangular `T`.
fn upper_solve(t: &CMat, omega: Complex64, rhs: &CMat) -> CMat {
    let k = t.nrows();
    let mut x = rhs.clone();
    for c in 0..x.ncols() {
        for i in (0..k).rev() {
            let mut acc = x[(i, c)];
            for j in i + 1..k {
                acc += t[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = acc / (omega - t[(i, i)]);
        }
    }
    x
}

/// `(omega I - T^T)^{-1} rhs` for upper triangular `T`.
fn lower_solve_transposed(t: &CMat, omega: Complex64, rhs: &CMat) -> CMat {
    let k = t.nrows();
    let mut x = rhs.clone();
    for c in 0..x.ncols() {
        for i in 0..k {
            let mut acc = x[(i, c)];
            for j in 0..i {
                acc += t[(j, i)] * x[(j, c)];
            }
            x[(i, c)] = acc / (omega - t[(i, i)]);
        }
    }
    x
}

/// Residuals evaluated at full scale, `B - (omega I - A) V U_B(omega)` and
/// `C^T - (omega I - A)^T W U_C(omega)`.
pub fn direct_residuals<S: StateSpace>(state: &ReductionState, sys: &S, omega: Complex64) -> Result<(CMat, CMat)> {
    let rm = state.reduced();
    let lu = DenseLu::factor(shifted_identity_minus(&rm.am, omega)).ok_or(MorError::SingularShift { shift: omega })?;
    let vu = state.v() * lu.solve(&rm.bm);
    let wu = state.w() * lu.solve_transposed(&rm.cm.transpose());
    let rb = sys.input() - (&vu * omega - sys.apply(&vu));
    let rc = sys.output_transposed() - (&wu * omega - sys.apply_transposed(&wu));
    Ok((rb, rc))
}

/// Residuals in the factored full-scale form
/// `(I - V W^T) B [I - R G^{-1} U_B]` and its left mirror.
pub fn factored_residuals<S: StateSpace>(state: &ReductionState, sys: &S, omega: Complex64) -> Result<(CMat, CMat)> {
    let rm = state.reduced();
    let asm = state.assemble()?;
    let p = sys.ports();
    let eye = CMat::identity(p, p);
    let lu = DenseLu::factor(shifted_identity_minus(&rm.am, omega)).ok_or(MorError::SingularShift { shift: omega })?;
    let rg = right_divide(&state.stacked_dirs_right(), &asm.g)?;
    let lq = right_divide(&state.stacked_dirs_left(), &asm.q)?;
    let pb = sys.input() - state.v() * &rm.bm;
    let pc = sys.output_transposed() - state.w() * rm.cm.transpose();
    let rb = pb * (&eye - rg * lu.solve(&rm.bm));
    let rc = pc * (eye - lq * lu.solve_transposed(&rm.cm.transpose()));
    Ok((rb, rc))
}

/// Top-`s` right singular vectors of `residual`, each rotated so its first
/// significant entry is real positive. Fails when the residual is zero
/// relative to `reference`.
pub fn top_right_singular_vectors(residual: &CMat, s: usize, reference: f64) -> Result<CMat> {
    let (_, sv, v_h) = svd_sorted(residual);
    let top = sv.first().copied().unwrap_or(0.0);
    if top <= 1e-15 * reference || top == 0.0 {
        return Err(MorError::DegenerateResidual);
    }
    let mut dirs = v_h.rows(0, s).adjoint();
    normalize_column_phases(&mut dirs);
    Ok(dirs)
}

/// `||residual * r||_2` for a direction block `r`.
pub fn directional_norm(residual: &CMat, r: &CMat) -> f64 {
    spectral_norm(&(residual * r))
}
