//! Block tangential Lanczos recurrence: biorthonormal bases of the right and
//! left tangential rational Krylov spaces, with the block Hessenberg records
//! that link them to the solved blocks.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MorError, Result, Side};
use crate::linalg::{svd_sorted, thin_qr, CMat};
use crate::solver::SolverCache;
use crate::system::{ReducedModel, StateSpace};

/// Smallest admissible singular value of `W^T V` for a new block pair,
/// relative to the largest.
pub const BREAKDOWN_TOLERANCE: f64 = 1e-12;

/// A new block whose QR diagonal falls below this fraction of its norm
/// before orthogonalization is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

/// Interpolation point. `Infinite` replaces the solve by a product with `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shift {
    Finite(Complex64),
    Infinite,
}

impl Shift {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            Shift::Finite(z) => Some(z),
            Shift::Infinite => None,
        }
    }
}

impl From<Complex64> for Shift {
    fn from(z: Complex64) -> Self {
        Shift::Finite(z)
    }
}

/// Block upper triangular records of the recurrence together with the shift
/// diagonals. With `T = [(s_i I - A)^{-1} B R_i]` and `Y` its left analogue:
/// `T = V G`, `Y = W Q`, `A V G = V G D1 - B [R_1..R_m]`,
/// `A^T W Q = W Q D2 - C^T [L_1..L_m]`.
#[derive(Debug, Clone)]
pub struct HessenbergAssembly {
    pub g: CMat,
    pub q: CMat,
    pub d1: CMat,
    pub d2: CMat,
    pub cond_g: f64,
    pub cond_q: f64,
}

#[derive(Debug, Clone)]
pub struct ReductionState {
    s: usize,
    v: CMat,
    w: CMat,
    /// `h[j][i]` is block (i, j) of G
    h: Vec<Vec<CMat>>,
    f: Vec<Vec<CMat>>,
    shifts_right: Vec<Shift>,
    shifts_left: Vec<Shift>,
    dirs_right: Vec<CMat>,
    dirs_left: Vec<CMat>,
    am: CMat,
    bm: CMat,
    cm: CMat,
}

struct NewPair {
    v: CMat,
    w: CMat,
    h: CMat,
    f: CMat,
}

fn check_direction(d: &CMat, p: usize, s: usize, what: &str) -> Result<()> {
    if d.nrows() != p || d.ncols() != s {
        return Err(MorError::DimensionMismatch(format!(
            "{what} direction is {}x{}, expected {p}x{s}",
            d.nrows(),
            d.ncols()
        )));
    }
    let gram = d.adjoint() * d - CMat::identity(s, s);
    if gram.iter().any(|z| z.norm() > ORTHONORMAL_TOLERANCE) {
        return Err(MorError::InvalidArgument(format!("{what} direction columns are not orthonormal")));
    }
    Ok(())
}

fn solve_block<S: StateSpace>(
    sys: &S,
    cache: &SolverCache<S::Factor>,
    shift: Shift,
    rhs: &CMat,
    transposed: bool,
) -> Result<CMat> {
    match shift {
        Shift::Finite(z) => {
            let f = cache.get_or_try_insert(z, || sys.factorize(z))?;
            Ok(if transposed {
                sys.solve_transposed(&f, rhs)
            } else {
                sys.solve(&f, rhs)
            })
        }
        // taken as printed for both sides: A B R and A C^T L
        Shift::Infinite => Ok(sys.apply(rhs)),
    }
}

fn max_column_norm(m: &CMat) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn qr_checked(block: &CMat, scale: f64, side: Side) -> Result<(CMat, CMat)> {
    let (q, r) = thin_qr(block);
    let s = block.ncols();
    let rank = (0..s).filter(|&k| r[(k, k)].norm() > RANK_TOLERANCE * scale).count();
    if rank < s || scale == 0.0 {
        return Err(MorError::Deflation {
            iteration: 0,
            side,
            rank,
            width: s,
        });
    }
    Ok((q, r))
}

/// QR of both blocks followed by the SVD rescaling that makes the pair
/// biorthonormal under the plain transpose.
fn biorthonormalize(vt: &CMat, wt: &CMat, v_scale: f64, w_scale: f64) -> Result<NewPair> {
    let (qv, rv) = qr_checked(vt, v_scale, Side::Right)?;
    let (qw, rw) = qr_checked(wt, w_scale, Side::Left)?;
    let inner = qw.transpose() * &qv;
    let (p, d, q_h) = svd_sorted(&inner);
    let largest = d.first().copied().unwrap_or(0.0);
    let smallest = d.last().copied().unwrap_or(0.0);
    if largest == 0.0 || smallest < BREAKDOWN_TOLERANCE * largest {
        return Err(MorError::Breakdown {
            iteration: 0,
            min_singular: smallest,
            relative: if largest > 0.0 { smallest / largest } else { 0.0 },
        });
    }
    let s = d.len();
    let inv_sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        s,
        d.iter().map(|&x| Complex64::new(1.0 / x.sqrt(), 0.0)),
    ));
    let sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        s,
        d.iter().map(|&x| Complex64::new(x.sqrt(), 0.0)),
    ));
    let v = qv * q_h.adjoint() * &inv_sqrt;
    let w = qw * p.map(|z| z.conj()) * &inv_sqrt;
    let h = &sqrt * q_h * rv;
    let f = sqrt * p.transpose() * rw;
    Ok(NewPair { v, w, h, f })
}

fn append_columns(m: &CMat, block: &CMat) -> CMat {
    let (n, k) = m.shape();
    let mut out = CMat::zeros(n, k + block.ncols());
    out.columns_mut(0, k).copy_from(m);
    out.columns_mut(k, block.ncols()).copy_from(block);
    out
}

impl ReductionState {
    /// First block pair from `(sigma1 I - A)^{-1} B R1` and
    /// `(mu1 I - A)^{-T} C^T L1`.
    pub fn init<S: StateSpace>(
        sys: &S,
        cache: &SolverCache<S::Factor>,
        sigma1: Shift,
        mu1: Shift,
        r1: &CMat,
        l1: &CMat,
    ) -> Result<Self> {
        let p = sys.ports();
        let s = r1.ncols();
        if s == 0 || s > p {
            return Err(MorError::InvalidArgument(format!("block width s={s} must satisfy 1 <= s <= p={p}")));
        }
        check_direction(r1, p, s, "right")?;
        check_direction(l1, p, s, "left")?;
        let vt = solve_block(sys, cache, sigma1, &(sys.input() * r1), false)?;
        let wt = solve_block(sys, cache, mu1, &(sys.output_transposed() * l1), true)?;
        let pair = biorthonormalize(&vt, &wt, max_column_norm(&vt), max_column_norm(&wt))
            .map_err(|e| e.at_iteration(1))?;
        let av = sys.apply(&pair.v);
        let am = pair.w.transpose() * av;
        let bm = pair.w.transpose() * sys.input();
        let cm = sys.output_transposed().transpose() * &pair.v;
        Ok(Self {
            s,
            v: pair.v,
            w: pair.w,
            h: vec![vec![pair.h]],
            f: vec![vec![pair.f]],
            shifts_right: vec![sigma1],
            shifts_left: vec![mu1],
            dirs_right: vec![r1.clone()],
            dirs_left: vec![l1.clone()],
            am,
            bm,
            cm,
        })
    }

    /// One step of the recurrence: two block solves, two-pass block
    /// Gram-Schmidt against all previous blocks, QR and SVD rescaling.
    pub fn extend<S: StateSpace>(
        &mut self,
        sys: &S,
        cache: &SolverCache<S::Factor>,
        sigma: Shift,
        mu: Shift,
        r: &CMat,
        l: &CMat,
    ) -> Result<()> {
        let (p, s) = (sys.ports(), self.s);
        check_direction(r, p, s, "right")?;
        check_direction(l, p, s, "left")?;
        if sys.order() != self.v.nrows() {
            return Err(MorError::DimensionMismatch("system order differs from basis rows".into()));
        }
        let iteration = self.iterations() + 1;
        let mut vt = solve_block(sys, cache, sigma, &(sys.input() * r), false)?;
        let mut wt = solve_block(sys, cache, mu, &(sys.output_transposed() * l), true)?;
        let (v_scale, w_scale) = (max_column_norm(&vt), max_column_norm(&wt));

        let j = self.iterations();
        let mut hcol = vec![CMat::zeros(s, s); j];
        let mut fcol = vec![CMat::zeros(s, s); j];
        for _pass in 0..2 {
            for i in 0..j {
                let vi = self.v.columns(i * s, s);
                let wi = self.w.columns(i * s, s);
                let hv = wi.transpose() * &vt;
                vt -= vi * &hv;
                hcol[i] += hv;
                let fw = vi.transpose() * &wt;
                wt -= wi * &fw;
                fcol[i] += fw;
            }
        }
        let pair = biorthonormalize(&vt, &wt, v_scale, w_scale).map_err(|e| e.at_iteration(iteration))?;
        hcol.push(pair.h);
        fcol.push(pair.f);

        // grow the projected triple by one block row and column
        let k = self.v.ncols();
        let av_new = sys.apply(&pair.v);
        let atw_new = sys.apply_transposed(&pair.w);
        let mut am = CMat::zeros(k + s, k + s);
        am.view_mut((0, 0), (k, k)).copy_from(&self.am);
        am.view_mut((0, k), (k, s)).copy_from(&(self.w.transpose() * &av_new));
        am.view_mut((k, 0), (s, k)).copy_from(&(atw_new.transpose() * &self.v));
        am.view_mut((k, k), (s, s)).copy_from(&(pair.w.transpose() * &av_new));
        let mut bm = CMat::zeros(k + s, p);
        bm.rows_mut(0, k).copy_from(&self.bm);
        bm.rows_mut(k, s).copy_from(&(pair.w.transpose() * sys.input()));
        let cm = append_columns(&self.cm, &(sys.output_transposed().transpose() * &pair.v));

        self.v = append_columns(&self.v, &pair.v);
        self.w = append_columns(&self.w, &pair.w);
        self.am = am;
        self.bm = bm;
        self.cm = cm;
        self.h.push(hcol);
        self.f.push(fcol);
        self.shifts_right.push(sigma);
        self.shifts_left.push(mu);
        self.dirs_right.push(r.clone());
        self.dirs_left.push(l.clone());
        Ok(())
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Completed block pairs.
    pub fn iterations(&self) -> usize {
        self.h.len()
    }

    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn v(&self) -> &CMat {
        &self.v
    }

    pub fn w(&self) -> &CMat {
        &self.w
    }

    pub fn shifts_right(&self) -> &[Shift] {
        &self.shifts_right
    }

    pub fn shifts_left(&self) -> &[Shift] {
        &self.shifts_left
    }

    pub fn dirs_right(&self) -> &[CMat] {
        &self.dirs_right
    }

    pub fn dirs_left(&self) -> &[CMat] {
        &self.dirs_left
    }

    /// Block `H_{i+1, j}` in 0-based block indices, `i <= j`.
    pub fn h_block(&self, i: usize, j: usize) -> &CMat {
        &self.h[j][i]
    }

    pub fn f_block(&self, i: usize, j: usize) -> &CMat {
        &self.f[j][i]
    }

    /// `[R_1, ..., R_m]`, p×ms.
    pub fn stacked_dirs_right(&self) -> CMat {
        hstack(&self.dirs_right)
    }

    pub fn stacked_dirs_left(&self) -> CMat {
        hstack(&self.dirs_left)
    }

    /// max |W^T V - I|.
    pub fn biorthogonality_error(&self) -> f64 {
        let k = self.dim();
        let e = self.w.transpose() * &self.v - CMat::identity(k, k);
        e.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// The incrementally maintained projection `W^T A V`, `W^T B`, `C V`.
    pub fn reduced(&self) -> ReducedModel {
        ReducedModel {
            am: self.am.clone(),
            bm: self.bm.clone(),
            cm: self.cm.clone(),
            m: self.iterations(),
            s: self.s,
        }
    }

    /// Projection recomputed from the bases.
    pub fn project<S: StateSpace>(&self, sys: &S) -> Result<ReducedModel> {
        if sys.order() != self.v.nrows() {
            return Err(MorError::DimensionMismatch("system order differs from basis rows".into()));
        }
        ReducedModel::new(
            self.w.transpose() * sys.apply(&self.v),
            self.w.transpose() * sys.input(),
            sys.output_transposed().transpose() * &self.v,
            self.iterations(),
            self.s,
        )
    }

    pub fn assemble(&self) -> Result<HessenbergAssembly> {
        let (m, s) = (self.iterations(), self.s);
        let k = m * s;
        let mut g = CMat::zeros(k, k);
        let mut q = CMat::zeros(k, k);
        for j in 0..m {
            for i in 0..=j {
                g.view_mut((i * s, j * s), (s, s)).copy_from(&self.h[j][i]);
                q.view_mut((i * s, j * s), (s, s)).copy_from(&self.f[j][i]);
            }
        }
        let diag = |shifts: &[Shift]| -> Result<CMat> {
            let mut d = CMat::zeros(k, k);
            for (j, sh) in shifts.iter().enumerate() {
                let z = sh.finite().ok_or(MorError::InfiniteShift)?;
                for t in 0..s {
                    d[(j * s + t, j * s + t)] = z;
                }
            }
            Ok(d)
        };
        let d1 = diag(&self.shifts_right)?;
        let d2 = diag(&self.shifts_left)?;
        let cond_g = condition(&g);
        let cond_q = condition(&q);
        if cond_g > 1e14 || cond_q > 1e14 {
            warn!("recurrence records nearly singular: cond(G) = {cond_g:e}, cond(Q) = {cond_q:e}");
        }
        Ok(HessenbergAssembly {
            g,
            q,
            d1,
            d2,
            cond_g,
            cond_q,
        })
    }
}

fn hstack(blocks: &[CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

fn condition(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
