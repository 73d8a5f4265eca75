//! Adaptive choice of interpolation points and tangential directions, and the
//! driver that alternates it with the block Lanczos recurrence.

pub mod region;
pub mod residual;

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::btl::{ReductionState, Shift};
use crate::error::{MorError, Result};
use crate::linalg::{normalize_column_phases, spectral_norm, svd_sorted, CMat, ONE};
use crate::solver::{SolverCache, DEFAULT_CACHE_CAPACITY};
use crate::system::{ReducedModel, StateSpace};

pub use region::{ritz_region, ShiftSearchRegion};
pub use residual::{direct_residuals, factored_residuals, ResidualEvaluator};

use region::{argmax_with_tiebreak, perturb_existing, region_from_ritz};
use residual::top_right_singular_vectors;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Where candidate residual norms come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualMode {
    /// p×p reduced form, cost independent of n
    #[default]
    Economical,
    /// full n×p residual matrices; for small systems and cross-checks
    Direct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbtlOptions {
    pub s: usize,
    pub m_max: usize,
    pub tol: f64,
    pub residual_mode: ResidualMode,
    pub cache_capacity: usize,
}

impl AbtlOptions {
    pub fn new(s: usize, m_max: usize) -> Self {
        Self {
            s,
            m_max,
            tol: DEFAULT_TOLERANCE,
            residual_mode: ResidualMode::Economical,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }
}

/// State of the reduced model after `iteration` blocks: the shifts of the
/// newest block and the largest residual norms over the search region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sigma: Complex64,
    pub mu: Complex64,
    pub right_residual: f64,
    pub left_residual: f64,
    pub candidates: usize,
    /// max |W^T V - I| of the bases at this point
    pub biorthogonality: f64,
}

#[derive(Debug, Clone)]
pub struct AbtlOutput {
    pub model: ReducedModel,
    pub state: ReductionState,
    pub history: Vec<IterationRecord>,
    /// wall seconds per iteration, kept apart so histories compare exactly
    pub timings: Vec<f64>,
    pub converged: bool,
}

/// Top-`s` right and left singular vector blocks of `C B`, or leading
/// identity columns when `C B = 0`.
pub fn initial_directions<S: StateSpace>(sys: &S, s: usize) -> (CMat, CMat) {
    let p = sys.ports();
    let cb = sys.output_transposed().transpose() * sys.input();
    if cb.iter().all(|z| z.norm() == 0.0) {
        let eye = CMat::identity(p, s);
        return (eye.clone(), eye);
    }
    let (u, _, v_h) = svd_sorted(&cb);
    let mut r = v_h.rows(0, s).adjoint();
    let mut l = u.columns(0, s).into_owned();
    normalize_column_phases(&mut r);
    normalize_column_phases(&mut l);
    (r, l)
}

/// Best candidate under `values`, with the centroid fallback.
fn pick(
    region: &ShiftSearchRegion,
    candidates: &[Complex64],
    values: &[Option<f64>],
    eval: impl Fn(Complex64) -> Option<f64>,
) -> Result<(Complex64, f64)> {
    if let Some(i) = argmax_with_tiebreak(candidates, values) {
        return Ok((candidates[i], values[i].unwrap()));
    }
    let z = region.centroid() * (1.0 + 1e-6);
    eval(z).map(|v| (z, v)).ok_or(MorError::EmptyRegion)
}

/// Chooses `(sigma, mu)` and the matching direction blocks from the current
/// state. Returns the maximal right and left residual norms as well.
pub struct Selection {
    pub sigma: Complex64,
    pub mu: Complex64,
    pub right_residual: f64,
    pub left_residual: f64,
    pub region: ShiftSearchRegion,
    right_matrix: CMat,
    left_matrix: CMat,
}

impl Selection {
    pub fn right_direction(&self, s: usize, reference: f64) -> Result<CMat> {
        top_right_singular_vectors(&self.right_matrix, s, reference)
    }

    pub fn left_direction(&self, s: usize, reference: f64) -> Result<CMat> {
        top_right_singular_vectors(&self.left_matrix, s, reference)
    }

    /// Residual matrix whose right singular vectors give the right direction.
    pub fn right_matrix(&self) -> &CMat {
        &self.right_matrix
    }

    pub fn left_matrix(&self) -> &CMat {
        &self.left_matrix
    }
}

fn used_shifts(state: &ReductionState) -> Vec<Complex64> {
    state
        .shifts_right()
        .iter()
        .chain(state.shifts_left())
        .filter_map(|s| s.finite())
        .collect()
}

pub fn select_next<S: StateSpace>(state: &ReductionState, sys: &S, mode: ResidualMode) -> Result<Selection> {
    let ev = ResidualEvaluator::new(state, sys)?;
    let region = region_from_ritz(ev.ritz_values().to_vec())?;
    let mut candidates = region.candidates.clone();
    perturb_existing(&mut candidates, &used_shifts(state));

    let norms_at = |z: Complex64| -> Option<(f64, f64)> {
        match mode {
            ResidualMode::Economical => ev.norms(z),
            ResidualMode::Direct => direct_residuals(state, sys, z)
                .ok()
                .map(|(rb, rc)| (spectral_norm(&rb), spectral_norm(&rc))),
        }
    };
    let norms: Vec<Option<(f64, f64)>> = candidates.par_iter().map(|&z| norms_at(z)).collect();
    let right: Vec<Option<f64>> = norms.iter().map(|n| n.map(|v| v.0)).collect();
    let left: Vec<Option<f64>> = norms.iter().map(|n| n.map(|v| v.1)).collect();
    let (sigma, right_residual) = pick(&region, &candidates, &right, |z| norms_at(z).map(|v| v.0))?;
    let (mu, left_residual) = pick(&region, &candidates, &left, |z| norms_at(z).map(|v| v.1))?;

    let matrices = |z: Complex64| -> Result<(CMat, CMat)> {
        match mode {
            ResidualMode::Economical => ev.reduced_residuals(z).ok_or(MorError::SingularShift { shift: z }),
            ResidualMode::Direct => direct_residuals(state, sys, z),
        }
    };
    let right_matrix = matrices(sigma)?.0;
    let left_matrix = matrices(mu)?.1;
    Ok(Selection {
        sigma,
        mu,
        right_residual,
        left_residual,
        region,
        right_matrix,
        left_matrix,
    })
}

/// Adaptive block tangential Lanczos. Starts from `sigma = mu = 1` with
/// directions from [`initial_directions`], then alternates shift/direction
/// selection and block extension until `m_max` blocks exist or both residual
/// maxima fall below `tol` times `||B||` (resp. `||C^T||`).
pub fn run_abtl<S: StateSpace>(sys: &S, opts: &AbtlOptions) -> Result<AbtlOutput> {
    let p = sys.ports();
    if opts.s == 0 || opts.s > p {
        return Err(MorError::InvalidArgument(format!("s={} must satisfy 1 <= s <= p={p}", opts.s)));
    }
    if opts.m_max == 0 {
        return Err(MorError::InvalidArgument("m_max must be at least 1".into()));
    }
    if !(opts.tol >= 0.0) {
        return Err(MorError::InvalidArgument(format!("tolerance {} must be nonnegative", opts.tol)));
    }
    let cache = SolverCache::new(opts.cache_capacity);
    let b_norm = spectral_norm(sys.input());
    let c_norm = spectral_norm(sys.output_transposed());

    let started = Instant::now();
    let (r1, l1) = initial_directions(sys, opts.s);
    let mut state = ReductionState::init(sys, &cache, Shift::Finite(ONE), Shift::Finite(ONE), &r1, &l1)?;
    let mut history = Vec::with_capacity(opts.m_max);
    let mut timings = Vec::with_capacity(opts.m_max);
    let mut converged = false;
    let mut clock = started;

    for m in 1..=opts.m_max {
        let sel = select_next(&state, sys, opts.residual_mode).map_err(|e| e.at_iteration(m))?;
        let last = |v: &[Shift]| v.last().and_then(|s| s.finite()).unwrap_or(Complex64::new(f64::INFINITY, 0.0));
        history.push(IterationRecord {
            iteration: m,
            sigma: last(state.shifts_right()),
            mu: last(state.shifts_left()),
            right_residual: sel.right_residual,
            left_residual: sel.left_residual,
            candidates: sel.region.candidates.len(),
            biorthogonality: state.biorthogonality_error(),
        });
        log::debug!(
            "iteration {m}: right residual {:.3e}, left residual {:.3e}",
            sel.right_residual,
            sel.left_residual
        );
        if sel.right_residual <= opts.tol * b_norm && sel.left_residual <= opts.tol * c_norm {
            converged = true;
        }
        if converged || m == opts.m_max || state.dim() + opts.s > sys.order() {
            timings.push(clock.elapsed().as_secs_f64());
            break;
        }
        let dirs = sel
            .right_direction(opts.s, b_norm)
            .and_then(|r| sel.left_direction(opts.s, c_norm).map(|l| (r, l)));
        let (r, l) = match dirs {
            Ok(d) => d,
            Err(MorError::DegenerateResidual) => {
                converged = true;
                timings.push(clock.elapsed().as_secs_f64());
                break;
            }
            Err(e) => return Err(e.at_iteration(m + 1)),
        };
        state
            .extend(sys, &cache, Shift::Finite(sel.sigma), Shift::Finite(sel.mu), &r, &l)
            .map_err(|e| e.at_iteration(m + 1))?;
        let now = Instant::now();
        timings.push((now - clock).as_secs_f64());
        clock = now;
    }
    Ok(AbtlOutput {
        model: state.reduced(),
        state,
        history,
        timings,
        converged,
    })
}
