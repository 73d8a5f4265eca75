//! Factorize-once, solve-many access to shifted matrices `sigma*I - A` (and
//! general sparse combinations such as quadratic pencils), with a small
//! least-recently-used cache keyed by the exact complex shift.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{MorError, Result};
use crate::linalg::ordering::{nested_dissection, Graph};
use crate::linalg::sparse::{ComplexCsc, CscMatrix};
use crate::linalg::splu::SparseLu;
use crate::linalg::{CMat, DenseLu, ONE};

/// Systems up to this order are factored densely.
pub const DENSE_THRESHOLD: usize = 500;

pub const DEFAULT_CACHE_CAPACITY: usize = 8;

/// Row pivots within this fraction of the column maximum keep the diagonal.
const DIAGONAL_PREFERENCE: f64 = 0.1;

#[derive(Debug, Clone)]
enum Factors {
    Dense(DenseLu),
    Sparse(SparseLu),
}

/// LU factors of one shifted matrix. Serves both `M x = b` and `M^T x = b`.
#[derive(Debug, Clone)]
pub struct ShiftedFactorization {
    sigma: Complex64,
    factors: Factors,
}

impl ShiftedFactorization {
    pub fn sigma(&self) -> Complex64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        match &self.factors {
            Factors::Dense(f) => f.dim(),
            Factors::Sparse(f) => f.dim(),
        }
    }

    pub fn transpose_capable(&self) -> bool {
        true
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.factors, Factors::Sparse(_))
    }

    pub fn solve(&self, rhs: &CMat) -> Result<CMat> {
        self.check(rhs)?;
        Ok(self.solve_unchecked(rhs))
    }

    pub fn solve_transposed(&self, rhs: &CMat) -> Result<CMat> {
        self.check(rhs)?;
        Ok(self.solve_transposed_unchecked(rhs))
    }

    pub(crate) fn solve_unchecked(&self, rhs: &CMat) -> CMat {
        match &self.factors {
            Factors::Dense(f) => f.solve(rhs),
            Factors::Sparse(f) => f.solve(rhs),
        }
    }

    pub(crate) fn solve_transposed_unchecked(&self, rhs: &CMat) -> CMat {
        match &self.factors {
            Factors::Dense(f) => f.solve_transposed(rhs),
            Factors::Sparse(f) => f.solve_transposed(rhs),
        }
    }

    fn check(&self, rhs: &CMat) -> Result<()> {
        if rhs.nrows() != self.dim() {
            return Err(MorError::DimensionMismatch(format!(
                "right-hand side has {} rows, factorization is {}x{}",
                rhs.nrows(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Column ordering shared by every combination with the same pattern.
#[derive(Debug, Default)]
pub struct PatternOrdering(OnceLock<Vec<usize>>);

impl PatternOrdering {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, m: &ComplexCsc) -> &[usize] {
        self.0
            .get_or_init(|| nested_dissection(&Graph::from_csc_pattern(m.dim(), m.col_ptr(), m.row_idx())))
    }
}

impl Clone for PatternOrdering {
    fn clone(&self) -> Self {
        let cell = OnceLock::new();
        if let Some(v) = self.0.get() {
            let _ = cell.set(v.clone());
        }
        Self(cell)
    }
}

/// Factors `diag * I + sum coeff_k * M_k`. `None` means numerically singular.
/// `label` is the shift recorded in the factorization.
pub fn factor_combination(
    n: usize,
    diag: Complex64,
    terms: &[(Complex64, &CscMatrix)],
    ordering: &PatternOrdering,
    label: Complex64,
) -> Option<ShiftedFactorization> {
    let m = ComplexCsc::combination(n, diag, terms);
    let factors = if n <= DENSE_THRESHOLD {
        Factors::Dense(DenseLu::factor(m.to_dense())?)
    } else {
        Factors::Sparse(SparseLu::factor(&m, ordering.get(&m), DIAGONAL_PREFERENCE)?)
    };
    Some(ShiftedFactorization { sigma: label, factors })
}

/// Factors `sigma*I - A`.
pub fn factorize(a: &CscMatrix, sigma: Complex64) -> Result<ShiftedFactorization> {
    factorize_with(a, sigma, &PatternOrdering::new())
}

pub fn factorize_with(a: &CscMatrix, sigma: Complex64, ordering: &PatternOrdering) -> Result<ShiftedFactorization> {
    if a.nrows() != a.ncols() {
        return Err(MorError::DimensionMismatch(format!(
            "shifted matrix needs square A, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !(sigma.re.is_finite() && sigma.im.is_finite()) {
        return Err(MorError::InfiniteShift);
    }
    factor_combination(a.nrows(), sigma, &[(-ONE, a)], ordering, sigma)
        .ok_or(MorError::SingularShift { shift: sigma })
}

fn key(z: Complex64) -> (u64, u64) {
    // -0.0 and 0.0 are the same shift
    ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits())
}

/// Bounded LRU map from exact shift to shared factorization.
#[derive(Debug)]
pub struct SolverCache<F> {
    capacity: usize,
    entries: Mutex<VecDeque<((u64, u64), Arc<F>)>>,
}

impl<F> SolverCache<F> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: Mutex::new(VecDeque::new()),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("solver cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, shift: Complex64) -> bool {
        let k = key(shift);
        self.entries
            .lock()
            .expect("solver cache poisoned")
            .iter()
            .any(|(e, _)| *e == k)
    }

    /// Returns the cached factorization for `shift`, building it with `make`
    /// on a miss. The factorization runs outside the lock.
    pub fn get_or_try_insert(&self, shift: Complex64, make: impl FnOnce() -> Result<F>) -> Result<Arc<F>> {
        let k = key(shift);
        {
            let mut entries = self.entries.lock().expect("solver cache poisoned");
            if let Some(pos) = entries.iter().position(|(e, _)| *e == k) {
                let hit = entries.remove(pos).expect("position is valid");
                let f = Arc::clone(&hit.1);
                entries.push_back(hit);
                return Ok(f);
            }
        }
        let f = Arc::new(make()?);
        let mut entries = self.entries.lock().expect("solver cache poisoned");
        if let Some(pos) = entries.iter().position(|(e, _)| *e == k) {
            entries.remove(pos);
        }
        entries.push_back((k, Arc::clone(&f)));
        while entries.len() > self.capacity {
            entries.pop_front();
        }
        Ok(f)
    }
}

impl<F> Default for SolverCache<F> {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_CAPACITY)
    }
}
