//! Convection-diffusion test matrices on the unit square: centered
//! five-point differences of `Lu = u_xx + u_yy - f u_x - g u_y - h u` with
//! homogeneous Dirichlet boundary conditions.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MorError, Result};
use crate::linalg::sparse::CscMatrix;
use crate::linalg::RMat;
use crate::system::FirstOrderSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdmCoefficients {
    /// `f = log(x + 2y + 1)`, `g = exp(x + y)`, `h = x + y`
    #[default]
    Standard,
    /// `f = g = h = 0`: the plain Laplacian
    Laplacian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmSpec {
    /// interior grid points per direction; n = n0^2
    pub n0: usize,
    pub p: usize,
    pub seed: u64,
    #[serde(default)]
    pub coefficients: FdmCoefficients,
}

impl FdmSpec {
    pub fn new(n0: usize, p: usize, seed: u64) -> Self {
        Self {
            n0,
            p,
            seed,
            coefficients: FdmCoefficients::Standard,
        }
    }

    pub fn name(&self) -> String {
        format!("FDM{}", self.n0 * self.n0)
    }
}

/// Uniform `[0, 1)` double from the top 53 bits of one ChaCha8 output.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `rows`×`cols` matrix of uniform entries, filled column by column.
pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RMat {
    let mut m = RMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = uniform(rng);
        }
    }
    m
}

/// Grid point `(i, j)` has index `j * n0 + i` and coordinates
/// `((i + 1) h, (j + 1) h)` with `h = 1 / (n0 + 1)`.
pub fn fdm_matrix(n0: usize, coefficients: FdmCoefficients) -> CscMatrix {
    let h = 1.0 / (n0 + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let (f, g, hh): (fn(f64, f64) -> f64, fn(f64, f64) -> f64, fn(f64, f64) -> f64) = match coefficients {
        FdmCoefficients::Standard => (|x, y| (x + 2.0 * y + 1.0).ln(), |x, y| (x + y).exp(), |x, y| x + y),
        FdmCoefficients::Laplacian => (|_, _| 0.0, |_, _| 0.0, |_, _| 0.0),
    };
    let n = n0 * n0;
    let mut t = Vec::with_capacity(5 * n);
    for j in 0..n0 {
        for i in 0..n0 {
            let (x, y) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
            let row = j * n0 + i;
            let (fx, gy) = (f(x, y), g(x, y));
            t.push((row, row, -4.0 * inv_h2 - hh(x, y)));
            if i + 1 < n0 {
                t.push((row, row + 1, inv_h2 - fx / (2.0 * h)));
            }
            if i > 0 {
                t.push((row, row - 1, inv_h2 + fx / (2.0 * h)));
            }
            if j + 1 < n0 {
                t.push((row, row + n0, inv_h2 - gy / (2.0 * h)));
            }
            if j > 0 {
                t.push((row, row - n0, inv_h2 + gy / (2.0 * h)));
            }
        }
    }
    CscMatrix::from_triplets(n, n, &t)
}

/// FDM matrix with seeded uniform `B` (n×p) then `C` (p×n).
pub fn generate_fdm(spec: &FdmSpec) -> Result<FirstOrderSystem> {
    if spec.n0 < 2 {
        return Err(MorError::InvalidArgument(format!("n0 = {} must be at least 2", spec.n0)));
    }
    let n = spec.n0 * spec.n0;
    if spec.p == 0 || spec.p > n {
        return Err(MorError::InvalidArgument(format!("p = {} must be in 1..={n}", spec.p)));
    }
    let a = fdm_matrix(spec.n0, spec.coefficients);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let b = uniform_matrix(&mut rng, n, spec.p);
    let c = uniform_matrix(&mut rng, spec.p, n);
    FirstOrderSystem::new(a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_structure() {
        let sys = generate_fdm(&FdmSpec::new(2, 1, 0)).unwrap();
        assert_eq!(sys.n(), 4);
        assert!(sys.a().max_row_nnz() <= 5);
        assert!(sys.a().diagonal().iter().all(|&d| d < 0.0));
    }

    #[test]
    fn laplacian_variant_is_symmetric() {
        let a = fdm_matrix(5, FdmCoefficients::Laplacian);
        assert!(a.is_symmetric());
        assert!(!fdm_matrix(5, FdmCoefficients::Standard).is_symmetric());
    }

    #[test]
    fn seeded_inputs_are_reproducible_and_in_range() {
        let a = generate_fdm(&FdmSpec::new(4, 3, 11)).unwrap();
        let b = generate_fdm(&FdmSpec::new(4, 3, 11)).unwrap();
        assert_eq!(a.b(), b.b());
        assert_eq!(a.c(), b.c());
        assert!(a.b().iter().chain(a.c().iter()).all(|&v| (0.0..1.0).contains(&v)));
        let other = generate_fdm(&FdmSpec::new(4, 3, 12)).unwrap();
        assert_ne!(a.b(), other.b());
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(generate_fdm(&FdmSpec::new(1, 1, 0)).is_err());
        assert!(generate_fdm(&FdmSpec::new(2, 5, 0)).is_err());
    }
}
