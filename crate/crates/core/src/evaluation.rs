//! Frequency-domain comparison of full and reduced models on a log-spaced
//! grid of the imaginary axis.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MorError, Result};
use crate::linalg::{spectral_norm, CMat};
use crate::system::TransferFunction;

pub const DEFAULT_GRID_MIN: f64 = 1e-6;
pub const DEFAULT_GRID_MAX: f64 = 1e6;
pub const DEFAULT_GRID_COUNT: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        log_grid(DEFAULT_GRID_MIN, DEFAULT_GRID_MAX, DEFAULT_GRID_COUNT).expect("default grid is valid")
    }
}

/// `count` points `omega_min * (omega_max/omega_min)^(k/(count-1))`.
pub fn log_grid(omega_min: f64, omega_max: f64, count: usize) -> Result<FrequencyGrid> {
    if !(omega_min > 0.0 && omega_max > omega_min && omega_max.is_finite()) || count < 2 {
        return Err(MorError::InvalidArgument(format!(
            "frequency grid needs 0 < min < max and count >= 2, got [{omega_min}, {omega_max}] x {count}"
        )));
    }
    let ratio = omega_max / omega_min;
    let mut points: Vec<f64> = (0..count)
        .map(|k| omega_min * ratio.powf(k as f64 / (count - 1) as f64))
        .collect();
    points[0] = omega_min;
    points[count - 1] = omega_max;
    Ok(FrequencyGrid {
        omega_min,
        omega_max,
        points,
    })
}

/// Per-point spectral norms. `None` marks a point where a solve was singular.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub omega: Vec<f64>,
    pub gains: Vec<Option<f64>>,
    pub values: Option<Vec<Option<CMat>>>,
}

impl FrequencyResponse {
    /// Grid points that could not be evaluated.
    pub fn skipped(&self) -> Vec<f64> {
        self.omega
            .iter()
            .zip(&self.gains)
            .filter(|(_, g)| g.is_none())
            .map(|(w, _)| *w)
            .collect()
    }

    pub fn max_gain(&self) -> f64 {
        self.gains.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }
}

fn sample(sys: &dyn TransferFunction, grid: &FrequencyGrid) -> Vec<Option<CMat>> {
    grid.points
        .par_iter()
        .map(|&w| sys.transfer(Complex64::new(0.0, w)).ok())
        .collect()
}

/// `||H(j omega)||_2` on the grid.
pub fn response(sys: &dyn TransferFunction, grid: &FrequencyGrid, keep_values: bool) -> FrequencyResponse {
    let values = sample(sys, grid);
    let gains = values.iter().map(|v| v.as_ref().map(spectral_norm)).collect();
    FrequencyResponse {
        omega: grid.points.clone(),
        gains,
        values: keep_values.then_some(values),
    }
}

/// `||H(j omega) - H_m(j omega)||_2` on the grid.
pub fn error_curve(full: &dyn TransferFunction, reduced: &dyn TransferFunction, grid: &FrequencyGrid) -> FrequencyResponse {
    let a = sample(full, grid);
    let b = sample(reduced, grid);
    error_from_samples(grid, &a, &b)
}

fn error_from_samples(grid: &FrequencyGrid, a: &[Option<CMat>], b: &[Option<CMat>]) -> FrequencyResponse {
    let gains = a
        .iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Some(spectral_norm(&(x - y))),
            _ => None,
        })
        .collect();
    FrequencyResponse {
        omega: grid.points.clone(),
        gains,
        values: None,
    }
}

/// Sampled H-infinity error: the largest error over the grid. A lower bound
/// for the true norm.
pub fn hinf_estimate(full: &dyn TransferFunction, reduced: &dyn TransferFunction, grid: &FrequencyGrid) -> f64 {
    error_curve(full, reduced, grid).max_gain()
}

/// Full response, reduced response and error in one pass over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub full: FrequencyResponse,
    pub reduced: FrequencyResponse,
    pub error: FrequencyResponse,
}

impl Comparison {
    pub fn hinf_estimate(&self) -> f64 {
        self.error.max_gain()
    }
}

pub fn compare(full: &dyn TransferFunction, reduced: &dyn TransferFunction, grid: &FrequencyGrid) -> Comparison {
    let a = sample(full, grid);
    compare_with_full(&a, reduced, grid)
}

/// Same as [`compare`] with the full model already sampled on `grid`.
pub fn compare_with_full(full_values: &[Option<CMat>], reduced: &dyn TransferFunction, grid: &FrequencyGrid) -> Comparison {
    let b = sample(reduced, grid);
    let gains = |v: &[Option<CMat>]| v.iter().map(|x| x.as_ref().map(spectral_norm)).collect();
    Comparison {
        full: FrequencyResponse {
            omega: grid.points.clone(),
            gains: gains(full_values),
            values: None,
        },
        reduced: FrequencyResponse {
            omega: grid.points.clone(),
            gains: gains(&b),
            values: None,
        },
        error: error_from_samples(grid, full_values, &b),
    }
}

/// Samples of the full model, for reuse across several reduced models.
pub fn sample_full(full: &dyn TransferFunction, grid: &FrequencyGrid) -> Vec<Option<CMat>> {
    sample(full, grid)
}

fn fmt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => "nan".to_string(),
    }
}

/// CSV with header `omega,gain_full,gain_reduced,error`; values carry 17
/// significant digits, unevaluable points are written as `nan`.
pub fn write_csv<W: Write>(out: &mut W, cmp: &Comparison) -> std::io::Result<()> {
    writeln!(out, "omega,gain_full,gain_reduced,error")?;
    for k in 0..cmp.error.omega.len() {
        writeln!(
            out,
            "{:.16e},{},{},{}",
            cmp.error.omega[k],
            fmt(cmp.full.gains[k]),
            fmt(cmp.reduced.gains[k]),
            fmt(cmp.error.gains[k])
        )?;
    }
    Ok(())
}
