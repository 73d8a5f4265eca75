//! Candidate interpolation points sampled from the convex hull of the
//! mirrored Ritz values.

use num_complex::Complex64;

use crate::error::{MorError, Result};
use crate::linalg::{eigenvalues, CMat};

/// Mirrored Ritz values are moved to real part at least this.
pub const REAL_PART_FLOOR: f64 = 1e-8;
pub const EDGE_POINTS: usize = 20;
pub const SEGMENT_POINTS: usize = 100;
pub const INTERIOR_GRID: usize = 14;

#[derive(Debug, Clone)]
pub struct ShiftSearchRegion {
    /// eigenvalues of the projected matrix
    pub ritz: Vec<Complex64>,
    /// `-lambda`, reflected into the right half-plane
    pub mirrored: Vec<Complex64>,
    /// counter-clockwise hull vertices (one or two points when degenerate)
    pub hull: Vec<Complex64>,
    pub candidates: Vec<Complex64>,
}

impl ShiftSearchRegion {
    pub fn centroid(&self) -> Complex64 {
        let n = self.hull.len().max(1) as f64;
        self.hull.iter().sum::<Complex64>() / n
    }
}

/// Mirrors and reflects one Ritz value.
pub fn mirror(lambda: Complex64) -> Complex64 {
    let z = -lambda;
    Complex64::new(z.re.abs().max(REAL_PART_FLOOR), z.im)
}

pub fn ritz_region(am: &CMat) -> Result<ShiftSearchRegion> {
    region_from_ritz(eigenvalues(am))
}

pub fn region_from_ritz(ritz: Vec<Complex64>) -> Result<ShiftSearchRegion> {
    if ritz.is_empty() || ritz.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(MorError::EmptyRegion);
    }
    let mirrored: Vec<Complex64> = ritz.iter().map(|&l| mirror(l)).collect();
    let hull = convex_hull(&mirrored);
    let candidates = sample_hull(&hull);
    Ok(ShiftSearchRegion {
        ritz,
        mirrored,
        hull,
        candidates,
    })
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Monotone-chain hull. Returns one point if all coincide and the two
/// extreme points if they are collinear.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let scale = pts.iter().fold(0.0_f64, |acc, z| acc.max(z.norm())).max(f64::MIN_POSITIVE);
    let same = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-12 * scale;
    pts.dedup_by(|a, b| same(*a, *b));
    if pts.len() <= 2 {
        return pts;
    }
    let tol = 1e-12 * scale * scale;
    let mut lower: Vec<Complex64> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= tol {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Complex64> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= tol {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        // collinear: keep the extreme points
        return vec![pts[0], *pts.last().unwrap()];
    }
    lower
}

/// `count` points strictly between `a` and `b`, clustered geometrically
/// towards the endpoint of smaller modulus when the moduli differ by more
/// than a decade.
fn edge_points(a: Complex64, b: Complex64, count: usize) -> Vec<Complex64> {
    let (near, far) = if a.norm() <= b.norm() { (a, b) } else { (b, a) };
    let ratio = far.norm() / near.norm().max(f64::MIN_POSITIVE);
    (1..=count)
        .map(|k| {
            let u = k as f64 / (count + 1) as f64;
            let t = if ratio > 10.0 {
                (ratio.powf(u) - 1.0) / (ratio - 1.0)
            } else {
                u
            };
            near + (far - near) * t
        })
        .collect()
}

fn inside_strictly(hull: &[Complex64], z: Complex64, tol: f64) -> bool {
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], z) > tol)
}

fn sample_hull(hull: &[Complex64]) -> Vec<Complex64> {
    match hull.len() {
        0 => Vec::new(),
        1 => vec![hull[0]],
        2 => {
            let mut out = vec![hull[0]];
            out.extend(edge_points(hull[0], hull[1], SEGMENT_POINTS - 2));
            out.push(hull[1]);
            out
        }
        n => {
            let mut out = hull.to_vec();
            for i in 0..n {
                out.extend(edge_points(hull[i], hull[(i + 1) % n], EDGE_POINTS));
            }
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, 0.0_f64, f64::INFINITY, f64::NEG_INFINITY);
            for z in hull {
                x0 = x0.min(z.re);
                x1 = x1.max(z.re);
                y0 = y0.min(z.im);
                y1 = y1.max(z.im);
            }
            let scale = hull.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
            let tol = 1e-12 * scale * scale;
            let g = INTERIOR_GRID;
            let log_x = x1 / x0 > 10.0;
            for ix in 1..=g {
                let u = ix as f64 / (g + 1) as f64;
                let x = if log_x { x0 * (x1 / x0).powf(u) } else { x0 + (x1 - x0) * u };
                for iy in 1..=g {
                    let y = y0 + (y1 - y0) * iy as f64 / (g + 1) as f64;
                    let z = Complex64::new(x, y);
                    if inside_strictly(hull, z, tol) {
                        out.push(z);
                    }
                }
            }
            out
        }
    }
}

/// Moves candidates that coincide with an already used shift slightly off it.
pub fn perturb_existing(candidates: &mut [Complex64], existing: &[Complex64]) {
    for z in candidates.iter_mut() {
        if existing.iter().any(|e| (*z - e).norm() <= 1e-12 * e.norm().max(1e-300)) {
            *z *= 1.0 + 1e-6;
        }
    }
}

/// Index of the largest value. Values within a relative 1e-12 tie and are
/// resolved by larger imaginary part, then larger real part.
pub fn argmax_with_tiebreak(candidates: &[Complex64], values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        let Some(v) = *v else { continue };
        if !v.is_finite() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                let bv = values[b].unwrap();
                let tie = (v - bv).abs() <= 1e-12 * v.abs().max(bv.abs());
                let better = if tie {
                    let (z, zb) = (candidates[i], candidates[b]);
                    z.im > zb.im || (z.im == zb.im && z.re > zb.re)
                } else {
                    v > bv
                };
                if better {
                    best = Some(i);
                }
            }
        }
    }
    best
}
