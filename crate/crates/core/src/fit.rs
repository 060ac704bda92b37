//! Small least-squares and 1-D search helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `z = a·u² + b·u + c` with `u = t − center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub center: f64,
}

impl Quadratic {
    pub fn eval(&self, t: f64) -> f64 {
        let u = t - self.center;
        (self.a * u + self.b) * u + self.c
    }

    /// `(t, z)` of the stationary point; `None` for a degenerate (linear) fit.
    pub fn vertex(&self) -> Option<(f64, f64)> {
        if self.a == 0.0 || !self.a.is_finite() {
            return None;
        }
        let u = -self.b / (2.0 * self.a);
        Some((self.center + u, self.c - self.b * self.b / (4.0 * self.a)))
    }
}

/// Weighted least-squares parabola through `(t, z)` points.
pub fn fit_quadratic(ts: &[f64], zs: &[f64], weights: Option<&[f64]>) -> Result<Quadratic> {
    let n = ts.len();
    if n < 3 || zs.len() != n {
        return Err(Error::FitFailure(format!("quadratic fit needs >= 3 points, got {n}")));
    }
    let center = ts.iter().sum::<f64>() / n as f64;
    let scale = ts.iter().map(|t| (t - center).abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::FitFailure("quadratic fit needs distinct abscissae".into()));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i].sqrt());
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let u = (ts[i] - center) / scale;
        w(i) * u.powi(2 - j as i32)
    });
    let rhs = DVector::from_fn(n, |i, _| w(i) * zs[i]);
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::FitFailure("quadratic fit is rank deficient".into()));
    }
    let coef = svd.solve(&rhs, 1e-14 * smax).map_err(|e| Error::FitFailure(e.to_string()))?;
    Ok(Quadratic { a: coef[0] / (scale * scale), b: coef[1] / scale, c: coef[2], center })
}

/// Minimum of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Result of a grid scan followed by golden-section refinement.
#[derive(Debug, Clone, Copy)]
pub struct ScanMinimum {
    pub x: f64,
    pub value: f64,
    pub grid_min: f64,
    pub grid_max: f64,
}

/// Scans `f` on `n` evenly spaced points of `[lo, hi]`, then refines the best
/// grid cell by golden section.
pub fn scan_then_refine<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, tol: f64) -> ScanMinimum {
    assert!(n >= 3 && hi > lo);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f64::INFINITY);
    let mut grid_max = f64::NEG_INFINITY;
    for i in 0..n {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
        grid_max = grid_max.max(v);
    }
    let a = (best.0 - step).max(lo);
    let b = (best.0 + step).min(hi);
    let (x, v) = golden_section(&mut f, a, b, tol);
    let (x, v) = if v <= best.1 { (x, v) } else { best };
    ScanMinimum { x, value: v, grid_min: best.1, grid_max }
}

/// Ordinary least squares for `z ≈ p·g(t) + q·h(t)`: returns `(p, q, ssr)`.
pub fn two_term_lsq(g: &[f64], h: &[f64], z: &[f64], w: &[f64]) -> Option<(f64, f64, f64)> {
    let (mut sgg, mut sgh, mut shh, mut sgz, mut shz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..z.len() {
        sgg += w[i] * g[i] * g[i];
        sgh += w[i] * g[i] * h[i];
        shh += w[i] * h[i] * h[i];
        sgz += w[i] * g[i] * z[i];
        shz += w[i] * h[i] * z[i];
    }
    let det = sgg * shh - sgh * sgh;
    if !(det.abs() > 1e-14 * (sgg * shh).max(f64::MIN_POSITIVE)) {
        return None;
    }
    let p = (sgz * shh - shz * sgh) / det;
    let q = (shz * sgg - sgz * sgh) / det;
    let ssr = (0..z.len())
        .map(|i| {
            let r = z[i] - p * g[i] - q * h[i];
            w[i] * r * r
        })
        .sum();
    Some((p, q, ssr))
}
