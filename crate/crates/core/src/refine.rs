//! Joint maximum-likelihood polish of one rotation axis over every record
//! taken for its control setting.
//!
//! Each record starts from a known Bloch vector (the pole, or the prepared
//! equatorial state) and has the exact model `z(t) = evolve_z(s, d, t)`.
//! Shot counts are binomial, so the log-likelihood in terms of the readout
//! mean `m` has score `N_e(v − m)/(1 − m²)` and information `N_e/(1 − m²)`:
//! a reweighted least-squares problem solved here by damped Fisher scoring
//! on the Cartesian axis. Noiseless records fall back to plain least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bloch::{evolve_z, Vector3};
use crate::error::{Error, Result};
use crate::measurement::TimeSeries;

/// A record and the Bloch vector it started from.
#[derive(Debug, Clone, Copy)]
pub struct Record<'a> {
    pub series: &'a TimeSeries,
    pub start: Vector3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub axis: Vector3,
    /// Negative log-likelihood (squared residuals for noiseless data).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Which Cartesian components are free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Freedom {
    All,
    /// `y = 0`: the reference axis, whose azimuth defines the gauge.
    XZ,
}

impl Freedom {
    fn free(self) -> &'static [usize] {
        match self {
            Freedom::All => &[0, 1, 2],
            Freedom::XZ => &[0, 2],
        }
    }
}

struct Point {
    t: f64,
    start: Vector3,
    value: f64,
    ne: f64,
    contraction: f64,
}

fn collect(records: &[Record<'_>], correct_readout: bool) -> (Vec<Point>, bool) {
    let mut pts = Vec::new();
    let mut exact = true;
    for r in records {
        let cfg = &r.series.config;
        exact &= cfg.is_exact();
        let contraction = if correct_readout { 1.0 - 2.0 * cfg.readout_error } else { 1.0 };
        for (&t, &value) in r.series.times.iter().zip(&r.series.values) {
            pts.push(Point { t, start: r.start, value, ne: r.series.weight(), contraction });
        }
    }
    (pts, exact)
}

fn model(p: &Point, d: Vector3) -> Result<f64> {
    Ok(p.contraction * evolve_z(p.start, d, p.t)?)
}

fn objective(pts: &[Point], d: Vector3, exact: bool) -> Result<f64> {
    let mut acc = 0.0;
    for p in pts {
        let m = model(p, d)?;
        if exact {
            acc += (p.value - m).powi(2);
        } else {
            let q = ((1.0 + m) / 2.0).clamp(1e-12, 1.0 - 1e-12);
            let k = p.ne * (1.0 + p.value) / 2.0;
            acc -= k * q.ln() + (p.ne - k) * (1.0 - q).ln();
        }
    }
    Ok(acc)
}

/// Polishes `init` to the likelihood maximum over `records`.
pub fn refine_axis(
    records: &[Record<'_>],
    init: Vector3,
    freedom: Freedom,
    correct_readout: bool,
) -> Result<Refinement> {
    let (pts, exact) = collect(records, correct_readout);
    if pts.is_empty() {
        return Err(Error::Validation("no records to refine against".into()));
    }
    init.unit()?;
    let free = freedom.free();
    let mut d = init;
    if freedom == Freedom::XZ {
        d.y = 0.0;
    }
    let mut f = objective(&pts, d, exact)?;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 60 {
        iterations += 1;
        let k = free.len();
        let mut info = DMatrix::<f64>::zeros(k, k);
        let mut score = DVector::<f64>::zeros(k);
        let h = 1e-6 * d.norm().max(1e-3);
        for p in &pts {
            let m = model(p, d)?;
            let mut grad = [0.0; 3];
            for (j, &c) in free.iter().enumerate() {
                let mut e = [0.0; 3];
                e[c] = h;
                let step = Vector3::from_components(e);
                grad[j] = (model(p, d + step)? - model(p, d - step)?) / (2.0 * h);
            }
            let w = if exact { 1.0 } else { p.ne / (1.0 - m * m).max(1e-6) };
            for a in 0..k {
                score[a] += w * (p.value - m) * grad[a];
                for b in 0..k {
                    info[(a, b)] += w * grad[a] * grad[b];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..20 {
            let mut damped = info.clone();
            for a in 0..k {
                damped[(a, a)] += lambda * info[(a, a)].max(1e-12);
            }
            let Some(delta) = damped.lu().solve(&score) else {
                lambda *= 10.0;
                continue;
            };
            let mut c = d.to_array();
            for (j, &idx) in free.iter().enumerate() {
                c[idx] += delta[j];
            }
            let trial = Vector3::from_components(c);
            if trial.norm() > 0.0 {
                let ft = objective(&pts, trial, exact)?;
                if ft <= f {
                    let small = delta.norm() <= 1e-12 * d.norm().max(1.0);
                    let flat = f - ft <= 1e-14 * f.abs().max(1.0);
                    d = trial;
                    f = ft;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    converged = small || flat;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: already at the optimum
            converged = true;
        }
        if converged {
            break;
        }
    }
    Ok(Refinement { axis: d, objective: f, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{measure_at, ExperimentId, SamplingConfig};

    fn grid(dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn noiseless_records_pin_the_axis() {
        let truth = Vector3::new(0.3, 0.1, 0.1);
        let cfg = SamplingConfig::new(0.25, 30.0, None, 0.0, 0).unwrap();
        let s1 = Vector3::new(0.5, -0.75f64.sqrt(), 0.0);
        let a = measure_at(truth, Vector3::POLE, &grid(0.25, 121), &cfg, ExperimentId(0)).unwrap();
        let b = measure_at(truth, s1, &grid(0.25, 90), &cfg, ExperimentId(1)).unwrap();
        let records = [Record { series: &a, start: Vector3::POLE }, Record { series: &b, start: s1 }];
        let r = refine_axis(&records, Vector3::new(0.29, 0.11, 0.095), Freedom::All, true).unwrap();
        assert!(r.converged);
        assert!(r.axis.distance(truth) < 1e-8, "{:?}", r.axis);
    }

    #[test]
    fn gauge_component_stays_zero() {
        let truth = Vector3::new(0.2, 0.0, 0.1);
        let cfg = SamplingConfig::new(0.25, 60.0, Some(10), 0.03, 4).unwrap();
        let a = measure_at(truth, Vector3::POLE, &grid(0.25, 241), &cfg, ExperimentId(0)).unwrap();
        let r = refine_axis(
            &[Record { series: &a, start: Vector3::POLE }],
            Vector3::new(0.21, 0.0, 0.09),
            Freedom::XZ,
            true,
        )
        .unwrap();
        assert_eq!(r.axis.y, 0.0);
        assert!(r.axis.distance(truth) < 0.02, "{:?}", r.axis);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(refine_axis(&[], Vector3::POLE, Freedom::All, true).is_err());
    }
}
