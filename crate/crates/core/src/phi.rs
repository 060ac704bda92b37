//! Azimuth of a rotation axis relative to a reference axis.
//!
//! The pole state is rotated about the (already characterised) reference axis
//! onto the equator, `s₁ = (cosβ, sinβ, 0)`, and its precession about the
//! target axis is mapped. With `α = ωt` the trajectory is
//!
//! ```text
//! z(α) = (s₁·n)·n_z·(1 − cos α) + (n × s₁)_z·sin α
//! ```
//!
//! whose extrema give `γ` and `δ` for the closed-form candidates, while
//! [`phi_fit`] fits the trajectory directly.
//!
//! For an equatorial `s₁` the axes `(θ, φ)` and `(π − θ, 2β + π − φ)` produce
//! identical trajectories (they differ by a half-turn about the horizontal
//! axis orthogonal to `s₁`). A single record therefore cannot fix the sign of
//! `n_z`. [`phi_fit`] reports both solutions and prefers the upper hemisphere
//! unless the data say otherwise.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::bloch::{rotate, wrap_angle, AxisSpherical, Vector3};
use crate::error::{Error, Result};
use crate::fit::{fit_quadratic, scan_then_refine, two_term_lsq, Quadratic};
use crate::measurement::TimeSeries;
use crate::spectral::Acquire;

/// Rotation that takes the pole onto the equator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepPlan {
    /// Rotation angle about the reference axis.
    pub psi: f64,
    /// Azimuth of the prepared state.
    pub beta: f64,
    pub reference: AxisSpherical,
    /// Prepared Bloch vector as planned, `rotate(pole, d_r, ψ)`.
    pub prepared: Vector3,
}

impl PrepPlan {
    /// Duration of the preparation pulse under the reference Hamiltonian.
    pub fn duration(&self) -> f64 {
        self.psi / self.reference.omega
    }

    /// The ideal equatorial state `(cosβ, sinβ, 0)`.
    pub fn equatorial_state(&self) -> Vector3 {
        let (s, c) = self.beta.sin_cos();
        Vector3::new(c, s, 0.0)
    }
}

/// Vertices of the two parabolas fitted at the extrema of `z(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremaFit {
    pub z_max: f64,
    pub z_min: f64,
    pub alpha_max: f64,
    pub alpha_min: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl ExtremaFit {
    pub fn from_vertices(z_max: f64, alpha_max: f64, z_min: f64, alpha_min: f64) -> Result<Self> {
        if z_max < z_min {
            return Err(Error::Labeling { z_max, z_min });
        }
        let alpha_max = alpha_max.rem_euclid(2.0 * PI);
        let alpha_min = alpha_min.rem_euclid(2.0 * PI);
        Ok(Self {
            z_max,
            z_min,
            alpha_max,
            alpha_min,
            gamma: ((z_max - z_min) / 2.0).min(1.0),
            delta: PI - (alpha_min + alpha_max) / 2.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiOptions {
    /// Divide estimates by `1 − 2p` before fitting.
    pub correct_readout: bool,
    /// Half-width of each extremum window as a fraction of the period.
    pub window_fraction: f64,
    /// Points requested per extremum window.
    pub refine_points: usize,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self { correct_readout: true, window_fraction: 0.075, refine_points: 21 }
    }
}

/// Rotation angle `ψ` about the reference axis that brings the pole onto the
/// equator, and the azimuth `β` of the resulting state.
pub fn plan_equatorial_prep(reference: AxisSpherical) -> Result<PrepPlan> {
    reference.validate()?;
    let (st, ct) = reference.theta.sin_cos();
    // reachable iff sin²θ_r ≥ cos²θ_r
    if st * st < ct * ct - 1e-12 {
        return Err(Error::EquatorUnreachable { theta: reference.theta.min(PI - reference.theta) });
    }
    let psi = (-(ct * ct) / (st * st)).clamp(-1.0, 1.0).acos();
    let prepared = rotate(Vector3::POLE, reference.direction(), psi)?;
    if prepared.z.abs() >= 1e-9 {
        return Err(Error::Validation(format!("preparation misses the equator by {:.3e}", prepared.z)));
    }
    let beta = prepared.y.atan2(prepared.x);
    Ok(PrepPlan { psi, beta, reference, prepared })
}

/// Sign of the first clear departure from zero and the index where it occurs.
fn departure(values: &[f64], ne: Option<u32>) -> Option<(usize, f64)> {
    let peak = values.iter().skip(1).fold(0.0f64, |m, v| m.max(v.abs()));
    let tau = match ne {
        Some(ne) => (2.0 / (ne as f64).sqrt()).min(0.5 * peak),
        None => 1e-9 * peak,
    };
    values.iter().enumerate().skip(1).find(|(_, v)| v.abs() > tau).map(|(j, v)| (j, v.signum()))
}

/// First `t > 0` where `z` changes sign after leaving the known zero at
/// `t = 0`, by linear interpolation between the bracketing samples.
pub fn find_zero_crossing(series: &TimeSeries) -> Result<f64> {
    let z = &series.values;
    let (j, sign) = departure(z, series.config.ne).ok_or(Error::NoCrossing)?;
    let k = (j + 1..z.len()).find(|&k| sign * z[k] < 0.0).ok_or(Error::NoCrossing)?;
    let (t1, t2) = (series.times[k - 1], series.times[k]);
    let (z1, z2) = (z[k - 1], z[k]);
    Ok(t1 + (t2 - t1) * z1 / (z1 - z2))
}

/// First zero `t0 > 0` of the two-term model `A(1 − cos ωt) + B sin ωt`
/// fitted to the whole record with `ω` known.
///
/// The model zero sits at `α₀ = 2·atan2(−B, A)` (taken in `(0, 2π)`). Unlike
/// the bracketing search it does not react to single noisy samples near the
/// axis.
pub fn fit_zero_crossing(series: &TimeSeries, omega: f64, opts: &PhiOptions) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Validation(format!("omega must be > 0, got {omega}")));
    }
    let (mut g, mut h) = (Vec::with_capacity(series.len()), Vec::with_capacity(series.len()));
    for t in &series.times {
        let (sn, cs) = (omega * t).sin_cos();
        g.push(1.0 - cs);
        h.push(sn);
    }
    let w = vec![series.weight(); series.len()];
    let (a, b, _) = two_term_lsq(&g, &h, &series.readout_values(opts.correct_readout), &w).ok_or(Error::NoCrossing)?;
    if a.hypot(b) <= 1e-12 {
        return Err(Error::NoCrossing);
    }
    let half = (-b).atan2(a).rem_euclid(PI);
    if half <= 1e-9 {
        return Err(Error::NoCrossing);
    }
    Ok(2.0 * half / omega)
}

/// Parabola fitted in one extremum window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowFit {
    pub window: (f64, f64),
    pub parabola: Quadratic,
    pub vertex: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct ExtremaDetail {
    pub fit: ExtremaFit,
    pub windows: [WindowFit; 2],
    pub acquired: Vec<TimeSeries>,
}

/// Predicts the extrema halfway between consecutive zeros (`0`, `t0`, `T`),
/// acquires points around each and fits parabolas.
pub fn locate_extrema(
    series: &TimeSeries,
    omega: f64,
    t0: f64,
    acquire: &mut Acquire<'_>,
    opts: &PhiOptions,
) -> Result<ExtremaDetail> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Validation(format!("omega must be > 0, got {omega}")));
    }
    let period = 2.0 * PI / omega;
    let half = opts.window_fraction * period;
    let n = opts.refine_points.max(7);
    let centers = [t0 / 2.0, (t0 + period) / 2.0];

    let mut acquired = Vec::with_capacity(2);
    let mut fits = Vec::with_capacity(2);
    for c in centers {
        let (lo, hi) = (c - half, c + half);
        let request: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let batch = acquire(&request)?;
        let (mut ts, mut zs, mut ws) = (Vec::new(), Vec::new(), Vec::new());
        for s in [series, &batch] {
            for (t, z) in s.times.iter().zip(s.readout_values(opts.correct_readout)) {
                if (lo..=hi).contains(t) {
                    ts.push(*t);
                    zs.push(z);
                    ws.push(s.weight());
                }
            }
        }
        let parabola = fit_quadratic(&ts, &zs, Some(&ws))?;
        let vertex = parabola.vertex().ok_or_else(|| Error::FitFailure("flat parabola in extremum window".into()))?;
        if !(lo..=hi).contains(&vertex.0) {
            return Err(Error::FitFailure(format!("vertex t = {:.4} escapes window [{lo:.4}, {hi:.4}]", vertex.0)));
        }
        fits.push(WindowFit { window: (lo, hi), parabola, vertex });
        acquired.push(batch);
    }

    // the first lobe (0 < t < t0) has the sign of the initial departure
    let vals = series.readout_values(opts.correct_readout);
    let first_lobe: f64 = series.times.iter().zip(&vals).filter(|(t, _)| **t > 0.0 && **t < t0).map(|(_, z)| z).sum();
    let (imax, imin) = if first_lobe >= 0.0 { (0, 1) } else { (1, 0) };
    let (t_max, z_max) = fits[imax].vertex;
    let (t_min, z_min) = fits[imin].vertex;
    let fit = ExtremaFit::from_vertices(z_max, omega * t_max, z_min, omega * t_min)?;
    let windows = [fits[0].clone(), fits[1].clone()];
    Ok(ExtremaDetail { fit, windows, acquired })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `−β − arcsin u`
    Principal,
    /// `−β − (π − arcsin u)`
    Supplement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiCandidate {
    pub phi: f64,
    pub branch: Branch,
    /// Sign-flipped copy of the branch value.
    pub mirrored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCandidates {
    pub candidates: Vec<PhiCandidate>,
    pub u: f64,
    /// `γ·cosδ/sinθ` fell outside `[−1, 1]` and was clamped.
    pub clamped: bool,
}

/// Candidate azimuths `−β − arcsin(γ·cosδ/sinθ)` and its supplement, plus
/// their negatives. No selection is made.
pub fn phi_closed_form(fit: &ExtremaFit, beta: f64, theta: f64) -> Result<PhiCandidates> {
    let st = theta.sin();
    if st.abs() <= 1e-9 {
        return Err(Error::PoleDegenerate);
    }
    let raw = fit.gamma * fit.delta.cos() / st;
    let u = raw.clamp(-1.0, 1.0);
    let asin = u.asin();
    let principal = wrap_angle(-beta - asin);
    let supplement = wrap_angle(-beta - (PI - asin));
    let candidates = vec![
        PhiCandidate { phi: principal, branch: Branch::Principal, mirrored: false },
        PhiCandidate { phi: supplement, branch: Branch::Supplement, mirrored: false },
        PhiCandidate { phi: wrap_angle(-principal), branch: Branch::Principal, mirrored: true },
        PhiCandidate { phi: wrap_angle(-supplement), branch: Branch::Supplement, mirrored: true },
    ];
    Ok(PhiCandidates { candidates, u, clamped: raw != u })
}

/// Outcome of the direct trajectory fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiFit {
    pub phi: f64,
    /// `+1` for declination `θ`, `−1` for `π − θ`.
    pub theta_sign: i8,
    /// False when both hemispheres fit equally well.
    pub sign_resolved: bool,
    /// Best azimuth under the other hemisphere hypothesis.
    pub alternate_phi: f64,
    pub ssr: f64,
    pub ssr_alternate: f64,
}

impl PhiFit {
    pub fn declination(&self, theta: f64) -> f64 {
        if self.theta_sign > 0 {
            theta
        } else {
            PI - theta
        }
    }

    pub fn alternate_declination(&self, theta: f64) -> f64 {
        if self.theta_sign > 0 {
            PI - theta
        } else {
            theta
        }
    }
}

/// Model `z(t)` of `(cosβ, sinβ, 0)` precessing about the axis `(θ, φ)`.
pub fn equatorial_trajectory(t: f64, omega: f64, theta: f64, phi: f64, beta: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let x = phi - beta;
    let a = st * ct * x.cos();
    let b = -st * x.sin();
    let (s, c) = (omega * t).sin_cos();
    a * (1.0 - c) + b * s
}

/// Fits `φ` (and the hemisphere of the axis) to equatorial-start records
/// over the exact trajectory.
///
/// Noisy records are fitted by maximum binomial likelihood of the shot
/// counts, with the readout flips folded into the model when
/// `correct_readout` is set; noiseless records by least squares. `ssr` holds
/// the minimised objective (negative log-likelihood or squared residuals).
pub fn phi_fit(batches: &[TimeSeries], omega: f64, theta: f64, beta: f64, opts: &PhiOptions) -> Result<PhiFit> {
    let mut g = Vec::new();
    let mut h = Vec::new();
    let mut z = Vec::new();
    let mut ne = Vec::new();
    let mut contraction = Vec::new();
    let mut exact = true;
    for s in batches {
        exact &= s.config.is_exact();
        let c = if opts.correct_readout { 1.0 - 2.0 * s.config.readout_error } else { 1.0 };
        for (t, v) in s.times.iter().zip(&s.values) {
            let (sn, cs) = (omega * t).sin_cos();
            g.push(1.0 - cs);
            h.push(sn);
            z.push(*v);
            ne.push(s.weight());
            contraction.push(c);
        }
    }
    if z.is_empty() {
        return Err(Error::Validation("no stage-2 data".into()));
    }
    if theta.sin().abs() <= 1e-9 {
        return Err(Error::PoleDegenerate);
    }
    let objective = |theta_h: f64| {
        let (st, ct) = theta_h.sin_cos();
        let (g, h, z, ne, contraction) = (&g, &h, &z, &ne, &contraction);
        move |phi: f64| {
            let x = phi - beta;
            let a = st * ct * x.cos();
            let b = -st * x.sin();
            let mut acc = 0.0;
            for i in 0..z.len() {
                let m = contraction[i] * (a * g[i] + b * h[i]);
                if exact {
                    acc += (z[i] - m).powi(2);
                } else {
                    let q = ((1.0 + m) / 2.0).clamp(1e-12, 1.0 - 1e-12);
                    let k = ne[i] * (1.0 + z[i]) / 2.0;
                    acc -= k * q.ln() + (ne[i] - k) * (1.0 - q).ln();
                }
            }
            acc
        }
    };
    let fit = |theta_h: f64| scan_then_refine(objective(theta_h), -PI, PI, 721, 1e-10);
    let up = fit(theta);
    let down = fit(PI - theta);

    // a log-likelihood range below one unit carries no azimuth information
    let floor = if exact { 1e-12 * (1.0 + up.grid_max) } else { 1.0 };
    if up.grid_max - up.grid_min <= floor {
        return Err(Error::Unidentifiable);
    }
    let diff = down.value - up.value;
    let resolved = diff.abs() > 1e-9 * (1.0 + up.value.abs().min(down.value.abs()));
    let (best, other, sign) = if resolved && diff < 0.0 { (down, up, -1) } else { (up, down, 1) };
    Ok(PhiFit {
        phi: wrap_angle(best.x),
        theta_sign: sign,
        sign_resolved: resolved,
        alternate_phi: wrap_angle(other.x),
        ssr: best.value,
        ssr_alternate: other.value,
    })
}

/// Smallest reference declination from which the equator is reachable.
pub const MIN_REFERENCE_THETA: f64 = FRAC_PI_4;

/// Everything stage 2 produced for one target axis.
#[derive(Debug, Clone)]
pub struct AzimuthEstimate {
    pub t0: f64,
    pub extrema: ExtremaDetail,
    pub candidates: PhiCandidates,
    pub fit: PhiFit,
}

/// Runs the stage-2 chain on a coarse equatorial-start record: zero crossing,
/// extrema parabolas, closed-form candidates and the trajectory fit over all
/// acquired data.
pub fn estimate_azimuth(
    coarse: &TimeSeries,
    omega: f64,
    theta: f64,
    plan: &PrepPlan,
    acquire: &mut Acquire<'_>,
    opts: &PhiOptions,
) -> Result<AzimuthEstimate> {
    let t0 = fit_zero_crossing(coarse, omega, opts)?;
    let extrema = locate_extrema(coarse, omega, t0, acquire, opts)?;
    let candidates = phi_closed_form(&extrema.fit, plan.beta, theta)?;
    let mut batches = vec![coarse.clone()];
    batches.extend(extrema.acquired.iter().cloned());
    let fit = phi_fit(&batches, omega, theta, plan.beta, opts)?;
    Ok(AzimuthEstimate { t0, extrema, candidates, fit })
}
