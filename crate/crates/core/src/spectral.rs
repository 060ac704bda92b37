//! Rotation frequency and declination from pole-initialised records.
//!
//! Starting from `|0⟩`, `z(t) = cos²θ + sin²θ·cos(ωt)`. Three estimators are
//! provided:
//!
//! - [`estimate_fourier`]: the spectrum of the record truncated at the length
//!   that makes the peak sharpest. The DC term gives `θ = arccos√|F(0)|` and
//!   the peak location gives `ω`.
//! - [`fit_cosine_segment`]: least squares for `a + b·cos(ωt)`.
//! - [`refine_minimum_parabola`]: a parabola through extra points around the
//!   first minimum of `z`.
//!
//! `θ` is always reported in `[0, π/2]`. The pole trajectory cannot tell an
//! axis from its mirror image through the equator.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_quadratic, scan_then_refine, two_term_lsq, Quadratic};
use crate::measurement::TimeSeries;

/// Callback that performs additional measurements at the requested
/// (strictly increasing) times.
pub type Acquire<'a> = dyn FnMut(&[f64]) -> Result<TimeSeries> + 'a;

/// Discrete Fourier coefficients `F(ω_n) = (1/N)·Σ_k z_k·exp(−iω_n t_k)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    /// Window length `N·Δt`; bin spacing is `2π/window`.
    pub window: f64,
    pub ne: Option<u32>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        2.0 * PI / self.window
    }

    pub fn magnitude(&self, n: usize) -> f64 {
        self.coefficients[n].norm()
    }

    /// Peak-detection threshold `3/√(N·ne)`; a tiny constant in exact mode.
    pub fn noise_floor(&self) -> f64 {
        match self.ne {
            Some(ne) => 3.0 / ((self.len() as f64) * ne as f64).sqrt(),
            None => 1e-12,
        }
    }

    /// CSV dump with columns `omega,re,im,abs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,re,im,abs\n");
        for (w, c) in self.frequencies.iter().zip(&self.coefficients) {
            let _ = writeln!(out, "{w:.12e},{:.12e},{:.12e},{:.12e}", c.re, c.im, c.norm());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage1Method {
    Fourier,
    CosineFit,
    MinimumParabola,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageOneEstimate {
    pub omega: f64,
    /// Declination in `[0, π/2]`.
    pub theta: f64,
    /// Truncation time used (Fourier) or span of data fitted (other methods).
    pub t_opt: f64,
    pub method: Stage1Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Three-point parabolic interpolation of the Fourier peak.
    pub interpolate: bool,
    /// Divide estimates by `1 − 2p` before converting them to angles.
    pub correct_readout: bool,
    /// Points requested around the first minimum by the parabola method.
    pub refine_points: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { interpolate: true, correct_readout: true, refine_points: 21 }
    }
}

pub(crate) fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Validation("spectrum needs at least 2 samples".into()));
    }
    let dt = times[1] - times[0];
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::NonUniformSampling { index: i + 1 });
        }
    }
    Ok(dt)
}

fn dft_values(times: &[f64], values: &[f64], ne: Option<u32>) -> Result<Spectrum> {
    let dt = check_uniform(times)?;
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let window = n as f64 * dt;
    let t0 = times[0];
    let mut frequencies = Vec::with_capacity(n);
    let coefficients = buf
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let w = 2.0 * PI * k as f64 / window;
            frequencies.push(w);
            let shifted = if t0 == 0.0 { c } else { c * Complex64::from_polar(1.0, -w * t0) };
            shifted / n as f64
        })
        .collect();
    Ok(Spectrum { frequencies, coefficients, window, ne })
}

/// Discrete Fourier transform normalised so that `F(0)` is the sample mean.
pub fn dft(series: &TimeSeries) -> Result<Spectrum> {
    dft_values(&series.times, &series.values, series.config.ne)
}

/// Smallest index `1 ≤ n ≤ N/2` maximising `|F(ω_n)|`, with its frequency.
pub fn find_peak(spec: &Spectrum) -> Result<(usize, f64)> {
    if spec.len() < 3 {
        return Err(Error::Validation("peak search needs a spectrum of length >= 3".into()));
    }
    let mut best = (1, spec.magnitude(1));
    for n in 2..=spec.len() / 2 {
        let m = spec.magnitude(n);
        if m > best.1 {
            best = (n, m);
        }
    }
    let floor = spec.noise_floor();
    if best.1 < floor {
        return Err(Error::NoRotationDetected { peak: best.1, floor });
    }
    Ok((best.0, spec.frequencies[best.0]))
}

/// `P(t_f) = (|F_p| − |F_{p−1}| − |F_{p+1}|)/(|F_{p−1}| + |F_{p+1}|)` for the
/// record truncated at `tf`.
pub fn peak_sharpness(series: &TimeSeries, tf: f64) -> Result<f64> {
    let cut = series.truncated(tf);
    if cut.len() < 8 {
        return Err(Error::UndefinedSharpness(format!("only {} samples up to tf = {tf}", cut.len())));
    }
    let spec = dft(&cut)?;
    let (p, _) = find_peak(&spec)?;
    if p < 2 {
        return Err(Error::UndefinedSharpness("peak at the first bin".into()));
    }
    sharpness_at(&spec, p)
}

fn sharpness_at(spec: &Spectrum, p: usize) -> Result<f64> {
    let (lo, mid, hi) = (spec.magnitude(p - 1), spec.magnitude(p), spec.magnitude(p + 1));
    let num = mid - lo - hi;
    let den = lo + hi;
    if den < 1e-15 {
        // leakage-free limit: side bins vanish to rounding
        if num > 0.0 {
            return Ok(num / 1e-15);
        }
        return Err(Error::UndefinedSharpness(format!("side-bin sum {den:.3e}")));
    }
    Ok(num / den)
}

/// `P(t_f)` for every sample-grid `t_f` in the second half of the record.
/// Truncations where the criterion is undefined are skipped.
pub fn sharpness_curve(series: &TimeSeries) -> Result<Vec<(f64, f64)>> {
    let full = dft(series)?;
    let (p_full, _) = find_peak(&full)?;
    if p_full < 2 {
        return Err(Error::UndefinedSharpness("record spans fewer than two rotation periods".into()));
    }
    let start = series.times[0] + series.span() / 2.0;
    let mut curve = Vec::new();
    for &tf in series.times.iter().filter(|&&t| t >= start) {
        match peak_sharpness(series, tf) {
            Ok(p) => curve.push((tf, p)),
            Err(Error::UndefinedSharpness(_)) | Err(Error::NoRotationDetected { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if curve.is_empty() {
        return Err(Error::UndefinedSharpness("no admissible truncation".into()));
    }
    Ok(curve)
}

/// Truncation time in `[span/2, span]` maximising `P(t_f)`; ties go to the
/// larger time.
pub fn optimal_truncation(series: &TimeSeries) -> Result<f64> {
    Ok(best_of_curve(&sharpness_curve(series)?))
}

pub(crate) fn best_of_curve(curve: &[(f64, f64)]) -> f64 {
    let mut best = curve[0];
    for &(tf, p) in &curve[1..] {
        let tol = 1e-9 * best.1.abs().max(p.abs());
        if p >= best.1 - tol {
            best = (tf, p.max(best.1));
        }
    }
    best.0
}

/// `arccos√|x|` with `|x|` clamped to `[0, 1]`.
pub fn theta_from_population(x: f64) -> f64 {
    x.abs().min(1.0).sqrt().acos()
}

/// Peak frequency refined by a three-point parabola through `|F|`.
fn interpolated_peak(spec: &Spectrum, p: usize) -> f64 {
    if p + 1 > spec.len() / 2 {
        return spec.frequencies[p];
    }
    let (a, b, c) = (spec.magnitude(p - 1), spec.magnitude(p), spec.magnitude(p + 1));
    let den = a - 2.0 * b + c;
    let shift = if den.abs() > 1e-300 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
    (p as f64 + shift) * spec.resolution()
}

/// Fourier route: truncate at [`optimal_truncation`], then read `θ` from the
/// DC term and `ω` from the peak.
pub fn estimate_fourier(series: &TimeSeries, opts: &SpectralOptions) -> Result<StageOneEstimate> {
    let t_opt = optimal_truncation(series)?;
    estimate_fourier_at(series, t_opt, opts)
}

/// Fourier route with a given truncation time.
pub fn estimate_fourier_at(series: &TimeSeries, t_opt: f64, opts: &SpectralOptions) -> Result<StageOneEstimate> {
    let cut = series.truncated(t_opt);
    let spec = dft(&cut)?;
    let (p, omega_p) = find_peak(&spec)?;
    let gain = if opts.correct_readout { series.config.readout_gain() } else { 1.0 };
    let theta = theta_from_population(spec.coefficients[0].re * gain);
    let omega = if opts.interpolate && p >= 1 { interpolated_peak(&spec, p) } else { omega_p };
    Ok(StageOneEstimate { omega, theta, t_opt: cut.config.tf, method: Stage1Method::Fourier })
}

/// Least-squares fit of `a + b·cos(ωt)` over `ω ∈ [0.5, 2]·omega_init`.
pub fn fit_cosine_segment(series: &TimeSeries, omega_init: f64, opts: &SpectralOptions) -> Result<StageOneEstimate> {
    let (a, b, omega) = cosine_fit_params(series, omega_init, opts)?;
    if !(b > 0.0) {
        return Err(Error::FitFailure(format!("fitted cosine amplitude {b:.3e} is not positive")));
    }
    let z0 = series.readout_values(opts.correct_readout)[0];
    let tol = series.config.ne.map_or(1e-6, |ne| 5.0 / (ne as f64).sqrt());
    if series.times[0] == 0.0 && (a + b - z0).abs() > tol + 1e-6 {
        return Err(Error::FitFailure(format!("a + b = {:.4} inconsistent with z(0) = {z0:.4}", a + b)));
    }
    Ok(StageOneEstimate {
        omega,
        theta: theta_from_population(a),
        t_opt: series.span(),
        method: Stage1Method::CosineFit,
    })
}

/// `(a, b, ω)` of the best `a + b·cos(ωt)` fit.
pub fn cosine_fit_params(series: &TimeSeries, omega_init: f64, opts: &SpectralOptions) -> Result<(f64, f64, f64)> {
    if !(omega_init > 0.0 && omega_init.is_finite()) {
        return Err(Error::FitFailure(format!("invalid initial frequency {omega_init}")));
    }
    let span = series.span();
    if span * omega_init < PI / 2.0 {
        return Err(Error::FitFailure("record shorter than a quarter period".into()));
    }
    let z = series.readout_values(opts.correct_readout);
    let ones = vec![1.0; z.len()];
    let w = vec![1.0; z.len()];
    let ssr = |omega: f64| {
        let c: Vec<f64> = series.times.iter().map(|t| (omega * t).cos()).collect();
        two_term_lsq(&ones, &c, &z, &w).map_or(f64::INFINITY, |r| r.2)
    };
    let (lo, hi) = (0.5 * omega_init, 2.0 * omega_init);
    // SSR oscillates in ω with period ~2π/span; sample it well below that
    let n = ((hi - lo) * span / (PI / 4.0)).ceil().max(64.0) as usize;
    let m = scan_then_refine(ssr, lo, hi, n, 1e-13 * omega_init);
    if !(m.grid_max - m.grid_min > 1e-12 * (1.0 + m.grid_max)) || !m.value.is_finite() {
        return Err(Error::FitFailure("residual independent of frequency; rotation unidentifiable".into()));
    }
    let c: Vec<f64> = series.times.iter().map(|t| (m.x * t).cos()).collect();
    let (a, b, _) =
        two_term_lsq(&ones, &c, &z, &w).ok_or_else(|| Error::FitFailure("singular cosine design".into()))?;
    Ok((a, b, m.x))
}

/// Quadratic fitted around the first minimum, with the data it used.
#[derive(Debug, Clone)]
pub struct MinimumFit {
    pub estimate: StageOneEstimate,
    pub parabola: Quadratic,
    pub window: (f64, f64),
    /// Batches acquired for the final window.
    pub acquired: Vec<TimeSeries>,
}

/// Acquisitions per window before giving up on a parabola with no interior
/// minimum.
const MAX_WINDOW_BATCHES: usize = 4;

/// Acquires points in `[0.8, 1.2]·π/omega_coarse` and fits a parabola to the
/// first minimum: `ω = π/t_min`, `θ = arccos√((1 + z_min)/2)`. A window whose
/// parabola has no minimum inside it is measured again and the batches pooled.
pub fn refine_minimum_parabola(
    series: &TimeSeries,
    omega_coarse: f64,
    acquire: &mut Acquire<'_>,
    opts: &SpectralOptions,
) -> Result<StageOneEstimate> {
    Ok(refine_minimum_parabola_detailed(series, omega_coarse, acquire, opts)?.estimate)
}

pub fn refine_minimum_parabola_detailed(
    series: &TimeSeries,
    omega_coarse: f64,
    acquire: &mut Acquire<'_>,
    opts: &SpectralOptions,
) -> Result<MinimumFit> {
    if !(omega_coarse > 0.0 && omega_coarse.is_finite()) {
        return Err(Error::FitFailure(format!("invalid coarse frequency {omega_coarse}")));
    }
    // one recentring pass removes the asymmetric-window bias of a coarse ω
    let first = fit_minimum_window(series, omega_coarse, acquire, opts)?;
    let (parabola, (lo, hi), acquired, t_min, z_min) = match fit_minimum_window(series, PI / first.3, acquire, opts) {
        Ok(second) => second,
        Err(_) => first,
    };
    let theta = ((1.0 + z_min) / 2.0).clamp(0.0, 1.0).sqrt().acos();
    Ok(MinimumFit {
        estimate: StageOneEstimate { omega: PI / t_min, theta, t_opt: hi, method: Stage1Method::MinimumParabola },
        parabola,
        window: (lo, hi),
        acquired,
    })
}

type WindowResult = (Quadratic, (f64, f64), Vec<TimeSeries>, f64, f64);

fn fit_minimum_window(
    series: &TimeSeries,
    omega_coarse: f64,
    acquire: &mut Acquire<'_>,
    opts: &SpectralOptions,
) -> Result<WindowResult> {
    let t_half = PI / omega_coarse;
    let (lo, hi) = (0.8 * t_half, 1.2 * t_half);
    let n = opts.refine_points.max(7);
    let request: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let mut acquired = Vec::new();
    loop {
        acquired.push(acquire(&request)?);
        match fit_pooled(series, &acquired, (lo, hi), opts) {
            Ok((parabola, t_min, z_min)) => return Ok((parabola, (lo, hi), acquired, t_min, z_min)),
            Err(e) if acquired.len() >= MAX_WINDOW_BATCHES => return Err(e),
            Err(_) => {}
        }
    }
}

fn fit_pooled(
    series: &TimeSeries,
    acquired: &[TimeSeries],
    (lo, hi): (f64, f64),
    opts: &SpectralOptions,
) -> Result<(Quadratic, f64, f64)> {
    let mut ts = Vec::new();
    let mut zs = Vec::new();
    let mut ws = Vec::new();
    for s in std::iter::once(series).chain(acquired) {
        let vals = s.readout_values(opts.correct_readout);
        for (t, z) in s.times.iter().zip(vals) {
            if (lo..=hi).contains(t) {
                ts.push(*t);
                zs.push(z);
                ws.push(s.weight());
            }
        }
    }
    let parabola = fit_quadratic(&ts, &zs, Some(&ws))?;
    let (t_min, z_min) = parabola
        .vertex()
        .filter(|_| parabola.a > 0.0)
        .ok_or_else(|| Error::FitFailure("fitted parabola has no minimum".into()))?;
    if !(lo..=hi).contains(&t_min) {
        return Err(Error::FitFailure(format!("vertex t = {t_min:.4} outside window [{lo:.4}, {hi:.4}]")));
    }
    Ok((parabola, t_min, z_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::SamplingConfig;

    fn series_from(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> TimeSeries {
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        let cfg = SamplingConfig::new(dt, (n - 1) as f64 * dt, None, 0.0, 0).unwrap();
        TimeSeries::new(times, values, cfg).unwrap()
    }

    fn direct_dft(values: &[f64], times: &[f64], window: f64) -> Vec<Complex64> {
        let n = values.len();
        (0..n)
            .map(|k| {
                let w = 2.0 * PI * k as f64 / window;
                values.iter().zip(times).map(|(&z, &t)| Complex64::from_polar(z, -w * t)).sum::<Complex64>() / n as f64
            })
            .collect()
    }

    #[test]
    fn fft_matches_direct_sum() {
        let s = series_from(|t| 0.3 + 0.6 * (0.41 * t).cos() - 0.1 * (1.3 * t).sin(), 0.25, 137);
        let spec = dft(&s).unwrap();
        let direct = direct_dft(&s.values, &s.times, spec.window);
        for (a, b) in spec.coefficients.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-12);
        }
        // offset start time: same formula with absolute t_k
        let shifted: Vec<f64> = s.times.iter().map(|t| t + 3.1).collect();
        let s2 = TimeSeries::new(shifted.clone(), s.values.clone(), s.config).unwrap();
        let spec2 = dft(&s2).unwrap();
        let direct2 = direct_dft(&s.values, &shifted, spec2.window);
        for (a, b) in spec2.coefficients.iter().zip(&direct2) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_series_spectrum() {
        let s = series_from(|_| 0.37, 0.5, 40);
        let spec = dft(&s).unwrap();
        assert!((spec.coefficients[0].re - 0.37).abs() < 1e-12);
        assert!(spec.coefficients[1..].iter().all(|c| c.norm() < 1e-12));
        assert!(matches!(find_peak(&spec), Err(Error::NoRotationDetected { .. })));
    }

    #[test]
    fn pure_tone_peaks_at_first_bin_with_half_amplitude() {
        let n = 64;
        let s = series_from(|t| (2.0 * PI * t / n as f64).cos(), 1.0, n);
        let spec = dft(&s).unwrap();
        assert!((spec.magnitude(1) - 0.5).abs() < 1e-12);
        assert_eq!(find_peak(&spec).unwrap().0, 1);
    }

    #[test]
    fn pure_tone_bin_seven() {
        let n = 128;
        let s = series_from(|t| (2.0 * PI * 7.0 * t / n as f64).cos(), 1.0, n);
        assert_eq!(find_peak(&dft(&s).unwrap()).unwrap().0, 7);
    }

    #[test]
    fn dc_term_equals_cos_squared_on_whole_periods() {
        let omega = 0.08f64.sqrt();
        let period = 2.0 * PI / omega;
        // 4 whole periods in 64 samples
        let dt = 4.0 * period / 64.0;
        let s = series_from(|t| 0.5 + 0.5 * (omega * t).cos(), dt, 64);
        let spec = dft(&s).unwrap();
        assert!((spec.coefficients[0].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let cfg = SamplingConfig::new(0.1, 1.0, None, 0.0, 0).unwrap();
        let s = TimeSeries::new(vec![0.0, 0.1, 0.3], vec![0.0, 0.0, 0.0], cfg).unwrap();
        assert!(matches!(dft(&s), Err(Error::NonUniformSampling { index: 2 })));
    }

    #[test]
    fn sharpness_peaks_at_whole_periods() {
        let omega = 0.2828;
        let period = 2.0 * PI / omega;
        let s = series_from(|t| 0.5 + 0.5 * (omega * t).cos(), 0.25, 321);
        // compare P at the truncation nearest 2T against 2.5T
        let p2 = peak_sharpness(&s, 2.0 * period - 0.25).unwrap();
        let p25 = peak_sharpness(&s, 2.5 * period).unwrap();
        assert!(p2 > p25, "{p2} vs {p25}");
        // local maximum over neighbouring grid points
        let curve: Vec<(f64, f64)> = (-8..=8)
            .map(|k| {
                let tf = 2.0 * period - 0.25 + k as f64 * 0.25;
                (tf, peak_sharpness(&s, tf).unwrap())
            })
            .collect();
        let best = curve.iter().cloned().fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        assert!((best.0 + 0.25 - 2.0 * period).abs() <= 0.25 + 1e-9, "{best:?}");
    }

    #[test]
    fn on_bin_tone_is_sharp_and_uses_full_span() {
        let n = 96;
        let s = series_from(|t| 0.5 + 0.5 * (2.0 * PI * 8.0 * t / n as f64).cos(), 1.0, n);
        assert!(peak_sharpness(&s, 95.0).unwrap() > 1e6);
        assert_eq!(optimal_truncation(&s).unwrap(), 95.0);
    }

    #[test]
    fn fourier_estimate_exact_on_whole_periods() {
        let omega = 0.08f64.sqrt();
        let period = 2.0 * PI / omega;
        let dt = period / 40.0;
        let s = series_from(|t| 0.5 + 0.5 * (omega * t).cos(), dt, 160);
        let opts = SpectralOptions { interpolate: false, ..Default::default() };
        let e = estimate_fourier(&s, &opts).unwrap();
        assert!((e.theta - PI / 4.0).abs() < 1e-6, "{}", e.theta);
        assert!((e.omega - omega).abs() < 1e-6, "{}", e.omega);
    }

    #[test]
    fn constant_record_has_zero_theta_but_no_rotation() {
        let s = series_from(|_| 1.0, 0.25, 400);
        assert_eq!(theta_from_population(dft(&s).unwrap().coefficients[0].re), 0.0);
        assert!(matches!(estimate_fourier(&s, &SpectralOptions::default()), Err(Error::NoRotationDetected { .. })));
    }

    #[test]
    fn cosine_fit_quarter_period() {
        let omega = 0.2828;
        let quarter = PI / 2.0 / omega;
        let n = 60;
        let s = series_from(|t| 0.5 + 0.5 * (omega * t).cos(), quarter / (n - 1) as f64, n);
        let (a, b, w) = cosine_fit_params(&s, 0.3, &SpectralOptions::default()).unwrap();
        assert!((a - 0.5).abs() < 1e-6 && (b - 0.5).abs() < 1e-6, "{a} {b}");
        assert!((w - omega).abs() < 1e-6, "{w}");
    }

    #[test]
    fn cosine_fit_constant_fails() {
        let s = series_from(|_| 0.8, 0.25, 200);
        assert!(matches!(fit_cosine_segment(&s, 0.3, &SpectralOptions::default()), Err(Error::FitFailure(_))));
    }

    fn analytic_acquirer(f: impl Fn(f64) -> f64) -> impl FnMut(&[f64]) -> Result<TimeSeries> {
        move |ts: &[f64]| {
            let cfg = SamplingConfig::new(ts[1] - ts[0], ts[ts.len() - 1], None, 0.0, 0).unwrap();
            TimeSeries::new(ts.to_vec(), ts.iter().map(|&t| f(t)).collect(), cfg)
        }
    }

    #[test]
    fn minimum_parabola_noiseless() {
        let omega = 0.08f64.sqrt();
        let z = move |t: f64| 0.5 + 0.5 * (omega * t).cos();
        let s = series_from(z, 2.0, 10);
        let mut acq = analytic_acquirer(z);
        let fit = refine_minimum_parabola_detailed(&s, 0.27, &mut acq, &SpectralOptions::default()).unwrap();
        let (t_min, z_min) = fit.parabola.vertex().unwrap();
        assert!((t_min - 11.107).abs() < 1e-3, "{t_min}");
        assert!(z_min.abs() < 1e-3, "{z_min}");
        assert!((fit.estimate.theta - PI / 4.0).abs() < 1e-3);
        assert!((fit.estimate.omega - omega).abs() < 1e-3);
    }

    #[test]
    fn minimum_parabola_equatorial_axis() {
        let z = |t: f64| (0.5 * t).cos();
        let s = series_from(z, 0.5, 8);
        let mut acq = analytic_acquirer(z);
        let e = refine_minimum_parabola(&s, 0.5, &mut acq, &SpectralOptions::default()).unwrap();
        assert!((e.theta - PI / 2.0).abs() < 0.05, "{}", e.theta);
    }

    #[test]
    fn minimum_parabola_vertex_outside_window() {
        // monotone data inside the window: no interior minimum
        let s = series_from(|t| -0.01 * t, 0.5, 8);
        let mut inner = analytic_acquirer(|t| 0.001 * (t - 40.0).powi(2) - 0.9);
        let mut calls = 0;
        let mut acq = |ts: &[f64]| {
            calls += 1;
            inner(ts)
        };
        let r = refine_minimum_parabola(&s, 0.3, &mut acq, &SpectralOptions::default());
        assert!(matches!(r, Err(Error::FitFailure(_))));
        assert_eq!(calls, MAX_WINDOW_BATCHES);
    }
}
