//! Straight-line regression of recovered axes against control amplitude.
//!
//! Each channel's axes `d₀ + f·dₘ` are pooled with the free-evolution axes at
//! `f = 0`. A least-squares line is fitted per Cartesian component: slopes
//! estimate `dₘ` and intercepts estimate `d₀`.

use serde::{Deserialize, Serialize};

use crate::bloch::{HamiltonianModel, Vector3};
use crate::error::{Error, Result};

/// Recovered axis for one control setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMeasurement {
    /// `0` for free evolution.
    pub channel: usize,
    pub f: f64,
    pub axis: Vector3,
    /// Equally consistent axis from the other hemisphere, when the stage-2
    /// data could not decide between them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate: Option<Vector3>,
}

impl AxisMeasurement {
    pub fn new(channel: usize, f: f64, axis: Vector3) -> Self {
        Self { channel, f, axis, alternate: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    /// Variance of the intercept from the residual scatter; `None` with
    /// fewer than three points.
    pub intercept_var: Option<f64>,
}

/// Ordinary least squares `value ≈ intercept + slope·f`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::RankDeficient);
    }
    let nf = n as f64;
    let fbar = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let vbar = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - fbar).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::RankDeficient);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - fbar) * (p.1 - vbar)).sum();
    let slope = sxy / sxx;
    let intercept = vbar - slope * fbar;
    let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let intercept_var = (n > 2).then(|| rss / (nf - 2.0) * (1.0 / nf + fbar * fbar / sxx));
    Ok(LineFit { slope, intercept, rms: (rss / nf).sqrt(), intercept_var })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub channel: usize,
    pub lines: [LineFit; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedModel {
    pub model: HamiltonianModel,
    pub channels: Vec<ChannelFit>,
    /// Per input measurement: the alternate hemisphere axis was used.
    pub used_alternate: Vec<bool>,
    /// Per-channel intercepts disagree beyond 5× the pooled RMS.
    pub inconsistent_intercepts: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<f64>>,
}

/// Hemisphere choices are enumerated up to this many ambiguous settings.
const MAX_ENUMERATED: usize = 12;

fn choose(m: &AxisMeasurement, alt: bool) -> Vector3 {
    if alt {
        m.alternate.unwrap_or(m.axis)
    } else {
        m.axis
    }
}

fn fit_lines(free: &[Vector3], entries: &[(f64, Vector3)]) -> Result<[LineFit; 3]> {
    let mut out = [LineFit { slope: 0.0, intercept: 0.0, rms: 0.0, intercept_var: None }; 3];
    for (c, line) in out.iter_mut().enumerate() {
        let pts: Vec<(f64, f64)> = free
            .iter()
            .map(|v| (0.0, v.component(c)))
            .chain(entries.iter().map(|(f, v)| (*f, v.component(c))))
            .collect();
        *line = linear_fit(&pts)?;
    }
    Ok(out)
}

fn total_rss(lines: &[LineFit; 3], n: usize) -> f64 {
    lines.iter().map(|l| l.rms * l.rms * n as f64).sum()
}

fn masks_by_popcount(k: usize) -> Vec<u32> {
    let mut m: Vec<u32> = (0..(1u32 << k)).collect();
    m.sort_by_key(|x| (x.count_ones(), *x));
    m
}

/// Best hemisphere assignment for one channel given the free-evolution axes.
fn fit_channel(free: &[Vector3], entries: &[&AxisMeasurement]) -> Result<(f64, [LineFit; 3], Vec<bool>)> {
    let ambiguous: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].alternate.is_some()).collect();
    let k = if ambiguous.len() <= MAX_ENUMERATED { ambiguous.len() } else { 0 };
    let n = free.len() + entries.len();
    let mut best: Option<(f64, [LineFit; 3], Vec<bool>)> = None;
    for mask in masks_by_popcount(k) {
        let mut flags = vec![false; entries.len()];
        for (bit, &i) in ambiguous.iter().take(k).enumerate() {
            flags[i] = mask >> bit & 1 == 1;
        }
        let pts: Vec<(f64, Vector3)> = entries.iter().zip(&flags).map(|(m, &a)| (m.f, choose(m, a))).collect();
        let lines = fit_lines(free, &pts)?;
        let rss = total_rss(&lines, n);
        let better = match &best {
            None => true,
            Some((b, _, _)) => rss < b * (1.0 - 1e-9) - 1e-15,
        };
        if better {
            best = Some((rss, lines, flags));
        }
    }
    Ok(best.expect("at least one assignment"))
}

/// Residual sum, free-evolution axes, channel fits and alternate choices.
type Candidate = (f64, Vec<Vector3>, Vec<ChannelFit>, Vec<bool>);

/// Recovers `d₀` and every `dₘ` from per-setting axes.
///
/// Where a setting carries an alternate axis, every combination of choices
/// within a channel is tried and the most linear one kept. Ties keep the
/// primary axes.
pub fn extract_hamiltonian(measurements: &[AxisMeasurement]) -> Result<IdentifiedModel> {
    let mut sorted: Vec<usize> = (0..measurements.len()).collect();
    sorted.sort_by(|&i, &j| {
        let (a, b) = (&measurements[i], &measurements[j]);
        a.channel.cmp(&b.channel).then_with(|| {
            (a.f, a.axis.x, a.axis.y, a.axis.z)
                .partial_cmp(&(b.f, b.axis.x, b.axis.y, b.axis.z))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });

    let of_channel =
        |c: usize| -> Vec<usize> { sorted.iter().copied().filter(|&i| measurements[i].channel == c).collect() };
    let free_idx = of_channel(0);
    let free: Vec<&AxisMeasurement> = free_idx.iter().map(|&i| &measurements[i]).collect();
    if let Some(m) = free.iter().find(|m| m.f != 0.0) {
        return Err(Error::Validation(format!("free-evolution entry with f = {}", m.f)));
    }
    let channels = measurements.iter().map(|m| m.channel).max().unwrap_or(0);
    let per_channel: Vec<Vec<usize>> = (1..=channels).map(of_channel).collect();
    if let Some(c) = per_channel.iter().position(|v| v.is_empty()) {
        return Err(Error::Validation(format!("no settings for channel {}", c + 1)));
    }
    if channels == 0 && free.is_empty() {
        return Err(Error::Validation("no measurements".into()));
    }

    let free_ambiguous: Vec<usize> = (0..free.len()).filter(|&i| free[i].alternate.is_some()).collect();
    let kf = if free_ambiguous.len() <= MAX_ENUMERATED { free_ambiguous.len() } else { 0 };
    let mut best: Option<Candidate> = None;
    for mask in masks_by_popcount(kf) {
        let mut used = vec![false; measurements.len()];
        let mut free_axes: Vec<Vector3> = free.iter().map(|m| m.axis).collect();
        for (bit, &i) in free_ambiguous.iter().take(kf).enumerate() {
            if mask >> bit & 1 == 1 {
                free_axes[i] = choose(free[i], true);
                used[free_idx[i]] = true;
            }
        }
        let mut rss = 0.0;
        let mut fits = Vec::with_capacity(channels);
        for (c, entries) in per_channel.iter().enumerate() {
            let refs: Vec<&AxisMeasurement> = entries.iter().map(|&i| &measurements[i]).collect();
            let (r, lines, flags) = fit_channel(&free_axes, &refs)?;
            rss += r;
            for (&i, flag) in entries.iter().zip(flags) {
                used[i] = flag;
            }
            fits.push(ChannelFit { channel: c + 1, lines });
        }
        if channels == 0 {
            let mean = free_axes.iter().fold(Vector3::ZERO, |a, &b| a + b) * (1.0 / free_axes.len() as f64);
            rss = free_axes.iter().map(|v| (*v - mean).dot(*v - mean)).sum();
        }
        let better = match &best {
            None => true,
            Some((b, ..)) => rss < b * (1.0 - 1e-9) - 1e-15,
        };
        if better {
            best = Some((rss, free_axes, fits, used));
        }
    }
    let (_, free_axes, fits, used_alternate) = best.expect("at least one assignment");

    let d0 = if fits.is_empty() {
        free_axes.iter().fold(Vector3::ZERO, |a, &b| a + b) * (1.0 / free_axes.len() as f64)
    } else {
        let mut comp = [0.0; 3];
        for (c, out) in comp.iter_mut().enumerate() {
            let vars: Option<Vec<f64>> = fits.iter().map(|f| f.lines[c].intercept_var.filter(|v| *v > 0.0)).collect();
            *out = match vars {
                Some(v) => {
                    let (num, den) = fits
                        .iter()
                        .zip(&v)
                        .fold((0.0, 0.0), |(n, d), (f, var)| (n + f.lines[c].intercept / var, d + 1.0 / var));
                    num / den
                }
                None => fits.iter().map(|f| f.lines[c].intercept).sum::<f64>() / fits.len() as f64,
            };
        }
        Vector3::from_components(comp)
    };

    let controls = fits.iter().map(|f| Vector3::new(f.lines[0].slope, f.lines[1].slope, f.lines[2].slope)).collect();

    let pooled_rms = {
        let all: Vec<f64> = fits.iter().flat_map(|f| f.lines.iter().map(|l| l.rms * l.rms)).collect();
        if all.is_empty() {
            0.0
        } else {
            (all.iter().sum::<f64>() / all.len() as f64).sqrt()
        }
    };
    let threshold = (5.0 * pooled_rms).max(1e-9);
    let inconsistent_intercepts =
        fits.iter().any(|f| (0..3).any(|c| (f.lines[c].intercept - d0.component(c)).abs() > threshold));

    Ok(IdentifiedModel {
        model: HamiltonianModel { d0, controls },
        channels: fits,
        used_alternate,
        inconsistent_intercepts,
        distances: None,
    })
}

/// `[‖d₀ᵉˢᵗ − d₀‖, ‖d₁ᵉˢᵗ − d₁‖, …]`.
pub fn error_norms(est: &HamiltonianModel, actual: &HamiltonianModel) -> Result<Vec<f64>> {
    if est.channels() != actual.channels() {
        return Err(Error::ChannelMismatch { left: est.channels(), right: actual.channels() });
    }
    Ok(std::iter::once(est.d0.distance(actual.d0))
        .chain(est.controls.iter().zip(&actual.controls).map(|(a, b)| a.distance(*b)))
        .collect())
}

/// Expresses `truth` in the frame where `reference` (given in the truth
/// frame) has zero azimuth and non-negative z.
///
/// Both transformations leave every `σz` record starting from the pole
/// unchanged, so this is the frame in which estimates are reported.
pub fn gauge_align(truth: &HamiltonianModel, reference: Vector3) -> HamiltonianModel {
    let phi = if reference.x == 0.0 && reference.y == 0.0 { 0.0 } else { reference.y.atan2(reference.x) };
    let rotated = truth.rotated_z(-phi);
    if reference.z < 0.0 {
        let flip = |v: Vector3| Vector3::new(v.x, -v.y, -v.z);
        HamiltonianModel { d0: flip(rotated.d0), controls: rotated.controls.iter().map(|&v| flip(v)).collect() }
    } else {
        rotated
    }
}
