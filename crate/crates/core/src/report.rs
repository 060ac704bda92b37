//! Identification report, replicate summaries and plot-ready data files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bloch::{AxisSpherical, HamiltonianModel, Vector3};
use crate::error::{Error, Result};
use crate::identification::IdentifiedModel;
use crate::measurement::{read_series_file, TimeSeries};
use crate::phi::{ExtremaFit, PhiCandidates, PhiFit, PrepPlan, WindowFit};
use crate::spectral::{dft, sharpness_curve, Stage1Method, StageOneEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub channel: usize,
    pub f: f64,
    /// Staged estimate, `φ = 0` by definition.
    pub axis: AxisSpherical,
    /// Likelihood-polished Cartesian axis, when enabled.
    #[serde(default)]
    pub refined: Option<Vector3>,
    pub plan: PrepPlan,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage2Report {
    /// Duration of the preparation pulse about the reference axis.
    pub prep_time: f64,
    /// Zero of the two-term model fit, used to place the extremum windows.
    #[serde(default)]
    pub t0: Option<f64>,
    /// Zero from the first sign change between raw samples.
    #[serde(default)]
    pub t0_raw: Option<f64>,
    #[serde(default)]
    pub extrema: Option<ExtremaFit>,
    #[serde(default)]
    pub windows: Vec<WindowFit>,
    #[serde(default)]
    pub candidates: Option<PhiCandidates>,
    pub fit: PhiFit,
    /// Number of equatorial-start records used by the fit.
    pub batches: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SettingReport {
    pub channel: usize,
    pub index: usize,
    pub f: f64,
    pub stage1: StageOneEstimate,
    #[serde(default)]
    pub stage2: Option<Stage2Report>,
    /// Axis from the stage-1 and stage-2 estimates alone.
    pub staged: Vector3,
    #[serde(default)]
    pub staged_alternate: Option<Vector3>,
    /// Final axis (likelihood-polished unless disabled).
    pub axis: Vector3,
    #[serde(default)]
    pub alternate: Option<Vector3>,
    /// Axis used by the regression (primary or alternate).
    pub selected: Vector3,
    #[serde(default)]
    pub true_axis: Option<Vector3>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub method: Stage1Method,
    pub exact: bool,
    pub reference: ReferenceReport,
    pub settings: Vec<SettingReport>,
    pub identified: IdentifiedModel,
    /// True model expressed in the estimate's gauge.
    #[serde(default)]
    pub truth: Option<HamiltonianModel>,
    #[serde(default)]
    pub distances: Option<Vec<f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read report {}: {e}", path.display())))?;
        let report: Self = serde_json::from_str(&text)?;
        if report.settings.is_empty() {
            return Err(Error::Validation(format!("report {} has no settings", path.display())));
        }
        Ok(report)
    }
}

/// `(q10, median, q90)` by linear interpolation between order statistics.
pub fn quantiles(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let x = p * (v.len() - 1) as f64;
        let (i, frac) = (x.floor() as usize, x.fract());
        if i + 1 < v.len() {
            v[i] + frac * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    Some((q(0.1), q(0.5), q(0.9)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Band {
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub replicates: usize,
    pub seeds: Vec<u64>,
    pub failures: Vec<ReplicateFailure>,
    /// One band per recovered vector `d₀, d₁, …`; present with truth.
    pub distances: Vec<Band>,
    pub d0: [Band; 3],
    pub controls: Vec<[Band; 3]>,
}

impl Summary {
    pub fn from_reports(reports: &[Report], failures: Vec<ReplicateFailure>) -> Self {
        let band = |vals: Vec<f64>| {
            let (q10, median, q90) = quantiles(&vals).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            Band { q10, median, q90 }
        };
        let comps = |get: &dyn Fn(&Report) -> Option<Vector3>| -> [Band; 3] {
            [0, 1, 2].map(|c| band(reports.iter().filter_map(|r| get(r).map(|v| v.component(c))).collect()))
        };
        let m = reports.first().map_or(0, |r| r.identified.model.channels());
        let distances = match reports.first().and_then(|r| r.distances.as_ref()) {
            Some(d) => (0..d.len())
                .map(|i| band(reports.iter().filter_map(|r| r.distances.as_ref().map(|d| d[i])).collect()))
                .collect(),
            None => Vec::new(),
        };
        Self {
            replicates: reports.len() + failures.len(),
            seeds: reports.iter().map(|r| r.seed).collect(),
            failures,
            distances,
            d0: comps(&|r| Some(r.identified.model.d0)),
            controls: (0..m).map(|i| comps(&|r| r.identified.model.controls.get(i).copied())).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// File name of a recorded series.
pub fn series_file_name(stage: u16, channel: usize, index: usize, batch: u16) -> String {
    format!("s{stage}_c{channel}_k{index}_b{batch}.csv")
}

fn fmt(x: f64) -> String {
    format!("{x:.10e}")
}

fn stage1_figures(series: &TimeSeries, t_opt: f64) -> Result<(String, String, String)> {
    let mut raw = String::from("t,z\n");
    for (t, z) in series.times.iter().zip(&series.values) {
        let _ = writeln!(raw, "{},{}", fmt(*t), fmt(*z));
    }
    let spec = dft(&series.truncated(t_opt))?;
    let mut spectrum = String::from("omega,absF\n");
    for n in 0..spec.len() / 2 + 1 {
        let _ = writeln!(spectrum, "{},{}", fmt(spec.frequencies[n]), fmt(spec.magnitude(n)));
    }
    let mut sharp = String::from("tf,P\n");
    for (tf, p) in sharpness_curve(series)? {
        let _ = writeln!(sharp, "{},{}", fmt(tf), fmt(p));
    }
    Ok((raw, spectrum, sharp))
}

/// Writes plot-ready CSVs for a report whose recorded series live in
/// `series_dir`; returns the files written.
///
/// - `pole_c{m}_k{k}_{series,spectrum,sharpness}.csv`: `t,z`, `omega,absF`
///   (record truncated at the chosen `t_F`) and `tf,P`.
/// - `equator_c{m}_k{k}_series.csv` (`t,z,batch`) and `..._parabola.csv`
///   (`window,t,z`).
/// - `lines_channel{m}.csv`: `f,x,y,z,fitx,fity,fitz`.
pub fn write_figures(report: &Report, series_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    if report.settings.is_empty() {
        return Err(Error::Validation("report has no settings".into()));
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = out.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };

    for s in &report.settings {
        let tag = format!("c{}_k{}", s.channel, s.index);
        let path = series_dir.join(series_file_name(1, s.channel, s.index, 0));
        if path.exists() {
            let series = read_series_file(&path)?;
            let (raw, spectrum, sharp) = stage1_figures(&series, s.stage1.t_opt)?;
            put(format!("pole_{tag}_series.csv"), raw)?;
            put(format!("pole_{tag}_spectrum.csv"), spectrum)?;
            put(format!("pole_{tag}_sharpness.csv"), sharp)?;
        }
        let Some(st2) = &s.stage2 else { continue };
        let mut body = String::from("t,z,batch\n");
        for b in 0..st2.batches as u16 {
            let path = series_dir.join(series_file_name(2, s.channel, s.index, b));
            if !path.exists() {
                continue;
            }
            let series = read_series_file(&path)?;
            for (t, z) in series.times.iter().zip(&series.values) {
                let _ = writeln!(body, "{},{},{b}", fmt(*t), fmt(*z));
            }
        }
        put(format!("equator_{tag}_series.csv"), body)?;
        let mut par = String::from("window,t,z\n");
        for (w, win) in st2.windows.iter().enumerate() {
            let (lo, hi) = win.window;
            for i in 0..=40 {
                let t = lo + (hi - lo) * i as f64 / 40.0;
                let _ = writeln!(par, "{w},{},{}", fmt(t), fmt(win.parabola.eval(t)));
            }
        }
        put(format!("equator_{tag}_parabola.csv"), par)?;
    }

    for fit in &report.identified.channels {
        let mut body = String::from("f,x,y,z,fitx,fity,fitz\n");
        for s in report.settings.iter().filter(|s| s.channel == 0 || s.channel == fit.channel) {
            let v = s.selected;
            let line = |c: usize| fit.lines[c].intercept + fit.lines[c].slope * s.f;
            let _ = writeln!(
                body,
                "{},{},{},{},{},{},{}",
                fmt(s.f),
                fmt(v.x),
                fmt(v.y),
                fmt(v.z),
                fmt(line(0)),
                fmt(line(1)),
                fmt(line(2))
            );
        }
        put(format!("lines_channel{}.csv", fit.channel), body)?;
    }
    Ok(written)
}

/// Human-readable digest printed by the CLI.
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let v = |v: Vector3| format!("({:+.4}, {:+.4}, {:+.4})", v.x, v.y, v.z);
    let model = &report.identified.model;
    let _ =
        writeln!(out, "seed {}  method {:?}{}", report.seed, report.method, if report.exact { "  exact" } else { "" });
    let _ = writeln!(out, "d0  = {}", v(model.d0));
    for (m, d) in model.controls.iter().enumerate() {
        let _ = writeln!(out, "d{}  = {}", m + 1, v(*d));
    }
    if let Some(d) = &report.distances {
        let list: Vec<String> = d.iter().map(|x| format!("{x:.4}")).collect();
        let _ = writeln!(out, "distances: {}", list.join(", "));
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_of_small_sets() {
        assert_eq!(quantiles(&[]), None);
        assert_eq!(quantiles(&[2.0]), Some((2.0, 2.0, 2.0)));
        let (lo, med, hi) = quantiles(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(med, 3.0);
        assert!((lo - 1.4).abs() < 1e-12 && (hi - 4.6).abs() < 1e-12);
        assert_eq!(quantiles(&[1.0, 2.0]).unwrap().1, 1.5);
    }

    #[test]
    fn series_names() {
        assert_eq!(series_file_name(2, 1, 3, 0), "s2_c1_k3_b0.csv");
    }
}
